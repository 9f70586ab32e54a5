"""Training and evaluation loops: vectorized rollouts, co-optimization.

Rollout collection runs N independent actors, each owning its environment
instance and rng streams derived from (seed, actor index). Batches are
assembled in actor-index order, so the thread-pool worker count never
changes any result.

robot_only mode trains one policy against the static-pose human.
co_optimize trains a robot policy and a human policy concurrently in the
same scenes; both receive the identical per-step reward.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..rng import SeededRng
from .nets import GaussianPolicy, ValueNet
from .ppo import PpoConfig, RolloutBatch, compute_gae, ppo_update

ROBOT_ONLY = "robot_only"
CO_OPTIMIZE = "co_optimize"


@dataclass
class TrainerConfig:
    total_steps: int = 200_000
    actors: int = 8              # paper scale: 36
    rollout_len: int = 200
    workers: int = 1
    seed: int = 0
    ppo: PpoConfig = field(default_factory=PpoConfig)

    @property
    def steps_per_update(self) -> int:
        return self.actors * self.rollout_len


@dataclass
class CurvePoint:
    update: int
    steps: int
    mean_return: float
    kl: float


class Actor:
    """One environment instance plus its private rng streams."""

    def __init__(self, env, index: int, seed: int):
        self.env = env
        self.index = index
        base = SeededRng(seed).spawn(7000 + index)
        self.episode_rng = base.spawn(1)
        self.action_rng = base.spawn(2)
        self.obs = None
        self.episode_return = 0.0
        self.finished_returns: list[float] = []
        self.finished_successes: list[bool] = []

    def begin_episode(self):
        seed = self.episode_rng.next_u64() % (2 ** 31)
        self.obs = self.env.reset(seed=seed)
        self.episode_return = 0.0


def _collect_actor(actor: Actor, policies: dict, steps: int, co_opt: bool):
    """Roll one actor for `steps` env steps; returns per-agent trajectories."""
    out = {name: {"obs": [], "actions": [], "log_probs": [], "rewards": [],
                  "dones": [], "values": [], "bootstrap": []}
           for name in policies}
    env = actor.env
    for _ in range(steps):
        if actor.obs is None or env.done:
            actor.begin_episode()
        obs = actor.obs
        per_agent_obs = obs if isinstance(obs, dict) else {"robot": obs}
        actions = {}
        for name, (policy, value_net) in policies.items():
            o = np.asarray(per_agent_obs[name], dtype=np.float64)
            a, logp = policy.act(o, actor.action_rng)
            on = policy.net.normalizer.normalize(o)
            v = float(value_net.values(on[None, :])[0])
            out[name]["obs"].append(o)
            out[name]["actions"].append(a)
            out[name]["log_probs"].append(logp)
            out[name]["values"].append(v)
            actions[name] = np.clip(a, -1.0, 1.0)
        if co_opt:
            next_obs, breakdown, done, info = env.step(
                actions["robot"], actions.get("human"))
        else:
            next_obs, breakdown, done, info = env.step(actions["robot"])
        r = breakdown.r
        actor.episode_return += r
        # time-limit cutoffs are truncations, not terminal states: bootstrap
        # the tail with V(s_next) so values near the cutoff stay unbiased
        truncated = done and env.t >= env.spec.episode_steps \
            and not info.get("terminal", False)
        next_per_agent = (next_obs if isinstance(next_obs, dict)
                          else {"robot": next_obs})
        for name, (policy, value_net) in policies.items():
            out[name]["rewards"].append(r)
            out[name]["dones"].append(done)
            bv = 0.0
            if truncated:
                o2 = np.asarray(next_per_agent[name], dtype=np.float64)
                on2 = policy.net.normalizer.normalize(o2)
                bv = float(value_net.values(on2[None, :])[0])
            out[name]["bootstrap"].append(bv)
        actor.obs = next_obs
        if done:
            actor.finished_returns.append(actor.episode_return)
            actor.finished_successes.append(bool(info.get("success", False)))
            actor.obs = None
    return out


def collect_batches(actors: list[Actor], policies: dict, steps: int,
                    workers: int, co_opt: bool) -> dict[str, RolloutBatch]:
    """Roll every actor and merge trajectories in actor-index order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda a: _collect_actor(a, policies, steps, co_opt), actors))
    else:
        results = [_collect_actor(a, policies, steps, co_opt) for a in actors]
    batches = {}
    for name in policies:
        obs = np.concatenate([np.asarray(r[name]["obs"]) for r in results])
        batches[name] = RolloutBatch(
            obs=obs,
            actions=np.concatenate([np.asarray(r[name]["actions"]) for r in results]),
            log_probs=np.concatenate([np.asarray(r[name]["log_probs"]) for r in results]),
            rewards=np.concatenate([np.asarray(r[name]["rewards"]) for r in results]),
            dones=np.concatenate([np.asarray(r[name]["dones"]) for r in results]),
            values=np.concatenate([np.asarray(r[name]["values"]) for r in results]),
            bootstrap=np.concatenate([np.asarray(r[name]["bootstrap"])
                                      for r in results]),
        )
    return batches


@dataclass
class TrainResult:
    policy_paths: dict[str, str]
    curve: list[CurvePoint]
    mean_return_first: float
    mean_return_last: float


def train(env_factory, config: TrainerConfig, mode: str = ROBOT_ONLY,
          out_dir: str | Path = "runs/train", curve_name: str = "curve.tsv",
          log=print) -> TrainResult:
    """Train until total_steps; persists policy containers and the curve."""
    if mode not in (ROBOT_ONLY, CO_OPTIMIZE):
        raise ValueError(f"unknown mode {mode!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    actors = [Actor(env_factory(), i, config.seed) for i in range(config.actors)]
    probe = actors[0].env
    probe_obs = probe.reset(seed=0)
    co_opt = mode == CO_OPTIMIZE
    if co_opt and not isinstance(probe_obs, dict):
        raise ValueError("co_optimize requires an active-human environment")

    init_rng = SeededRng(config.seed).spawn(1)
    policies: dict[str, tuple] = {}
    robot_obs = probe_obs["robot"] if isinstance(probe_obs, dict) else probe_obs
    policies["robot"] = (
        GaussianPolicy(len(robot_obs), probe.robot_action_dim, rng=init_rng),
        ValueNet(len(robot_obs), rng=init_rng),
    )
    if co_opt:
        human_obs = probe_obs["human"]
        policies["human"] = (
            GaussianPolicy(len(human_obs), probe.human_action_dim, rng=init_rng),
            ValueNet(len(human_obs), rng=init_rng),
        )
    for actor in actors:
        actor.obs = None
        actor.env.done = True

    update_rng = SeededRng(config.seed).spawn(2)
    curve: list[CurvePoint] = []
    steps_done = 0
    update = 0
    while steps_done < config.total_steps:
        batches = collect_batches(actors, policies, config.rollout_len,
                                  config.workers, co_opt)
        steps_done += config.steps_per_update
        update += 1
        kl = 0.0
        for name, (policy, value_net) in policies.items():
            batch = batches[name]
            # the update must see the same normalization the behavior policy
            # used at collection time; new statistics take effect next batch
            stats = ppo_update(policy, value_net, batch, config.ppo,
                               update_rng)
            policy.net.normalizer.update(batch.obs)
            if name == "robot":
                kl = stats["kl"]
        returns = [r for a in actors for r in a.finished_returns]
        mean_ret = float(np.mean(returns[-10 * config.actors:])) if returns else 0.0
        curve.append(CurvePoint(update, steps_done, mean_ret, kl))
        if update % 5 == 1:
            log(f"update {update:4d}  steps {steps_done:8d}  "
                f"return {mean_ret:9.2f}  kl {kl:+.4f}")

    paths = {}
    for name, (policy, _) in policies.items():
        p = out_dir / f"policy_{name}.bin"
        policy.save(p)
        paths[name] = str(p)
    curve_path = out_dir / curve_name
    with open(curve_path, "w") as fh:
        fh.write("update\tsteps\tmean_return\tkl\n")
        for pt in curve:
            fh.write(f"{pt.update}\t{pt.steps}\t{pt.mean_return!r}\t{pt.kl!r}\n")

    returns = [r for a in actors for r in a.finished_returns]
    k = max(1, len(returns) // 10)
    return TrainResult(
        policy_paths=paths,
        curve=curve,
        mean_return_first=float(np.mean(returns[:k])) if returns else 0.0,
        mean_return_last=float(np.mean(returns[-k:])) if returns else 0.0,
    )


@dataclass
class EvalReport:
    env_id: str
    episodes: int
    mean_reward: float
    std_reward: float
    success_rate: float
    returns: list[float] = field(default_factory=list)

    def row(self) -> str:
        return (f"{self.env_id}\t{self.episodes}\t{self.mean_reward!r}\t"
                f"{self.std_reward!r}\t{self.success_rate!r}")


def evaluate(env, policies: dict, episodes: int = 100, seed: int = 0,
             deterministic: bool = True) -> EvalReport:
    """Run evaluation rollouts; reports mean/std reward and success rate.

    policies maps agent name ("robot", optionally "human") to a
    GaussianPolicy. Deterministic given the seed.
    """
    rng = SeededRng(seed)
    action_rng = rng.spawn(1)
    returns = []
    successes = 0
    for ep in range(episodes):
        ep_seed = rng.next_u64() % (2 ** 31)
        obs = env.reset(seed=ep_seed)
        total = 0.0
        done = False
        while not done:
            per_agent = obs if isinstance(obs, dict) else {"robot": obs}
            acts = {}
            for name, policy in policies.items():
                a, _ = policy.act(np.asarray(per_agent[name]), action_rng,
                                  deterministic=deterministic)
                acts[name] = np.clip(a, -1.0, 1.0)
            obs, breakdown, done, info = env.step(acts["robot"],
                                                  acts.get("human"))
            total += breakdown.r
        returns.append(total)
        if info.get("success", False):
            successes += 1
    return EvalReport(
        env_id=getattr(env, "spec", env).env_id if hasattr(env, "spec") else "env",
        episodes=episodes,
        mean_reward=float(np.mean(returns)),
        std_reward=float(np.std(returns)),
        success_rate=successes / episodes,
        returns=returns,
    )


def random_policy(obs_dim: int, action_dim: int, seed: int = 0) -> GaussianPolicy:
    """Untrained policy baseline (random network, unit exploration noise)."""
    return GaussianPolicy(obs_dim, action_dim, rng=SeededRng(seed), init_log_std=0.0)
