"""Deterministic episode traces: record, write, replay, verify.

A trace file is newline-delimited canonical JSON. Line 1 is a header
carrying the RunConfig; each following line is one TraceFrame:

    {"t": 1, "action": [...], "human_action": [...]|null,
     "robot_q": [...], "human_q": [...],
     "tool_pos": [x,y,z], "tool_quat": [w,x,y,z],
     "obs": [...], "r_task": f, "costs": [7 floats],
     "r_pref": f, "r": f, "done": b,
     "events": {...}, "contacts": [[body_a, link_a, body_b, link_b,
                                    force, penetration], ...]}

Replaying re-simulates from the header config and compares the
regenerated bytes line by line; any divergence is reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..learn import GaussianPolicy, random_policy
from ..rng import SeededRng
from .canon import canon_dumps, canon_loads
from .config import RunConfig


def _jsonable_events(events: dict) -> dict:
    out = {}
    for k, v in events.items():
        if isinstance(v, (list, tuple)):
            out[k] = [float(x) for x in v]
        elif isinstance(v, bool):
            out[k] = v
        elif isinstance(v, (int, np.integer)):
            out[k] = int(v)
        elif isinstance(v, (float, np.floating)):
            out[k] = float(v)
    return out


def frame_dict(t, action, human_action, env, breakdown, done, info, obs) -> dict:
    scene = env.scene
    robot_q = list(scene.bodies["robot"].q) if scene else []
    human_q = list(scene.bodies["human"].q) if scene and "human" in scene.bodies else []
    tool = scene.tool_pose if scene else ((1.0, 0, 0, 0), (0, 0, 0))
    contacts = [[c.body_a, c.link_a, c.body_b, c.link_b, c.force, c.penetration]
                for c in (scene.contacts if scene else [])]
    robot_obs = obs["robot"] if isinstance(obs, dict) else obs
    return {
        "t": t,
        "action": [float(v) for v in action],
        "human_action": ([float(v) for v in human_action]
                         if human_action is not None else None),
        "robot_q": robot_q,
        "human_q": human_q,
        "tool_pos": list(tool[1]),
        "tool_quat": list(tool[0]),
        "obs": [float(v) for v in robot_obs],
        "r_task": breakdown.r_task,
        "costs": list(breakdown.costs.as_tuple()),
        "r_pref": breakdown.r_preference,
        "r": breakdown.r,
        "done": bool(done),
        "events": _jsonable_events(info.get("events", {})),
        "contacts": contacts,
    }


def _load_policy(spec: str, obs_dim: int, action_dim: int):
    if spec in ("", "zero"):
        return None
    if spec == "random":
        return random_policy(obs_dim, action_dim, seed=0)
    return GaussianPolicy.load(spec)


class _Driver:
    """Action source for trace generation: policy file, random, or zero."""

    def __init__(self, config: RunConfig, env):
        obs = env.reset(seed=0)
        robot_obs = obs["robot"] if isinstance(obs, dict) else obs
        self.robot_policy = _load_policy(config.policy, len(robot_obs),
                                         env.robot_action_dim)
        self.human_policy = None
        if config.active_human:
            self.human_policy = _load_policy(config.human_policy,
                                             len(obs["human"]),
                                             env.human_action_dim)
        self.active = config.active_human

    def actions(self, obs, rng):
        per_agent = obs if isinstance(obs, dict) else {"robot": obs}
        if self.robot_policy is None:
            ra = self._zero_robot
        else:
            a, _ = self.robot_policy.act(np.asarray(per_agent["robot"]), rng)
            ra = np.clip(a, -1.0, 1.0).tolist()
        ha = None
        if self.active:
            if self.human_policy is None:
                ha = self._zero_human
            else:
                a, _ = self.human_policy.act(np.asarray(per_agent["human"]), rng)
                ha = np.clip(a, -1.0, 1.0).tolist()
        return ra, ha

    def bind_dims(self, robot_dim: int, human_dim: int):
        self._zero_robot = [0.0] * robot_dim
        self._zero_human = [0.0] * human_dim


def generate_trace(config: RunConfig, episode_seed: int | None = None) -> list[str]:
    """Simulate one episode under the config; returns canonical lines."""
    env = config.make_env()
    driver = _Driver(config, env)
    driver.bind_dims(env.robot_action_dim,
                     env.human_action_dim if config.active_human else 0)
    seed = config.seed if episode_seed is None else episode_seed
    rng = SeededRng(seed).spawn(99)
    obs = env.reset(seed=seed)
    lines = [canon_dumps({"type": "header", "version": 1,
                          "config": canon_loads(config.to_json())})]
    t = 0
    done = False
    while not done:
        ra, ha = driver.actions(obs, rng)
        obs, breakdown, done, info = env.step(ra, ha)
        t += 1
        lines.append(canon_dumps(frame_dict(t, ra, ha, env, breakdown, done,
                                            info, obs)))
    return lines


def write_trace(config: RunConfig, path, episode_seed: int | None = None) -> int:
    lines = generate_trace(config, episode_seed)
    Path(path).write_text("\n".join(lines) + "\n")
    return len(lines) - 1


@dataclass
class ReplayResult:
    frames: int
    divergences: int
    first_divergence: int | None

    @property
    def ok(self) -> bool:
        return self.divergences == 0


def replay_trace(path) -> ReplayResult:
    """Re-simulate from the header config and compare bytes line by line."""
    stored = Path(path).read_text().splitlines()
    header = canon_loads(stored[0])
    if header.get("type") != "header":
        raise ValueError(f"{path}: missing trace header")
    config = RunConfig.from_dict(header["config"])
    regenerated = generate_trace(config)
    divergences = 0
    first = None
    n = max(len(stored), len(regenerated))
    for i in range(n):
        a = stored[i] if i < len(stored) else None
        b = regenerated[i] if i < len(regenerated) else None
        if a != b:
            divergences += 1
            if first is None:
                first = i
    return ReplayResult(frames=len(stored) - 1, divergences=divergences,
                        first_divergence=first)
