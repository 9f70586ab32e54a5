"""Clipped-surrogate policy optimization with GAE.

One update = 10 epochs of minibatch Adam steps over a complete batch of
rollouts. The loss is

    L = -E[min(r A, clip(r, 1-eps, 1+eps) A)]
        + vf_coef * E[(V - returns)^2]
        - ent_coef * entropy

with r the probability ratio exp(logp_new - logp_old) and A the
batch-normalized GAE advantages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import SeededRng
from .nets import Adam, GaussianPolicy, ValueNet


@dataclass
class PpoConfig:
    clip_ratio: float = 0.2
    lr: float = 3e-4
    epochs: int = 10
    minibatch: int = 64
    gamma: float = 0.99
    lam: float = 0.95
    vf_coef: float = 0.5
    ent_coef: float = 0.0


class UpdateError(Exception):
    """Non-finite loss or gradients: the update is aborted."""


@dataclass
class RolloutBatch:
    """Flat per-step arrays for one agent across all actors."""

    obs: np.ndarray          # raw observations (not normalized)
    actions: np.ndarray
    log_probs: np.ndarray    # behavior log-probs at collection time
    rewards: np.ndarray
    dones: np.ndarray        # episode-boundary flags
    values: np.ndarray       # V(s) under the collecting value function
    bootstrap: np.ndarray = field(default=None)   # V(s') at truncated ends
    advantages: np.ndarray = field(default=None)
    returns: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.rewards)


def compute_gae(rewards, values, dones, gamma: float, lam: float,
                bootstrap=None):
    """Generalized advantage estimation over concatenated episodes.

    dones marks episode boundaries. True terminal states bootstrap with
    zero; time-limit truncations pass V(s_next) through `bootstrap`
    (nonzero only on boundary steps), which removes the bias a zero
    bootstrap would put on value targets near the cutoff.
    """
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        if dones[t]:
            next_value = bootstrap[t] if bootstrap is not None else 0.0
            nonterminal = 0.0
        else:
            next_value = values[t + 1] if t + 1 < n else 0.0
            nonterminal = 1.0
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    returns = adv + values
    return adv, returns


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def surrogate_loss(ratio: np.ndarray, adv: np.ndarray, clip: float):
    """Per-sample clipped surrogate and the gradient mask.

    Returns (per_sample_objective, active) where active marks samples whose
    gradient flows through the unclipped ratio term.
    """
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    per_sample = np.minimum(ratio * adv, clipped * adv)
    active = np.where(adv >= 0.0, ratio < 1.0 + clip, ratio > 1.0 - clip)
    return per_sample, active


def ppo_update(policy: GaussianPolicy, value_net: ValueNet,
               batch: RolloutBatch, config: PpoConfig,
               rng: SeededRng) -> dict:
    """Run the configured epochs of minibatch updates in place.

    Returns stats: mean losses, approximate KL(old || new) on the full
    batch, and clip fraction.
    """
    n = len(batch)
    obs_n = policy.net.normalizer.normalize(batch.obs)
    adv_raw, returns = compute_gae(batch.rewards, batch.values, batch.dones,
                                   config.gamma, config.lam,
                                   bootstrap=batch.bootstrap)
    adv = normalize_advantages(adv_raw)
    batch.advantages = adv
    batch.returns = returns

    params = policy.net.parameters()
    vparams = value_net.net.parameters()
    opt = getattr(policy, "_adam", None)
    if opt is None or opt.lr != config.lr:
        opt = Adam(params, lr=config.lr)
        policy._adam = opt
    vopt = getattr(value_net, "_adam", None)
    if vopt is None or vopt.lr != config.lr:
        vopt = Adam(vparams, lr=config.lr)
        value_net._adam = vopt

    idx = list(range(n))
    pi_losses, v_losses, clip_fracs = [], [], []
    for _ in range(config.epochs):
        rng.shuffle(idx)
        for start in range(0, n, config.minibatch):
            mb = np.array(idx[start:start + config.minibatch])
            cache = {}
            logp = policy.log_probs(obs_n[mb], batch.actions[mb], cache=cache)
            ratio = np.exp(logp - batch.log_probs[mb])
            per_sample, active = surrogate_loss(ratio, adv[mb],
                                                config.clip_ratio)
            pi_loss = -per_sample.mean()
            m = len(mb)
            # d(pi_loss)/d(logp) = -adv * ratio * active / m
            dlogp = np.where(active, -adv[mb] * ratio / m, 0.0)
            if config.ent_coef != 0.0:
                dlogp_ent = np.zeros(m)  # entropy independent of mean
            dW, db, dlog_std = policy.log_prob_grads(cache, dlogp)
            if config.ent_coef != 0.0:
                # d(-ent_coef * entropy)/d(log_std) = -ent_coef per dim
                dlog_std = dlog_std - config.ent_coef
            grads = []
            for gw, gb in zip(dW, db):
                grads.append(gw)
                grads.append(gb)
            grads.append(dlog_std)

            vcache = {}
            values = value_net.values(obs_n[mb], cache=vcache)
            verr = values - returns[mb]
            v_loss = config.vf_coef * float((verr ** 2).mean())
            dv = config.vf_coef * 2.0 * verr / m
            vdW, vdb = value_net.value_grads(vcache, dv)
            vgrads = []
            for gw, gb in zip(vdW, vdb):
                vgrads.append(gw)
                vgrads.append(gb)

            total = pi_loss + v_loss
            if not np.isfinite(total):
                raise UpdateError(f"non-finite loss: pi={pi_loss} v={v_loss}")
            opt.step(grads)
            vopt.step(vgrads)
            pi_losses.append(pi_loss)
            v_losses.append(v_loss)
            clip_fracs.append(float((~active).mean()))

    logp_new = policy.log_probs(obs_n, batch.actions)
    kl = float(np.mean(batch.log_probs - logp_new))
    if not np.isfinite(kl):
        raise UpdateError("non-finite KL after update")
    return {
        "pi_loss": float(np.mean(pi_losses)),
        "v_loss": float(np.mean(v_losses)),
        "kl": kl,
        "clip_fraction": float(np.mean(clip_fracs)),
        "entropy": policy.entropy(),
        "adv_mean": float(adv.mean()),
        "adv_std": float(adv.std()),
    }
