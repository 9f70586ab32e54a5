import math

import numpy as np
import pytest

from caresim.learn import (
    GaussianPolicy,
    Mlp,
    ObsNormalizer,
    PpoConfig,
    RolloutBatch,
    TrainerConfig,
    ValueNet,
    compute_gae,
    evaluate,
    ppo_update,
    random_policy,
    train,
)
from caresim.learn.ppo import normalize_advantages, surrogate_loss
from caresim.rng import SeededRng


def test_zero_weights_mean_equals_bias():
    net = Mlp([4, 64, 64, 3])
    net.b[-1][:] = [0.5, -0.25, 1.0]
    out = net.forward(np.ones(4))
    assert np.allclose(out, [0.5, -0.25, 1.0])


def test_tanh_saturation():
    net = Mlp([2, 64, 64, 1], rng=SeededRng(0))
    cache = {}
    net.forward(np.array([1000.0, -1000.0]), cache=cache)
    hidden = cache["acts"][1]
    assert np.all(np.abs(np.abs(hidden) - 1.0) < 1e-6)


def test_forward_deterministic():
    net = Mlp([3, 64, 64, 2], rng=SeededRng(3))
    x = np.array([0.1, -0.2, 0.3])
    assert np.array_equal(net.forward(x), net.forward(x))


# -- gradient checks ----------------------------------------------------------

def _flat_grads(policy, dW, db, dlog_std):
    flat = []
    for gw, gb in zip(dW, db):
        flat.append(gw.ravel())
        flat.append(gb.ravel())
    flat.append(dlog_std.ravel())
    return np.concatenate(flat)


def test_logprob_gradient_matches_finite_differences():
    rng = SeededRng(17)
    worst = 0.0
    for trial in range(20):
        obs_dim, act_dim = 5, 3
        policy = GaussianPolicy(obs_dim, act_dim, rng=rng)
        policy.net.W[-1] = np.array(
            [[rng.normal(0, 0.3) for _ in range(act_dim)]
             for _ in range(64)])
        obs = np.array([[rng.normal() for _ in range(obs_dim)]
                        for _ in range(4)])
        acts = np.array([[rng.normal() for _ in range(act_dim)]
                         for _ in range(4)])
        dlogp = np.array([rng.normal() for _ in range(4)])

        cache = {}
        policy.log_probs(obs, acts, cache=cache)
        dW, db, dls = policy.log_prob_grads(cache, dlogp)
        analytic = _flat_grads(policy, dW, db, dls)

        theta0 = policy.net.flat_parameters()
        fd = np.zeros_like(theta0)
        h = 1e-6
        for k in range(theta0.size):
            for sign in (1.0, -1.0):
                theta = theta0.copy()
                theta[k] += sign * h
                policy.net.set_flat_parameters(theta)
                lp = policy.log_probs(obs, acts)
                fd[k] += sign * float(np.dot(dlogp, lp)) / (2 * h)
        policy.net.set_flat_parameters(theta0)
        rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-10)
        worst = max(worst, rel)
    assert worst < 1e-4, worst


def test_value_gradient_matches_finite_differences():
    rng = SeededRng(23)
    vnet = ValueNet(4, rng=rng)
    obs = np.array([[rng.normal() for _ in range(4)] for _ in range(6)])
    target = np.array([rng.normal() for _ in range(6)])

    def loss():
        v = vnet.values(obs)
        return float(((v - target) ** 2).mean())

    cache = {}
    v = vnet.values(obs, cache=cache)
    dv = 2.0 * (v - target) / len(target)
    dW, db = vnet.value_grads(cache, dv)
    flat = []
    for gw, gb in zip(dW, db):
        flat.append(gw.ravel())
        flat.append(gb.ravel())
    analytic = np.concatenate(flat)

    theta0 = vnet.net.flat_parameters()
    fd = np.zeros_like(theta0)
    h = 1e-6
    for k in range(theta0.size):
        for sign in (1.0, -1.0):
            theta = theta0.copy()
            theta[k] += sign * h
            vnet.net.set_flat_parameters(theta)
            fd[k] += sign * loss() / (2 * h)
    vnet.net.set_flat_parameters(theta0)
    rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-10)
    assert rel < 1e-4, rel


def test_hand_computed_clipped_objective_single_transition():
    # one transition, hand arithmetic against the implementation
    ratio = np.array([1.3])
    adv = np.array([2.0])
    per_sample, active = surrogate_loss(ratio, adv, clip=0.2)
    # by hand: min(1.3 * 2.0, clip(1.3, 0.8, 1.2) * 2.0) = min(2.6, 2.4) = 2.4
    assert abs(per_sample[0] - 2.4) < 1e-8
    assert not active[0]

    ratio = np.array([1.1])
    per_sample, active = surrogate_loss(ratio, adv, clip=0.2)
    # min(2.2, 2.2) -> 2.2, gradient flows
    assert abs(per_sample[0] - 2.2) < 1e-8
    assert active[0]

    ratio = np.array([0.6])
    adv = np.array([-1.5])
    per_sample, active = surrogate_loss(ratio, adv, clip=0.2)
    # A < 0: min(0.6 * -1.5, 0.8 * -1.5) = min(-0.9, -1.2) = -1.2
    assert abs(per_sample[0] - (-1.2)) < 1e-8
    assert not active[0]


def test_ppo_loss_gradient_matches_finite_differences():
    """Full clipped-surrogate gradient vs central differences."""
    rng = SeededRng(41)
    obs_dim, act_dim, n = 4, 2, 16
    policy = GaussianPolicy(obs_dim, act_dim, rng=rng)
    policy.net.W[-1] = np.array([[rng.normal(0, 0.3) for _ in range(act_dim)]
                                 for _ in range(64)])
    obs = np.array([[rng.normal() for _ in range(obs_dim)] for _ in range(n)])
    acts = np.array([[rng.normal() for _ in range(act_dim)] for _ in range(n)])
    logp_old = policy.log_probs(obs, acts) + np.array(
        [0.1 * rng.normal() for _ in range(n)])
    adv = np.array([rng.normal() for _ in range(n)])
    clip = 0.2

    def loss_at(theta):
        policy.net.set_flat_parameters(theta)
        logp = policy.log_probs(obs, acts)
        ratio = np.exp(logp - logp_old)
        per_sample, _ = surrogate_loss(ratio, adv, clip)
        return -per_sample.mean()

    theta0 = policy.net.flat_parameters()
    cache = {}
    logp = policy.log_probs(obs, acts, cache=cache)
    ratio = np.exp(logp - logp_old)
    _, active = surrogate_loss(ratio, adv, clip)
    dlogp = np.where(active, -adv * ratio / n, 0.0)
    dW, db, dls = policy.log_prob_grads(cache, dlogp)
    analytic = _flat_grads(policy, dW, db, dls)

    fd = np.zeros_like(theta0)
    h = 1e-6
    for k in range(theta0.size):
        fd[k] = (loss_at(theta0 + h * _unit(theta0.size, k))
                 - loss_at(theta0 - h * _unit(theta0.size, k))) / (2 * h)
    policy.net.set_flat_parameters(theta0)
    rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-10)
    assert rel < 1e-4, rel


def _unit(n, k):
    e = np.zeros(n)
    e[k] = 1.0
    return e


# -- GAE and normalizer --------------------------------------------------------

def brute_force_gae(rewards, values, dones, gamma, lam):
    """Direct double-loop evaluation of the GAE sums, per episode."""
    n = len(rewards)
    adv = np.zeros(n)
    starts = [0] + [i + 1 for i in range(n) if dones[i]]
    for s in starts:
        e = s
        while e < n and not dones[e]:
            e += 1
        e = min(e, n - 1)
        for t in range(s, e + 1):
            total = 0.0
            for k in range(t, e + 1):
                v_next = 0.0 if (k == e or dones[k]) else values[k + 1]
                delta = rewards[k] + gamma * v_next - values[k]
                total += (gamma * lam) ** (k - t) * delta
            adv[t] = total
    return adv


def test_gae_matches_brute_force():
    rng = SeededRng(5)
    n = 37
    rewards = np.array([rng.normal() for _ in range(n)])
    values = np.array([rng.normal() for _ in range(n)])
    dones = np.zeros(n, dtype=bool)
    dones[9] = dones[24] = dones[n - 1] = True
    adv, returns = compute_gae(rewards, values, dones, 0.97, 0.9)
    oracle = brute_force_gae(rewards, values, dones, 0.97, 0.9)
    assert np.allclose(adv, oracle, atol=1e-10)
    assert np.allclose(returns, adv + values, atol=1e-12)


def test_advantage_normalization_exact():
    rng = SeededRng(8)
    adv = np.array([rng.normal(2.0, 3.0) for _ in range(500)])
    out = normalize_advantages(adv)
    assert abs(out.mean()) < 1e-6
    assert abs(out.std() - 1.0) < 1e-6


def test_normalizer_matches_single_pass_oracle():
    rng = SeededRng(13)
    norm = ObsNormalizer(3)
    chunks = []
    for _ in range(7):
        chunk = np.array([[rng.normal(1.0, 2.0) for _ in range(3)]
                          for _ in range(rng.randint(40) + 1)])
        chunks.append(chunk)
        norm.update(chunk)
    data = np.concatenate(chunks)
    assert np.abs(norm.mean - data.mean(axis=0)).max() < 1e-9
    assert np.abs(norm.var - data.var(axis=0)).max() < 1e-9


# -- updates -------------------------------------------------------------------

def _tiny_batch(policy, vnet, n=32, seed=3):
    rng = SeededRng(seed)
    obs = np.array([[rng.normal() for _ in range(policy.obs_dim)]
                    for _ in range(n)])
    acts = np.array([[rng.normal() for _ in range(policy.action_dim)]
                     for _ in range(n)])
    logp = policy.log_probs(policy.net.normalizer.normalize(obs), acts)
    rewards = np.array([rng.normal() for _ in range(n)])
    dones = np.zeros(n, dtype=bool)
    dones[-1] = True
    values = vnet.values(policy.net.normalizer.normalize(obs))
    return RolloutBatch(obs=obs, actions=acts, log_probs=logp,
                        rewards=rewards, dones=dones, values=values)


def test_zero_advantages_leave_policy_unchanged():
    rng = SeededRng(77)
    policy = GaussianPolicy(4, 2, rng=rng)
    vnet = ValueNet(4)  # zero weights: V identically 0
    batch = _tiny_batch(policy, vnet)
    # zero rewards with a zero value function: advantages exactly zero
    batch.rewards = np.zeros_like(batch.rewards)
    batch.values = np.zeros_like(batch.values)
    cfg = PpoConfig(epochs=3, minibatch=16, vf_coef=0.0, ent_coef=0.0,
                    gamma=0.99, lam=0.95)
    before = policy.net.flat_parameters()
    stats = ppo_update(policy, vnet, batch, cfg, SeededRng(0))
    after = policy.net.flat_parameters()
    assert np.array_equal(before, after)
    assert math.isfinite(stats["kl"])


def test_update_reports_finite_kl_and_changes_policy():
    rng = SeededRng(78)
    policy = GaussianPolicy(4, 2, rng=rng)
    vnet = ValueNet(4, rng=rng)
    batch = _tiny_batch(policy, vnet)
    before = policy.net.flat_parameters()
    stats = ppo_update(policy, vnet, batch, PpoConfig(epochs=2, minibatch=16),
                       SeededRng(0))
    assert math.isfinite(stats["kl"])
    assert not np.array_equal(before, policy.net.flat_parameters())
    assert 0.0 <= stats["clip_fraction"] <= 1.0


def test_policy_container_roundtrip(tmp_path):
    rng = SeededRng(99)
    policy = GaussianPolicy(6, 3, rng=rng)
    policy.net.normalizer.update(np.array([[rng.normal() for _ in range(6)]
                                           for _ in range(50)]))
    path = tmp_path / "p.bin"
    policy.save(path)
    loaded = GaussianPolicy.load(path)
    obs = np.array([0.3, -0.1, 0.5, 0.0, 1.0, -2.0])
    a1, lp1 = policy.act(obs, SeededRng(0))
    a2, lp2 = loaded.act(obs, SeededRng(0))
    assert np.array_equal(a1, a2)
    assert lp1 == lp2
    assert loaded.net.normalizer.count == policy.net.normalizer.count


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    try:
        Mlp.load(p)
        assert False
    except Exception as exc:
        assert "magic" in str(exc)


# -- training loop -------------------------------------------------------------

def _reach_factory():
    from caresim.envs.reach2d import Reach2dEnv

    return Reach2dEnv()


def test_train_smoke_and_deterministic(tmp_path):
    cfg = TrainerConfig(total_steps=4000, actors=4, rollout_len=50, seed=12,
                        ppo=PpoConfig(epochs=3, minibatch=100))
    r1 = train(_reach_factory, cfg, out_dir=tmp_path / "a", log=lambda *a: None)
    r2 = train(_reach_factory, cfg, out_dir=tmp_path / "b", log=lambda *a: None)
    c1 = [(p.update, p.steps, p.mean_return, p.kl) for p in r1.curve]
    c2 = [(p.update, p.steps, p.mean_return, p.kl) for p in r2.curve]
    assert c1 == c2
    assert (tmp_path / "a" / "policy_robot.bin").exists()
    b1 = (tmp_path / "a" / "policy_robot.bin").read_bytes()
    b2 = (tmp_path / "b" / "policy_robot.bin").read_bytes()
    assert b1 == b2


def test_worker_count_does_not_change_results(tmp_path):
    cfg1 = TrainerConfig(total_steps=2000, actors=4, rollout_len=50, seed=5,
                         workers=1, ppo=PpoConfig(epochs=2, minibatch=100))
    cfg8 = TrainerConfig(total_steps=2000, actors=4, rollout_len=50, seed=5,
                         workers=8, ppo=PpoConfig(epochs=2, minibatch=100))
    r1 = train(_reach_factory, cfg1, out_dir=tmp_path / "w1", log=lambda *a: None)
    r8 = train(_reach_factory, cfg8, out_dir=tmp_path / "w8", log=lambda *a: None)
    assert (tmp_path / "w1" / "policy_robot.bin").read_bytes() == \
           (tmp_path / "w8" / "policy_robot.bin").read_bytes()


def test_evaluate_counts_and_reproducibility():
    env = _reach_factory()
    policy = random_policy(6, 2, seed=1)
    rep1 = evaluate(env, {"robot": policy}, episodes=10, seed=3)
    rep2 = evaluate(env, {"robot": policy}, episodes=10, seed=3)
    assert rep1.episodes == 10
    assert len(rep1.returns) == 10
    assert rep1.returns == rep2.returns
    assert rep1.mean_reward == pytest.approx(np.mean(rep1.returns))
