"""Task-centric robot base placement: IK screening plus dexterity tie-break.

Before an episode, 100 candidate base poses (2D position + yaw) are
sampled around the task area. Each candidate is scored by how many goal
end-effector poses admit a collision-free IK solution; ties are broken by
the joint-limit-weighted kinematic isotropy (JLWKI) summed over the
reached goals. Selection is lexicographic: (reached_goals, jlwki_sum).

JLWKI here: per-joint weight w_i = 1 - |2 q_i - (hi_i + lo_i)| / (hi_i - lo_i)
(1 mid-range, 0 at a limit), weighted Jacobian J_w = J diag(w), and

    score = det(J_w J_w^T)^(1/m) / ((1/m) tr(J_w J_w^T)),   m = rows of J.

The AM-GM inequality pins the score to [0, 1]; it is 1 exactly when the
weighted Jacobian is isotropic and 0 at singularities. For chains with no
redundant joints (columns <= m) a zero weight also forces a zero score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Capsule, Transform, capsule_distance, quat_from_axis_angle, t_compose
from .kinematics import ArticulatedBody, forward_kinematics, jacobian, solve_ik
from .rng import SeededRng

SAMPLE_COUNT = 100
ANNULUS_INNER = 0.3
ANNULUS_OUTER = 1.2
YAW_SPREAD = math.radians(60.0)


def joint_limit_weights(body: ArticulatedBody, q, q_indices=None) -> np.ndarray:
    idxs = range(body.dof) if q_indices is None else q_indices
    w = []
    qmap = {}
    for link in range(body.n_links):
        k = body.q_index(link)
        if k >= 0:
            qmap[k] = body.joints[link]
    for k in idxs:
        j = qmap[k]
        span = j.l_max - j.l_min
        if span <= 0:
            w.append(0.0)
            continue
        wi = 1.0 - abs(2.0 * q[k] - (j.l_max + j.l_min)) / span
        w.append(max(0.0, wi))
    return np.array(w)


def jlwki(body: ArticulatedBody, q, link: int, q_indices=None,
          rows=slice(0, 6)) -> float:
    """Joint-limit-weighted kinematic isotropy in [0, 1].

    q_indices restricts the score to one arm's columns (other joints are
    treated as structure). rows selects the task dimensions m.
    """
    J = jacobian(body, q, link)[rows, :]
    if q_indices is not None:
        J = J[:, list(q_indices)]
        w = joint_limit_weights(body, q, q_indices)
    else:
        w = joint_limit_weights(body, q)
    Jw = J * w[None, :]
    m = Jw.shape[0]
    G = Jw @ Jw.T
    tr = float(np.trace(G))
    if tr <= 1e-12:
        return 0.0
    det = float(np.linalg.det(G))
    if det <= 0.0:
        return 0.0
    score = det ** (1.0 / m) / (tr / m)
    return min(1.0, max(0.0, score))


@dataclass
class GoalSet:
    """End-effector target poses the task wants reachable."""

    targets: list[Transform]
    use_orientation: bool = True

    def __post_init__(self):
        if not self.targets:
            raise ValueError("goal set must not be empty")

    def centroid(self):
        n = len(self.targets)
        return tuple(sum(t[1][i] for t in self.targets) / n for i in range(3))


@dataclass
class PlacementCandidate:
    base_pose: tuple[float, float, float]        # x, y, yaw
    reached_goals: int = 0
    jlwki_sum: float = 0.0
    ik_solutions: list = field(default_factory=list)  # per-goal q or None
    any_reached: bool = True

    def key(self) -> tuple:
        return (self.reached_goals, self.jlwki_sum)


def base_transform(x: float, y: float, yaw: float, z: float = 0.0) -> Transform:
    return (quat_from_axis_angle((0.0, 0.0, 1.0), yaw), (x, y, z))


def _collision_free(body: ArticulatedBody, q, obstacle_capsules,
                    check_links) -> bool:
    frames = forward_kinematics(body, q)
    for link in check_links:
        cap = body.capsules.get(link)
        if cap is None:
            continue
        wc = cap.transformed(frames[link])
        for obs in obstacle_capsules:
            d, _, _, _ = capsule_distance(wc, obs)
            if d < 0.0:
                return False
    return True


def evaluate_candidate(robot, goals: GoalSet, pose, rng: SeededRng,
                       obstacles, base_z: float = 0.0,
                       arm: str = "right") -> PlacementCandidate:
    """Score one base pose: count reachable goals, sum JLWKI over them."""
    body = robot.body.copy()
    body.base = base_transform(*pose, z=base_z)
    ee = robot.ee_links[arm]
    arm_idx = robot.arm_q_indices[arm]
    check_links = [l for l in body.capsules
                   if body.q_index(l) in arm_idx or
                   any(body.q_index(a) in arm_idx for a in _ancestors(body, l))]
    cand = PlacementCandidate(pose)
    for target in goals.targets:
        res = solve_ik(body, ee, target, rng=rng, max_restarts=3,
                       use_orientation=goals.use_orientation)
        if not res.success:
            cand.ik_solutions.append(None)
            continue
        if not _collision_free(body, res.q, obstacles, check_links):
            cand.ik_solutions.append(None)
            continue
        cand.reached_goals += 1
        cand.jlwki_sum += jlwki(body, res.q, ee, q_indices=arm_idx)
        cand.ik_solutions.append(res.q)
    return cand


def _ancestors(body: ArticulatedBody, link: int):
    out = []
    p = body.parents[link]
    while p >= 0:
        out.append(p)
        p = body.parents[p]
    return out


def sample_base_pose(rng: SeededRng, centroid, inner=ANNULUS_INNER,
                     outer=ANNULUS_OUTER) -> tuple[float, float, float]:
    """Annulus around the task centroid, yaw facing the centroid +- 60 deg."""
    radius = math.sqrt(rng.uniform(inner * inner, outer * outer))
    angle = rng.uniform(0.0, 2.0 * math.pi)
    x = centroid[0] + radius * math.cos(angle)
    y = centroid[1] + radius * math.sin(angle)
    facing = math.atan2(centroid[1] - y, centroid[0] - x)
    yaw = facing + rng.uniform(-YAW_SPREAD, YAW_SPREAD)
    return (x, y, yaw)


def screen_candidates(robot, goals: GoalSet, rng: SeededRng, obstacles=(),
                      samples: int = SAMPLE_COUNT, base_z: float = 0.0,
                      sample_fn=None, arm: str = "right") -> list[PlacementCandidate]:
    """Sample and score every candidate base pose.

    Each candidate is evaluated with its own rng stream derived from
    (seed, index), so evaluations are order-independent: they can run in
    parallel or be replayed one at a time and score identically.
    """
    centroid = goals.centroid()
    sampler = sample_fn or (lambda r: sample_base_pose(r, centroid))
    poses = [sampler(rng) for _ in range(samples)]
    return [evaluate_candidate(robot, goals, pose, rng.spawn(1000 + i),
                               obstacles, base_z, arm)
            for i, pose in enumerate(poses)]


def select_candidate(candidates: list[PlacementCandidate]) -> PlacementCandidate:
    """Lexicographic max over (reached_goals, jlwki_sum); first wins ties."""
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.key() > best.key():
            best = cand
    if best.reached_goals == 0:
        best.any_reached = False
    return best


def optimize_base_pose(robot, goals: GoalSet, rng: SeededRng, obstacles=(),
                       samples: int = SAMPLE_COUNT, base_z: float = 0.0,
                       sample_fn=None, arm: str = "right") -> PlacementCandidate:
    """Pick the best of `samples` sampled base poses.

    Primary key: goals reached (collision-free IK); tie-break: JLWKI sum.
    Deterministic given the rng seed. If nothing reaches any goal, the
    best-effort candidate comes back flagged any_reached=False.
    """
    return select_candidate(screen_candidates(
        robot, goals, rng, obstacles, samples, base_z, sample_fn, arm))
