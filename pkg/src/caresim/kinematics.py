"""Articulated bodies: joint trees, forward kinematics, Jacobians, IK.

A body is a tree of links. Each link carries the joint connecting it to its
parent (revolute, prismatic, or fixed), a fixed mounting transform, and
optionally a collision capsule plus mass properties. The joint position
vector q covers controllable (non-fixed) joints in link order.

Frames: link i's frame sits at its joint, after joint motion. World pose of
link i is  world(parent) * local_i * motion(q_i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import (
    Capsule,
    IDENTITY,
    Quat,
    Transform,
    Vec3,
    quat_angle,
    quat_conj,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    t_compose,
    t_point,
    vadd,
    vcross,
    vdot,
    vnorm,
    vscale,
    vsub,
)
from .rng import SeededRng

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"


@dataclass
class JointSpec:
    """Joint definition: axis in the parent-side frame, limits, actuation caps."""

    name: str
    axis: Vec3 = (0.0, 0.0, 1.0)
    jtype: str = REVOLUTE
    l_min: float = -math.pi
    l_max: float = math.pi
    tau_max: float = 50.0
    v_max: float = 1.0

    def __post_init__(self):
        if self.jtype not in (REVOLUTE, PRISMATIC, FIXED):
            raise ValueError(f"unknown joint type {self.jtype!r}")
        if self.jtype != FIXED:
            if self.l_min > self.l_max:
                raise ValueError(f"{self.name}: l_min > l_max")
            if self.tau_max <= 0 or self.v_max <= 0:
                raise ValueError(f"{self.name}: tau_max and v_max must be positive")


class ArticulatedBody:
    """Joint/link tree with capsule geometry. Value-semantic via copy()."""

    def __init__(self, name: str = "body"):
        self.name = name
        self.joints: list[JointSpec] = []
        self.parents: list[int] = []
        self.locals: list[Transform] = []
        self.capsules: dict[int, Capsule] = {}
        self.masses: list[float] = []
        self.coms: list[Vec3] = []
        self.base: Transform = IDENTITY
        self.q: list[float] = []
        self._qidx: list[int] = []   # link -> q index, -1 for fixed
        self._names: dict[str, int] = {}

    # -- construction ------------------------------------------------------

    def add_link(self, name: str, parent: int, local: Transform,
                 joint: JointSpec | None = None, capsule: Capsule | None = None,
                 mass: float = 0.0, com: Vec3 = (0.0, 0.0, 0.0)) -> int:
        if parent >= len(self.joints):
            raise ValueError(f"parent {parent} does not exist yet")
        if name in self._names:
            raise ValueError(f"duplicate link name {name!r}")
        joint = joint or JointSpec(name=name + "_fixed", jtype=FIXED)
        idx = len(self.joints)
        self.joints.append(joint)
        self.parents.append(parent)
        self.locals.append(local)
        self.masses.append(mass)
        self.coms.append(com)
        if capsule is not None:
            self.capsules[idx] = capsule
        if joint.jtype == FIXED:
            self._qidx.append(-1)
        else:
            self._qidx.append(len(self.q))
            self.q.append(min(max(0.0, joint.l_min), joint.l_max))
        self._names[name] = idx
        return idx

    def copy(self) -> "ArticulatedBody":
        b = ArticulatedBody(self.name)
        b.joints = list(self.joints)
        b.parents = list(self.parents)
        b.locals = list(self.locals)
        b.capsules = dict(self.capsules)
        b.masses = list(self.masses)
        b.coms = list(self.coms)
        b.base = self.base
        b.q = list(self.q)
        b._qidx = list(self._qidx)
        b._names = dict(self._names)
        # topology caches (built lazily by the stepper) stay valid on copies
        for attr in ("_q_link_cache", "_anc_q_cache"):
            if hasattr(self, attr):
                setattr(b, attr, getattr(self, attr))
        return b

    # -- lookups -----------------------------------------------------------

    @property
    def dof(self) -> int:
        return len(self.q)

    @property
    def n_links(self) -> int:
        return len(self.joints)

    def link_index(self, name: str) -> int:
        return self._names[name]

    def q_index(self, link: int) -> int:
        return self._qidx[link]

    def limits(self) -> tuple[list[float], list[float]]:
        lo, hi = [], []
        for j, qi in zip(self.joints, self._qidx):
            if qi >= 0:
                lo.append(j.l_min)
                hi.append(j.l_max)
        return lo, hi

    def controllable_joints(self) -> list[JointSpec]:
        return [j for j, qi in zip(self.joints, self._qidx) if qi >= 0]

    def clamp_q(self, q: list[float]) -> list[float]:
        lo, hi = self.limits()
        return [min(max(v, a), b) for v, a, b in zip(q, lo, hi)]

    def set_q(self, q) -> None:
        if len(q) != self.dof:
            raise ValueError(f"q has length {len(q)}, body has {self.dof} dof")
        self.q = self.clamp_q([float(v) for v in q])


def _joint_motion(joint: JointSpec, value: float) -> Transform:
    if joint.jtype == REVOLUTE:
        return (quat_from_axis_angle(joint.axis, value), (0.0, 0.0, 0.0))
    if joint.jtype == PRISMATIC:
        return ((1.0, 0.0, 0.0, 0.0), vscale(joint.axis, value))
    return IDENTITY


def forward_kinematics(body: ArticulatedBody, q=None) -> list[Transform]:
    """World transform of every link. q defaults to the body's current q."""
    if q is None:
        q = body.q
    elif len(q) != body.dof:
        raise ValueError(f"q has length {len(q)}, body has {body.dof} dof")
    world: list[Transform] = []
    for i in range(body.n_links):
        parent = body.base if body.parents[i] < 0 else world[body.parents[i]]
        frame = t_compose(parent, body.locals[i])
        qi = body._qidx[i]
        if qi >= 0:
            frame = t_compose(frame, _joint_motion(body.joints[i], q[qi]))
        world.append(frame)
    return world


def _path_to_root(body: ArticulatedBody, link: int) -> list[int]:
    path = []
    while link >= 0:
        path.append(link)
        link = body.parents[link]
    path.reverse()
    return path


def jacobian(body: ArticulatedBody, q, link: int,
             frames: list[Transform] | None = None) -> np.ndarray:
    """Geometric Jacobian (6 x dof) of the link origin: rows [linear; angular]."""
    if link < 0 or link >= body.n_links:
        raise ValueError(f"invalid link id {link}")
    if frames is None:
        frames = forward_kinematics(body, q)
    J = np.zeros((6, body.dof))
    p_eff = frames[link][1]
    for i in _path_to_root(body, link):
        qi = body._qidx[i]
        if qi < 0:
            continue
        joint = body.joints[i]
        # Axis lives in the pre-motion joint frame; for a revolute joint the
        # motion rotates about that same axis, so the post-motion frame works.
        axis_w = quat_rotate(frames[i][0], joint.axis)
        if joint.jtype == REVOLUTE:
            lin = vcross(axis_w, vsub(p_eff, frames[i][1]))
            J[0:3, qi] = lin
            J[3:6, qi] = axis_w
        else:
            J[0:3, qi] = axis_w
    return J


@dataclass
class IkResult:
    success: bool
    q: list[float]
    pos_residual: float
    ori_residual: float
    iterations: int


def pose_error(current: Transform, target: Transform) -> np.ndarray:
    """6-vector twist error: translation plus axis-angle rotation."""
    dp = vsub(target[1], current[1])
    dq = quat_mul(target[0], quat_conj(current[0]))
    if dq[0] < 0:
        dq = (-dq[0], -dq[1], -dq[2], -dq[3])
    angle = 2.0 * math.acos(min(1.0, dq[0]))
    s = math.sqrt(max(0.0, 1.0 - dq[0] * dq[0]))
    if s < 1e-9:
        rot = (0.0, 0.0, 0.0)
    else:
        rot = vscale((dq[1], dq[2], dq[3]), angle / s)
    return np.array([dp[0], dp[1], dp[2], rot[0], rot[1], rot[2]])


POS_TOL = 0.005      # 5 mm
ORI_TOL = math.radians(5.0)


def solve_ik(body: ArticulatedBody, link: int, target: Transform,
             rng: SeededRng | None = None, max_restarts: int = 10,
             iters: int = 100, use_orientation: bool = True,
             damping: float = 0.05) -> IkResult:
    """Damped-least-squares IK with random restarts.

    Success means position residual < 5 mm and (when orientation is used)
    orientation residual < 5 deg, with q inside joint limits. Unreachable
    targets come back as a failure result, not an exception.
    """
    for v in target[1]:
        if not math.isfinite(v):
            raise ValueError("IK target must be finite")
    lo, hi = body.limits()
    lo_a = np.array(lo)
    hi_a = np.array(hi)
    rows = slice(0, 6) if use_orientation else slice(0, 3)

    best = IkResult(False, list(body.q), float("inf"), float("inf"), 0)
    q0 = np.array(body.q)
    total_iters = 0
    for restart in range(max_restarts):
        if restart == 0:
            q = q0.copy()
        else:
            u = np.array([rng.random() if rng else 0.5 for _ in range(body.dof)])
            q = lo_a + u * (hi_a - lo_a)
        def residuals(qv):
            frames = forward_kinematics(body, qv.tolist())
            err = pose_error(frames[link], target)[rows]
            pos = float(np.linalg.norm(err[:3]))
            ori = quat_angle(frames[link][0], target[0]) if use_orientation else 0.0
            return frames, err, pos, ori

        frames, err, pos_res, ori_res = residuals(q)
        for _ in range(iters):
            total_iters += 1
            if pos_res < best.pos_residual:
                best = IkResult(False, q.tolist(), pos_res, ori_res, total_iters)
            if pos_res < POS_TOL and ori_res < ORI_TOL:
                return IkResult(True, q.tolist(), pos_res, ori_res, total_iters)
            # Clamp the twist so far-away targets do not wreck linearization.
            e = err.copy()
            pn = np.linalg.norm(e[:3])
            if pn > 0.1:
                e[:3] *= 0.1 / pn
            if use_orientation:
                rn = np.linalg.norm(e[3:])
                if rn > 0.5:
                    e[3:] *= 0.5 / rn
            J = jacobian(body, q.tolist(), link, frames)[rows, :]
            JJt = J @ J.T + (damping ** 2) * np.eye(J.shape[0])
            dq = J.T @ np.linalg.solve(JJt, e)
            # Cap the step so linearization stays honest near singularities.
            step = float(np.max(np.abs(dq)))
            if step > 0.5:
                dq *= 0.5 / step
            # Backtrack: shrink the step until the error actually drops.
            cur_norm = float(np.linalg.norm(err))
            scale = 1.0
            for _ in range(4):
                q_try = np.clip(q + scale * dq, lo_a, hi_a)
                frames_t, err_t, pos_t, ori_t = residuals(q_try)
                if float(np.linalg.norm(err_t)) < cur_norm:
                    break
                scale *= 0.5
            q, frames, err, pos_res, ori_res = q_try, frames_t, err_t, pos_t, ori_t
        if pos_res < best.pos_residual:
            best = IkResult(False, q.tolist(), pos_res, ori_res, total_iters)
        if pos_res < POS_TOL and ori_res < ORI_TOL:
            return IkResult(True, q.tolist(), pos_res, ori_res, total_iters)
    return best


def gravity_load(body: ArticulatedBody, frames: list[Transform],
                 gravity: Vec3 = (0.0, 0.0, -9.81)) -> list[float]:
    """Gravity torque magnitude on each controllable joint from its subtree.

    Used by quasi-static stepping to scale motion by available strength.
    """
    n = body.n_links
    children: list[list[int]] = [[] for _ in range(n)]
    for i, p in enumerate(body.parents):
        if p >= 0:
            children[p].append(i)

    # Post-order accumulation of (total mass, weighted world CoM) per subtree.
    sub_mass = [0.0] * n
    sub_moment = [(0.0, 0.0, 0.0)] * n
    for i in range(n - 1, -1, -1):
        m = body.masses[i]
        c = t_point(frames[i], body.coms[i])
        total_m = m
        moment = vscale(c, m)
        for ch in children[i]:
            total_m += sub_mass[ch]
            moment = vadd(moment, sub_moment[ch])
        sub_mass[i] = total_m
        sub_moment[i] = moment

    loads = [0.0] * body.dof
    for i in range(n):
        qi = body._qidx[i]
        if qi < 0:
            continue
        joint = body.joints[i]
        if sub_mass[i] <= 0.0:
            continue
        axis_w = quat_rotate(frames[i][0], joint.axis)
        if joint.jtype == PRISMATIC:
            loads[qi] = abs(vdot(axis_w, gravity)) * sub_mass[i]
            continue
        com_w = vscale(sub_moment[i], 1.0 / sub_mass[i])
        arm = vsub(com_w, frames[i][1])
        torque = vcross(arm, vscale(gravity, sub_mass[i]))
        loads[qi] = abs(vdot(axis_w, torque))
    return loads
