"""Quasi-static scene stepping: the "physics" contract of the framework.

There is no forward dynamics. Each control step (dt = 0.1 s, split into 10
sub-steps) moves every controlled joint toward its per-step target:

    commanded chains (policy deltas)   displacement clipped to v_max*dt,
                                       then scaled by available strength
                                       min(1, tau_max_eff / gravity_load)
    held chains (static pose targets)  proportional snap toward target,
                                       strength-scaled, no speed clip
    passive chains (hanging limbs)     sag toward a rest pose at a capped
                                       rate, blocked by supports

Contact handling is projection plus penalty. Motion that would push one
capsule through another is bisected back so residual penetration stays at
or below 1 mm; the displacement that was blocked (plus any residual
penetration) is the "virtual squeeze" and is reported as a penalty force
F = k_c * squeeze. Pairs flagged as yielding instead push the yielding
human chain out of the way, which is how a tool can lift an arm.

Determinism: stepping draws no randomness; identical (scene, commands)
produce bit-identical next states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geom import (
    Capsule,
    Transform,
    Vec3,
    capsule_distance,
    t_compose,
    vadd,
    vdot,
    vscale,
    vsub,
)
from .kinematics import ArticulatedBody, forward_kinematics, gravity_load, jacobian

DT = 0.1
SUBSTEPS = 10
CONTACT_STIFFNESS = 5000.0     # N/m
PENETRATION_TOL = 0.001        # m
PASSIVE_SAG_RATE = 1.0         # rad/s toward rest for passive chains
YIELD_RATE_CAP = 0.05          # rad per sub-step for yielding joints

MODE_COMMANDED = "commanded"
MODE_HELD = "held"
MODE_PASSIVE = "passive"


@dataclass
class ContactReport:
    body_a: str
    link_a: int
    body_b: str
    link_b: int
    point: Vec3
    normal: Vec3          # unit, pointing from b toward a
    penetration: float    # residual after projection, >= 0
    force: float          # N, >= 0
    area: float           # m^2 contact patch estimate


@dataclass
class ChainControl:
    """One independently controlled joint group of a body."""

    name: str
    body: str                       # key into SceneState.bodies
    q_indices: list[int]
    mode: str = MODE_COMMANDED
    target: list[float] = field(default_factory=list)   # absolute target q
    rest: list[float] = field(default_factory=list)     # passive rest pose
    strength_scale: float = 1.0     # extra multiplier (human weakness)

    def copy(self) -> "ChainControl":
        c = ChainControl(self.name, self.body, self.q_indices, self.mode,
                         list(self.target), list(self.rest), self.strength_scale)
        return c


@dataclass
class PairSpec:
    """A capsule pair the stepper watches. Geometry resolved per sub-step."""

    body_a: str                     # moving side ("robot", "human", "tool")
    link_a: int                     # link index, capsule index for tool, -1 n/a
    body_b: str                     # "human", "furniture", "robot", "tool"
    link_b: int
    yielding_chain: str | None = None   # chain pushed aside instead of blocking


class SceneState:
    """Everything that changes during an episode.

    Immutable models (RobotModel/HumanModel/ToolModel) are shared by
    reference; all mutable state (joint vectors, payload state, counters)
    is copied by copy(), so stepping a copy never disturbs the original.
    """

    def __init__(self):
        self.bodies: dict[str, ArticulatedBody] = {}
        self.chains: dict[str, ChainControl] = {}
        self.pairs: list[PairSpec] = []
        self.furniture: list[tuple[str, Capsule]] = []
        self.tool_capsules: list[Capsule] = []      # tool frame
        self.tool_pose: Transform | None = None     # maintained by stepping
        self.t: int = 0
        self.contacts: list[ContactReport] = []
        self.ee_prev: dict[str, Vec3] = {}          # for velocity costs
        self.final_frames: dict[str, list[Transform]] = {}
        # task payloads (owned by the environments, carried in the state)
        self.particles: list = []
        self.markers: list = []
        self.ring = None
        self.extras: dict = {}

    def copy(self) -> "SceneState":
        s = SceneState()
        s.bodies = {k: b.copy() for k, b in self.bodies.items()}
        s.chains = {k: c.copy() for k, c in self.chains.items()}
        s.pairs = self.pairs
        s.furniture = self.furniture
        s.tool_capsules = self.tool_capsules
        s.tool_pose = self.tool_pose
        s.t = self.t
        s.contacts = list(self.contacts)
        s.ee_prev = dict(self.ee_prev)
        s.particles = [p.copy() for p in self.particles]
        s.markers = [list(m) for m in self.markers]
        s.ring = self.ring.copy() if self.ring is not None else None
        s.extras = dict(self.extras)
        return s


class StepError(Exception):
    """Rejected step (non-finite command, bad dimensions)."""


def _chain_strength_scales(body: ArticulatedBody, ctl: ChainControl,
                           loads: list[float]) -> list[float]:
    scales = []
    for qi in ctl.q_indices:
        joint = body.joints[_link_of_q(body, qi)]
        tau_eff = joint.tau_max * ctl.strength_scale
        load = loads[qi]
        scales.append(1.0 if load <= tau_eff or load <= 1e-12
                      else max(0.0, tau_eff / load))
    return scales


def _link_of_q(body: ArticulatedBody, qi: int) -> int:
    # bodies are small; linear scan kept simple and cached on the body
    cache = getattr(body, "_q_link_cache", None)
    if cache is None:
        cache = {}
        for link in range(body.n_links):
            k = body.q_index(link)
            if k >= 0:
                cache[k] = link
        body._q_link_cache = cache
    return cache[qi]


def _ancestor_q_cache(body: ArticulatedBody, link: int) -> frozenset:
    """q indices of all joints on the path from the root to this link."""
    cache = getattr(body, "_anc_q_cache", None)
    if cache is None:
        cache = {}
        body._anc_q_cache = cache
    got = cache.get(link)
    if got is None:
        qs = []
        l = link
        while l >= 0:
            k = body.q_index(l)
            if k >= 0:
                qs.append(k)
            l = body.parents[l]
        got = frozenset(qs)
        cache[link] = got
    return got


class _Frames:
    """Lazy per-body FK cache with partial updates for dirty joints.

    Partial refresh replaces only the Transform tuples of links that moved,
    so tuple identity doubles as a change marker for the world-capsule and
    tool-pose caches below.
    """

    def __init__(self, scene: SceneState):
        self.scene = scene
        self._frames: dict[str, list[Transform]] = {}
        self._dirty: dict[str, set | None] = {}
        self._caps: dict[tuple, tuple] = {}      # (body, link) -> (frame, Capsule)
        self._tool: tuple | None = None          # (ee frame, socket, pose)

    def get(self, body_name: str) -> list[Transform]:
        body = self.scene.bodies[body_name]
        frames = self._frames.get(body_name)
        dirty = self._dirty.get(body_name)
        if frames is None or dirty is None and body_name not in self._frames:
            frames = forward_kinematics(body)
            self._frames[body_name] = frames
            self._dirty[body_name] = set()
            return frames
        if dirty:
            _fk_refresh(body, frames, dirty)
            self._dirty[body_name] = set()
        return frames

    def invalidate(self, body_name: str, dirty_q=None) -> None:
        if dirty_q is None or body_name not in self._frames:
            self._frames.pop(body_name, None)
            self._dirty.pop(body_name, None)
        else:
            self._dirty.setdefault(body_name, set()).update(dirty_q)

    def tool_pose(self, robot_ee_link: int, socket: Transform) -> Transform:
        ee = self.get("robot")[robot_ee_link]
        cached = self._tool
        if cached is not None and cached[0] is ee and cached[1] is socket:
            return cached[2]
        pose = t_compose(ee, socket)
        self._tool = (ee, socket, pose)
        return pose

    def world_capsule(self, body_name: str, link: int, cap: Capsule) -> Capsule:
        frame = self.get(body_name)[link]
        key = (body_name, link)
        cached = self._caps.get(key)
        if cached is not None and cached[0] is frame:
            return cached[1]
        wc = cap.transformed(frame)
        self._caps[key] = (frame, wc)
        return wc

    def world_tool_capsule(self, ci: int, robot_ee_link: int,
                           socket: Transform) -> Capsule:
        pose = self.tool_pose(robot_ee_link, socket)
        key = ("tool", ci)
        cached = self._caps.get(key)
        if cached is not None and cached[0] is pose:
            return cached[1]
        wc = self.scene.tool_capsules[ci].transformed(pose)
        self._caps[key] = (pose, wc)
        return wc


def _fk_refresh(body: ArticulatedBody, frames: list[Transform], dirty_q) -> None:
    """Recompute only the subtrees below the dirty joints, in place."""
    from .kinematics import _joint_motion

    n = body.n_links
    updated = [False] * n
    for i in range(n):
        p = body.parents[i]
        qi = body.q_index(i)
        if not ((p >= 0 and updated[p]) or (qi >= 0 and qi in dirty_q)):
            continue
        parent = body.base if p < 0 else frames[p]
        frame = t_compose(parent, body.locals[i])
        if qi >= 0:
            frame = t_compose(frame, _joint_motion(body.joints[i], body.q[qi]))
        frames[i] = frame
        updated[i] = True


def _world_capsule(scene: SceneState, frames: _Frames, body: str, link: int,
                   robot_ee: int, socket: Transform) -> Capsule | None:
    if body == "furniture":
        return scene.furniture[link][1]
    if body == "tool":
        return frames.world_tool_capsule(link, robot_ee, socket)
    cap = scene.bodies[body].capsules.get(link)
    if cap is None:
        return None
    return frames.world_capsule(body, link, cap)


def step_quasistatic(scene: SceneState, commands: dict[str, list[float]],
                     robot_ee: int, tool_socket: Transform,
                     substeps: int = SUBSTEPS) -> tuple[SceneState, list[ContactReport]]:
    """Advance the scene one control step (0.1 s). Returns (scene, contacts).

    commands maps commanded chain names to delta-position vectors. The
    input scene is not mutated; the returned scene is a stepped copy.
    """
    for name, dp in commands.items():
        if name not in scene.chains:
            raise StepError(f"unknown chain {name!r}")
        ctl = scene.chains[name]
        if len(dp) != len(ctl.q_indices):
            raise StepError(f"chain {name}: command has {len(dp)} dims, "
                            f"expected {len(ctl.q_indices)}")
        if any(not math.isfinite(v) for v in dp):
            raise StepError(f"chain {name}: non-finite command")

    out = scene.copy()
    frames = _Frames(out)

    # Per-chain total step displacement, fully determined up front.
    body_loads = {name: gravity_load(body, frames.get(name))
                  for name, body in out.bodies.items()}
    deltas: dict[str, list[float]] = {}
    for name, ctl in out.chains.items():
        body = out.bodies[ctl.body]
        scales = _chain_strength_scales(body, ctl, body_loads[ctl.body])
        cur = [body.q[i] for i in ctl.q_indices]
        if ctl.mode == MODE_COMMANDED:
            dp = commands.get(name)
            if dp is None:
                deltas[name] = [0.0] * len(ctl.q_indices)
                continue
            delta = []
            for qv, d, qi, s in zip(cur, dp, ctl.q_indices, scales):
                joint = body.joints[_link_of_q(body, qi)]
                tgt = min(max(qv + d, joint.l_min), joint.l_max)
                move = tgt - qv
                cap = joint.v_max * DT
                move = min(max(move, -cap), cap)
                delta.append(move * s)
            deltas[name] = delta
        elif ctl.mode == MODE_HELD:
            delta = []
            for qv, tv, qi, s in zip(cur, ctl.target, ctl.q_indices, scales):
                joint = body.joints[_link_of_q(body, qi)]
                tgt = min(max(tv, joint.l_min), joint.l_max)
                delta.append((tgt - qv) * s)
            deltas[name] = delta
        else:  # passive sag toward rest
            delta = []
            cap = PASSIVE_SAG_RATE * DT
            for qv, rv in zip(cur, ctl.rest):
                move = rv - qv
                delta.append(min(max(move, -cap), cap))
            deltas[name] = delta

    # Broad-phase with exact per-link travel: FK at the step-end target pose
    # bounds how far each link can move (1.5x chord covers mid-step arcs).
    link_travel: dict[str, list[float]] = {}
    for body_name, body in out.bodies.items():
        q_target = list(body.q)
        moved = False
        for name, ctl in out.chains.items():
            if ctl.body != body_name:
                continue
            for qi, dv in zip(ctl.q_indices, deltas[name]):
                if dv != 0.0:
                    q_target[qi] += dv
                    moved = True
        if not moved:
            link_travel[body_name] = [0.0] * body.n_links
            continue
        now = frames.get(body_name)
        tgt = forward_kinematics(body, q_target)
        link_travel[body_name] = [
            1.5 * math.dist(now[i][1], tgt[i][1]) + 0.01
            for i in range(body.n_links)]

    def travel_of(body_name: str, link: int) -> float:
        if body_name == "furniture":
            return 0.0
        if body_name == "tool":
            # the tool rides the end effector; pad for tool length under rotation
            t = link_travel["robot"][robot_ee]
            return t * 2.0 if t > 0.0 else 0.0
        return link_travel[body_name][link]

    # a yielding chain gets pushed by the robot, so its links inherit the
    # robot's travel on top of their own
    yield_chains = {p.yielding_chain for p in out.pairs if p.yielding_chain}
    yield_extra: dict[str, float] = {}
    if yield_chains:
        robot_max = max(link_travel.get("robot", [0.0]), default=0.0)
        for cname in yield_chains:
            ctl = out.chains[cname]
            yield_extra[ctl.body] = robot_max * 2.0 + 8 * YIELD_RATE_CAP

    def travel_with_yield(body_name: str, link: int) -> float:
        base = travel_of(body_name, link)
        return base + yield_extra.get(body_name, 0.0)

    active_pairs: list[PairSpec] = []
    pair_reach: list[float] = []
    for pair in out.pairs:
        ca = _world_capsule(out, frames, pair.body_a, pair.link_a, robot_ee, tool_socket)
        cb = _world_capsule(out, frames, pair.body_b, pair.link_b, robot_ee, tool_socket)
        if ca is None or cb is None:
            continue
        reach = travel_with_yield(pair.body_a, pair.link_a) \
            + travel_with_yield(pair.body_b, pair.link_b)
        d, _, _, _ = capsule_distance(ca, cb)
        if d < reach + 0.002:
            active_pairs.append(pair)
            pair_reach.append(reach)

    blocked: dict[int, float] = {}    # pair index -> accumulated blocked approach
    yielded: dict[int, float] = {}    # pair index -> accumulated virtual squeeze

    def pair_distance(pair: PairSpec) -> float:
        ca = _world_capsule(out, frames, pair.body_a, pair.link_a, robot_ee, tool_socket)
        cb = _world_capsule(out, frames, pair.body_b, pair.link_b, robot_ee, tool_socket)
        d, _, _, _ = capsule_distance(ca, cb)
        return d

    # per-chain blocking-pair index lists (topology only, fixed per step)
    chain_block_pairs: dict[str, list[int]] = {}
    for name, ctl in out.chains.items():
        body = ctl.body
        tool_side = body == "robot"
        idxs = []
        for i, pair in enumerate(active_pairs):
            if pair.yielding_chain is not None:
                continue
            if (pair.body_a == body or pair.body_b == body
                    or (tool_side and "tool" in (pair.body_a, pair.body_b))):
                idxs.append(i)
        chain_block_pairs[name] = idxs

    def move_chain(name: str, ctl: ChainControl, sub_delta: list[float]) -> None:
        if all(v == 0.0 for v in sub_delta):
            return
        body = out.bodies[ctl.body]
        q_before = [body.q[i] for i in ctl.q_indices]
        dirty = ctl.q_indices
        # pairs farther than one sub-step's worst-case travel cannot touch
        d_before = {}
        watch = []
        for i in chain_block_pairs[name]:
            d = pair_distance(active_pairs[i])
            if d < pair_reach[i] / substeps + 0.005:
                watch.append(i)
                d_before[i] = d

        def apply(alpha: float) -> None:
            for qi, qv, dv in zip(ctl.q_indices, q_before, sub_delta):
                body.q[qi] = qv + alpha * dv
            frames.invalidate(ctl.body, dirty)

        if not watch:
            apply(1.0)
            return

        # Each pair may not end deeper than 1 mm, but escaping a pre-existing
        # penetration is always allowed (the floor is the starting distance).
        floors = {i: min(-PENETRATION_TOL, d_before[i]) for i in watch}

        apply(1.0)
        d_full = {i: pair_distance(active_pairs[i]) for i in watch}
        offenders = [i for i in watch if d_full[i] < floors[i] - 1e-12]
        if not offenders:
            return
        # Bisect the sub-step back until the offending pairs respect their
        # floors (sub-step motion is small enough that non-offending pairs
        # stay clear).
        lo_a, hi_a = 0.0, 1.0
        for _ in range(10):
            mid = 0.5 * (lo_a + hi_a)
            apply(mid)
            if any(pair_distance(active_pairs[i]) < floors[i] - 1e-12
                   for i in offenders):
                hi_a = mid
            else:
                lo_a = mid
        apply(lo_a)
        # Record how much approach was denied on the pairs that bit.
        for i in offenders:
            d_now = pair_distance(active_pairs[i])
            denied = (d_before[i] - d_full[i]) - (d_before[i] - d_now)
            if denied > 1e-12 and d_now <= PENETRATION_TOL:
                blocked[i] = blocked.get(i, 0.0) + denied

    def resolve_yields() -> None:
        for i, pair in enumerate(active_pairs):
            chain_name = pair.yielding_chain
            if chain_name is None:
                continue
            ctl = out.chains[chain_name]
            body = out.bodies[ctl.body]
            first = True
            for _ in range(8):
                ca = _world_capsule(out, frames, pair.body_a, pair.link_a,
                                    robot_ee, tool_socket)
                cb = _world_capsule(out, frames, pair.body_b, pair.link_b,
                                    robot_ee, tool_socket)
                d, pa, pb, n = capsule_distance(ca, cb)
                if d >= -PENETRATION_TOL:
                    break
                pen = -d
                if first:
                    yielded[i] = yielded.get(i, 0.0) + pen
                    first = False
                # Push the yielding link's contact point along the normal via
                # a Jacobian-transpose step, iterating out of penetration.
                ylink = pair.link_a if pair.body_a == ctl.body else pair.link_b
                sign = 1.0 if pair.body_a == ctl.body else -1.0
                bframes = frames.get(ctl.body)
                J = jacobian(body, body.q, ylink, bframes)[0:3, :]
                push = vscale(n, sign * pen)
                for qi in ctl.q_indices:
                    g = (J[0, qi] * push[0] + J[1, qi] * push[1] + J[2, qi] * push[2])
                    step = min(max(g * 4.0, -YIELD_RATE_CAP), YIELD_RATE_CAP)
                    joint = body.joints[_link_of_q(body, qi)]
                    body.q[qi] = min(max(body.q[qi] + step, joint.l_min), joint.l_max)
                frames.invalidate(ctl.body, ctl.q_indices)

    # Human chains first (their hold/tremor targets define the pose the
    # robot is blocked against), then robot chains, then yield resolution.
    order = sorted(out.chains, key=lambda n: (out.chains[n].body != "human", n))
    any_yields = any(p.yielding_chain is not None for p in active_pairs)
    for _ in range(substeps):
        for name in order:
            ctl = out.chains[name]
            sub = [v / substeps for v in deltas[name]]
            move_chain(name, ctl, sub)
        if any_yields:
            resolve_yields()

    # Contact reports: every active pair with residual penetration or a
    # recorded squeeze produces a force.
    reports: list[ContactReport] = []
    for i, pair in enumerate(active_pairs):
        ca = _world_capsule(out, frames, pair.body_a, pair.link_a, robot_ee, tool_socket)
        cb = _world_capsule(out, frames, pair.body_b, pair.link_b, robot_ee, tool_socket)
        d, pa, pb, n = capsule_distance(ca, cb)
        pen = max(0.0, -d)
        squeeze = pen + blocked.get(i, 0.0) + yielded.get(i, 0.0)
        if squeeze <= 1e-9:
            continue
        force = CONTACT_STIFFNESS * squeeze
        r_eff = min(ca.r, cb.r)
        area = math.pi * r_eff * max(pen, squeeze * 0.25)
        point = vscale(vadd(pa, pb), 0.5)
        reports.append(ContactReport(pair.body_a, pair.link_a, pair.body_b,
                                     pair.link_b, point, n, pen, force, area))

    out.tool_pose = frames.tool_pose(robot_ee, tool_socket)
    out.contacts = reports
    out.t = scene.t + 1
    # final FK of every body, for the caller to reuse (observation, events)
    out.final_frames = {name: frames.get(name) for name in out.bodies}
    return out, reports
