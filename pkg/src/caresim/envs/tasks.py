"""The six assistive tasks: events, shaping rewards, success predicates.

Shaping coefficients and success thresholds live here (one table per
task); preference-cost activations live in the reward module.

Success thresholds:
    scratch_itch      accumulated rub distance >= 10 cm near the target
    bed_bathing       >= 60% of arm markers wiped
    feeding           >= 75% particles captured and <= 10% spilled on person
    drinking          >= 75% particles captured
    dressing          sleeve ring past the elbow (s >= forearm length)
    arm_manipulation  wrist and elbow above the bed plane and within
                      20 cm of the torso at episode end (terminates early)
"""

from __future__ import annotations

import math

from ..base_placement import GoalSet
from ..geom import (
    QUAT_IDENTITY,
    quat_from_axis_angle,
    quat_rotate,
    t_point,
    t_vector,
    vadd,
    vdist,
    vdot,
    vnorm,
    vscale,
    vsub,
)
from ..stepping import MODE_PASSIVE, SceneState
from . import scene as scn
from .core import AssistiveEnv, EnvSpec

DOWN = (0.0, 0.0, -1.0)


def _unit(v):
    n = vnorm(v)
    return vscale(v, 1.0 / n) if n > 1e-12 else (0.0, 0.0, 1.0)


class ScratchItchEnv(AssistiveEnv):
    task = "scratch_itch"

    RUB_GAIN = 200.0           # reward per meter of lateral rub (2 per cm)
    RUB_RADIUS = 0.025         # m from target
    RUB_FORCE_MAX = 10.0       # N; harder presses don't count as scratching
    SUCCESS_RUB = 0.10         # m accumulated

    def _init_counters(self):
        self._counters = {"rub_distance": 0.0}

    def _sample_task(self, scene):
        # target uniformly on the right-arm surface (upper arm or forearm,
        # weighted by length), anywhere around the circumference
        u = self.rng.random()
        part = "right_upper_arm" if u < 0.5 else "right_forearm"
        link = self.human.sites[part]
        cap = self.human.body.capsules[link]
        t = self.rng.random()
        ang = self.rng.uniform(0.0, 2 * math.pi)
        axis = _unit(vsub(cap.b, cap.a))
        helper = (1.0, 0.0, 0.0) if abs(axis[0]) < 0.9 else (0.0, 1.0, 0.0)
        u1 = _unit((axis[1] * helper[2] - axis[2] * helper[1],
                    axis[2] * helper[0] - axis[0] * helper[2],
                    axis[0] * helper[1] - axis[1] * helper[0]))
        u2 = (axis[1] * u1[2] - axis[2] * u1[1],
              axis[2] * u1[0] - axis[0] * u1[2],
              axis[0] * u1[1] - axis[1] * u1[0])
        center = vadd(cap.a, vscale(vsub(cap.b, cap.a), t))
        local = vadd(center, vscale(vadd(vscale(u1, math.cos(ang)),
                                         vscale(u2, math.sin(ang))), cap.r))
        self._target_link = link
        self._target_local = local

    def _target_world(self, human_frames):
        return t_point(human_frames[self._target_link], self._target_local)

    def _task_goals(self, human_frames):
        tgt = self._target_world(human_frames)
        targets = []
        for dz in (0.1, 0.2):
            for dx in (-0.1, 0.0, 0.1):
                targets.append((QUAT_IDENTITY, vadd(tgt, (dx, 0.0, dz))))
        return GoalSet(targets, use_orientation=False)

    def _task_start_pose(self, human_frames):
        tgt = self._target_world(human_frames)
        return (QUAT_IDENTITY, vadd(tgt, (0.0, 0.0, 0.25)))

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip):
        target = self._target_world(human_frames)
        dist = vdist(tool_tip, target)
        r = -dist
        # scratching: gentle contact with the arm near the target while the
        # tip moves laterally along the surface
        arm_links = {self.human.sites["right_upper_arm"],
                     self.human.sites["right_forearm"]}
        force = sum(c.force for c in contacts
                    if c.body_a == "tool" and c.body_b == "human"
                    and c.link_b in arm_links)
        rub = 0.0
        if dist < self.RUB_RADIUS and 0.0 < force <= self.RUB_FORCE_MAX:
            move = vsub(tool_tip, prev_tool_tip)
            normal = _unit(vsub(tool_tip, target))
            lateral = vsub(move, vscale(normal, vdot(move, normal)))
            rub = vnorm(lateral)
            self._counters["rub_distance"] += rub
            r += self.RUB_GAIN * rub
        return r, {"rub": rub, "force_on_arm": force}

    def _success_predicate(self, scene, human_frames):
        return self._counters["rub_distance"] >= self.SUCCESS_RUB

    def _cost_target_point(self, human_frames):
        return self._target_world(human_frames)

    def _task_point_names(self):
        return ["scratch_target", "right_wrist", "right_elbow", "right_shoulder"]

    def _task_points(self, human_frames):
        return [
            self._target_world(human_frames),
            human_frames[self.human.sites["right_hand"]][1],
            human_frames[self.human.sites["right_forearm"]][1],
            human_frames[self.human.sites["right_upper_arm"]][1],
        ]


class BedBathingEnv(AssistiveEnv):
    task = "bed_bathing"

    WIPE_REWARD = 5.0
    WIPE_RADIUS = 0.035        # m from the washcloth face center
    SUCCESS_FRACTION = 0.6

    def _init_counters(self):
        self._counters = {"wiped": 0, "total_markers": len(self.scene.markers)
                          if self.scene else 0}

    def _setup_payloads(self, scene):
        frames = None
        scene.markers = scn.arm_surface_markers(self.human, frames)
        self._counters = {"wiped": 0, "total_markers": len(scene.markers)}

    def _sample_task(self, scene):
        pass

    def _arm_mid(self, human_frames):
        fa = human_frames[self.human.sites["right_forearm"]]
        cap = self.human.body.capsules[self.human.sites["right_forearm"]]
        return t_point(fa, vscale(vadd(cap.a, cap.b), 0.5))

    def _task_goals(self, human_frames):
        targets = []
        for part in ("right_upper_arm", "right_forearm"):
            link = self.human.sites[part]
            cap = self.human.body.capsules[link]
            for t in (0.25, 0.75):
                local = vadd(cap.a, vscale(vsub(cap.b, cap.a), t))
                world = t_point(human_frames[link], local)
                targets.append((QUAT_IDENTITY, vadd(world, (0.0, 0.0, 0.15))))
        return GoalSet(targets, use_orientation=False)

    def _task_start_pose(self, human_frames):
        return (QUAT_IDENTITY, vadd(self._arm_mid(human_frames), (0.0, 0.0, 0.25)))

    def _wash_face_center(self, scene):
        # bottom of the washcloth: tool tip
        return t_point(scene.tool_pose, self.tool.tip)

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip):
        arm_links = {self.human.sites["right_upper_arm"],
                     self.human.sites["right_forearm"]}
        touching = any(c.body_a == "tool" and c.body_b == "human"
                       and c.link_b in arm_links for c in contacts)
        new_wipes = 0
        face = self._wash_face_center(scene)
        if touching:
            for m in scene.markers:
                if m[4]:
                    continue
                world = t_point(human_frames[m[0]], (m[1], m[2], m[3]))
                if vdist(world, face) < self.WIPE_RADIUS:
                    m[4] = True
                    new_wipes += 1
        self._counters["wiped"] += new_wipes
        nearest = self._nearest_unwiped(scene, human_frames, face)
        r = -vdist(face, nearest) + self.WIPE_REWARD * new_wipes
        return r, {"new_wipes": new_wipes}

    def _nearest_unwiped(self, scene, human_frames, from_point):
        best = None
        best_d = float("inf")
        for m in scene.markers:
            if m[4]:
                continue
            world = t_point(human_frames[m[0]], (m[1], m[2], m[3]))
            d = vdist(world, from_point)
            if d < best_d:
                best_d = d
                best = world
        return best if best is not None else from_point

    def _success_predicate(self, scene, human_frames):
        total = max(1, self._counters.get("total_markers", 1))
        return self._counters.get("wiped", 0) / total >= self.SUCCESS_FRACTION

    def _cost_target_point(self, human_frames):
        return self._arm_mid(human_frames)

    def _task_point_names(self):
        return ["nearest_unwiped_marker", "right_wrist", "right_elbow",
                "right_shoulder"]

    def _task_points(self, human_frames):
        face = self._wash_face_center(self.scene)
        return [
            self._nearest_unwiped(self.scene, human_frames, face),
            human_frames[self.human.sites["right_hand"]][1],
            human_frames[self.human.sites["right_forearm"]][1],
            human_frames[self.human.sites["right_upper_arm"]][1],
        ]


class _MouthTaskEnv(AssistiveEnv):
    """Shared machinery for drinking and feeding (mouth capture sphere)."""

    MOUTH_RADIUS = 0.04
    CAPTURE_REWARD = 10.0
    N_PARTICLES = 8

    def _mouth(self, human_frames):
        return human_frames[self.human.sites["mouth"]][1]

    def _task_goals(self, human_frames):
        mouth = self._mouth(human_frames)
        targets = []
        for d in ((0.12, 0, 0), (0.2, 0, 0.05), (0.15, -0.08, 0), (0.15, 0.08, 0)):
            targets.append((QUAT_IDENTITY, vadd(mouth, d)))
        return GoalSet(targets, use_orientation=False)

    def _task_start_pose(self, human_frames):
        mouth = self._mouth(human_frames)
        return (QUAT_IDENTITY, vadd(mouth, (0.25, 0.0, -0.15)))

    def _particle_events(self, scene, human_frames, release: bool,
                         release_count: int, release_vel):
        """Advance payload particles; returns event counters."""
        mouth = self._mouth(human_frames)
        captured, spilled_person, spilled = 0, 0, 0
        capture_speeds = []
        head_link = self.human.sites["head"]
        torso_link = self.human.sites["torso"]
        remaining = release_count
        for p in scene.particles:
            if p.state == scn.HELD:
                p.pos = t_point(scene.tool_pose, p.local)
                p.vel = release_vel
                if release and remaining > 0:
                    p.advance(scn.AIRBORNE)
                    remaining -= 1
            if p.state == scn.AIRBORNE:
                vx, vy, vz = p.vel
                vz += scn.GRAVITY * 0.1
                p.vel = (vx, vy, vz)
                p.pos = (p.pos[0] + vx * 0.1, p.pos[1] + vy * 0.1,
                         p.pos[2] + vz * 0.1)
                if vdist(p.pos, mouth) < self.MOUTH_RADIUS:
                    p.advance(scn.CAPTURED)
                    captured += 1
                    capture_speeds.append(vnorm(p.vel))
                    continue
                on_person = False
                for link in (head_link, torso_link):
                    cap = self.human.body.capsules.get(link)
                    if cap is None:
                        continue
                    wc = cap.transformed(human_frames[link])
                    from ..geom import capsule_point_distance

                    if capsule_point_distance(wc, p.pos) < 0.0:
                        on_person = True
                        break
                if on_person:
                    p.advance(scn.SPILLED)
                    spilled += 1
                    spilled_person += 1
                elif p.pos[2] < scn.FLOOR_Z:
                    p.advance(scn.SPILLED)
                    spilled += 1
        self._counters["captured"] += captured
        self._counters["spilled"] += spilled
        self._counters["spilled_on_person"] += spilled_person
        return {"captured": captured, "spilled": spilled,
                "spilled_on_person": spilled_person,
                "capture_speeds": capture_speeds}

    def _cost_target_point(self, human_frames):
        return self._mouth(human_frames)

    def _task_point_names(self):
        return ["mouth"]

    def _task_points(self, human_frames):
        return [self._mouth(human_frames)]


class DrinkingEnv(_MouthTaskEnv):
    task = "drinking"

    TILT_RELEASE = math.radians(60.0)
    TILT_BONUS = 0.5
    SUCCESS_FRACTION = 0.75

    def _init_counters(self):
        self._counters = {"captured": 0, "spilled": 0, "spilled_on_person": 0}

    def _sample_task(self, scene):
        pass

    def _setup_payloads(self, scene):
        scene.particles = [scn.Particle((0.012 * (i % 2) - 0.006,
                                         0.012 * (i // 4) - 0.006,
                                         0.02 + 0.018 * ((i // 2) % 2)))
                           for i in range(self.N_PARTICLES)]

    def _cup_tilt(self, scene) -> float:
        up = t_vector(scene.tool_pose, (0.0, 0.0, 1.0))
        return math.acos(max(-1.0, min(1.0, up[2])))

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip):
        mouth = self._mouth(human_frames)
        tilt = self._cup_tilt(scene)
        pouring = tilt > self.TILT_RELEASE
        vel = vscale(vsub(tool_tip, prev_tool_tip), 1.0 / 0.1)
        events = self._particle_events(scene, human_frames, pouring, 2, vel)
        dist = vdist(tool_tip, mouth)
        r = -dist + self.CAPTURE_REWARD * events["captured"]
        if dist < 0.15 and pouring:
            r += self.TILT_BONUS
        return r, events

    def _success_predicate(self, scene, human_frames):
        return (self._counters["captured"] / self.N_PARTICLES
                >= self.SUCCESS_FRACTION)


class FeedingEnv(_MouthTaskEnv):
    task = "feeding"

    N_PARTICLES = 4
    SPILL_TILT = math.radians(45.0)
    SPILL_SPEED = 1.0          # m/s
    SPILL_PENALTY = 10.0       # r_R penalty per particle spilled on the person
    SUCCESS_FRACTION = 0.75
    SPILL_LIMIT = 0.10

    def _init_counters(self):
        self._counters = {"captured": 0, "spilled": 0, "spilled_on_person": 0}

    def _sample_task(self, scene):
        pass

    def _setup_payloads(self, scene):
        scene.particles = [scn.Particle((0.01 * (i % 2) - 0.005,
                                         0.01 * (i // 2) - 0.005, 0.21))
                           for i in range(self.N_PARTICLES)]

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip):
        mouth = self._mouth(human_frames)
        up = t_vector(scene.tool_pose, (0.0, 0.0, 1.0))
        tilt = math.acos(max(-1.0, min(1.0, up[2])))
        vel = vscale(vsub(tool_tip, prev_tool_tip), 1.0 / 0.1)
        speed = vnorm(vel)
        in_mouth = vdist(tool_tip, mouth) < self.MOUTH_RADIUS
        dropping = tilt > self.SPILL_TILT or speed > self.SPILL_SPEED
        release = in_mouth or dropping
        events = self._particle_events(scene, human_frames, release,
                                       self.N_PARTICLES, vel)
        dist = vdist(tool_tip, mouth)
        r = (-dist + self.CAPTURE_REWARD * events["captured"]
             - self.SPILL_PENALTY * events["spilled_on_person"])
        return r, events

    def _success_predicate(self, scene, human_frames):
        cap = self._counters["captured"] / self.N_PARTICLES
        sop = self._counters["spilled_on_person"] / self.N_PARTICLES
        return cap >= self.SUCCESS_FRACTION and sop <= self.SPILL_LIMIT


class DressingEnv(AssistiveEnv):
    task = "dressing"

    ENGAGE_RADIUS = 0.05
    CONE_RADIUS = 0.12
    PROGRESS_GAIN = 100.0
    ALIGN_BONUS = 0.2
    GARMENT_STIFFNESS = 50.0   # N per meter of radial offset while engaged

    def _init_counters(self):
        self._counters = {"ring_s": 0.0, "engaged": False}

    def _sample_task(self, scene):
        pass

    def _setup_payloads(self, scene):
        L = self.human.anthro["lengths"]
        arm_len = L["forearm"] + L["upper_arm"]
        scene.ring = scn.SleeveRing(radius=0.07, arm_length=arm_len,
                                    forearm_length=L["forearm"])

    def _arm_axis_points(self, human_frames):
        """Polyline hand tip -> elbow -> shoulder along the left arm."""
        tip = human_frames[self.human.sites["left_hand_tip"]][1]
        elbow = human_frames[self.human.sites["left_forearm"]][1]
        shoulder = human_frames[self.human.sites["left_upper_arm"]][1]
        return tip, elbow, shoulder

    def _ring_point(self, scene, human_frames):
        tip, elbow, shoulder = self._arm_axis_points(human_frames)
        s = scene.ring.s
        l1 = vdist(tip, elbow)
        if s <= l1:
            return vadd(tip, vscale(_unit(vsub(elbow, tip)), s))
        return vadd(elbow, vscale(_unit(vsub(shoulder, elbow)),
                                  min(s - l1, vdist(elbow, shoulder))))

    def _task_goals(self, human_frames):
        tip, elbow, shoulder = self._arm_axis_points(human_frames)
        return GoalSet([(QUAT_IDENTITY, vadd(tip, (0.1, 0.1, 0.05))),
                        (QUAT_IDENTITY, vadd(elbow, (0.1, 0.1, 0.1))),
                        (QUAT_IDENTITY, vadd(shoulder, (0.1, 0.1, 0.15)))],
                       use_orientation=False)

    def _task_start_pose(self, human_frames):
        tip, _, _ = self._arm_axis_points(human_frames)
        return (QUAT_IDENTITY, vadd(tip, (0.15, 0.1, 0.1)))

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip):
        ring = scene.ring
        tip, elbow, shoulder = self._arm_axis_points(human_frames)
        events = {"garment_force": 0.0, "ring_advance": 0.0}
        if not ring.engaged:
            d = vdist(tool_tip, tip)
            if d < self.ENGAGE_RADIUS:
                ring.engaged = True
                self._counters["engaged"] = True
            r = -d
            return r, events
        # engaged: the grasp point drags the ring along the arm axis
        ring_pt = self._ring_point(scene, human_frames)
        axis = _unit(vsub(shoulder, tip)) if ring.s >= vdist(tip, elbow) \
            else _unit(vsub(elbow, tip))
        radial_vec = vsub(tool_tip, ring_pt)
        axial = vdot(radial_vec, axis)
        radial = vnorm(vsub(radial_vec, vscale(axis, axial)))
        advance = 0.0
        if radial < self.CONE_RADIUS and axial > 0.0:
            advance = ring.advance(min(axial, 0.05))
        ring.axial_force = self.GARMENT_STIFFNESS * radial if advance > 0 else \
            self.GARMENT_STIFFNESS * radial * 0.2
        self._counters["ring_s"] = ring.s
        events["garment_force"] = ring.axial_force
        events["ring_advance"] = advance
        r = self.PROGRESS_GAIN * advance
        if radial < 0.06:
            r += self.ALIGN_BONUS
        return r, events

    def _success_predicate(self, scene, human_frames):
        return scene.ring is not None and scene.ring.engaged and \
            scene.ring.s >= scene.ring.forearm_length

    def _cost_target_point(self, human_frames):
        tip, _, _ = self._arm_axis_points(human_frames)
        return tip

    def _task_point_names(self):
        return ["left_hand_tip", "left_wrist", "left_elbow", "left_shoulder"]

    def _task_points(self, human_frames):
        tip, elbow, shoulder = self._arm_axis_points(human_frames)
        wrist = human_frames[self.human.sites["left_hand"]][1]
        return [tip, wrist, elbow, shoulder]


class ArmManipulationEnv(AssistiveEnv):
    task = "arm_manipulation"

    LIFT_GAIN = 20.0
    TORSO_RADIUS = 0.2         # success: wrist/elbow within this of the torso
    SUCCESS_MARGIN = 0.05

    def _init_counters(self):
        self._counters = {"lift_progress": 0.0}

    def _supine_shift(self) -> float:
        # lie near the bed's -y edge so the right arm hangs off it
        return -0.15

    def _sample_task(self, scene):
        pass

    def _post_pose_hook(self, scene):
        # the right arm hangs off the bed edge: passive unless the human is
        # active, starting from (and resting at) the hanging pose
        hang = scn.hanging_arm_rest()
        lo, hi = self.human.chain_limits("right_arm")
        hang = [min(max(v, a), b) for v, a, b in zip(hang, lo, hi)]
        self._static_pose["right_arm"] = hang
        if not self.spec.active_human:
            # switch the chain to passive after construction (reset() builds
            # chains from _static_pose, so just record the desired mode)
            self._passive_rest = hang
        else:
            self._passive_rest = None

    def _setup_payloads(self, scene):
        if self._passive_rest is not None:
            ctl = scene.chains["human_right_arm"]
            ctl.mode = MODE_PASSIVE
            ctl.rest = list(self._passive_rest)

    def _yield_chain(self, human_link: int) -> str | None:
        arm_links = {self.human.sites["right_upper_arm"],
                     self.human.sites["right_forearm"],
                     self.human.sites["right_hand"]}
        if human_link in arm_links and not self.spec.active_human:
            return "human_right_arm"
        return None

    def _wrist_elbow(self, human_frames):
        wrist = human_frames[self.human.sites["right_hand"]][1]
        elbow = human_frames[self.human.sites["right_forearm"]][1]
        return wrist, elbow

    def _torso_target(self, human_frames):
        torso = human_frames[self.human.sites["torso"]][1]
        return vadd(torso, (0.0, -0.25, 0.1))

    def _task_goals(self, human_frames):
        wrist, elbow = self._wrist_elbow(human_frames)
        mid = vscale(vadd(wrist, elbow), 0.5)
        return GoalSet([(QUAT_IDENTITY, vadd(wrist, (0.0, 0.0, 0.12))),
                        (QUAT_IDENTITY, vadd(mid, (0.0, 0.0, 0.12))),
                        (QUAT_IDENTITY, vadd(self._torso_target(human_frames),
                                             (0.0, 0.0, 0.15)))],
                       use_orientation=False)

    def _task_start_pose(self, human_frames):
        # the scoop extends well past the end effector: spawn high enough
        # that the whole tool clears the hanging arm
        wrist, elbow = self._wrist_elbow(human_frames)
        mid = vscale(vadd(wrist, elbow), 0.5)
        return (QUAT_IDENTITY, vadd(mid, (0.0, -0.12, 0.38)))

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip):
        wrist, elbow = self._wrist_elbow(human_frames)
        target = self._torso_target(human_frames)
        dist_sum = vdist(tool_tip, wrist) + vdist(tool_tip, elbow)
        closeness = -(vdist(wrist, target) + vdist(elbow, target))
        prev = self._counters.get("_prev_closeness")
        progress = 0.0 if prev is None else closeness - prev
        self._counters["_prev_closeness"] = closeness
        self._counters["lift_progress"] += max(0.0, progress)
        r = -dist_sum + self.LIFT_GAIN * progress
        return r, {"progress": progress}

    def _success_predicate(self, scene, human_frames):
        wrist, elbow = self._wrist_elbow(human_frames)
        above = (wrist[2] > scn.BED_TOP - self.SUCCESS_MARGIN
                 and elbow[2] > scn.BED_TOP - self.SUCCESS_MARGIN)
        target = self._torso_target(human_frames)
        near = (vdist(wrist, target) < self.TORSO_RADIUS + 0.15
                and vdist(elbow, target) < self.TORSO_RADIUS + 0.15)
        return above and near

    def _early_termination(self, success_now: bool) -> bool:
        return success_now

    def _cost_target_point(self, human_frames):
        wrist, elbow = self._wrist_elbow(human_frames)
        return vscale(vadd(wrist, elbow), 0.5)

    def _task_point_names(self):
        return ["right_wrist", "right_elbow", "right_shoulder", "torso_target"]

    def _task_points(self, human_frames):
        wrist, elbow = self._wrist_elbow(human_frames)
        return [wrist, elbow,
                human_frames[self.human.sites["right_upper_arm"]][1],
                self._torso_target(human_frames)]


TASK_CLASSES = {
    cls.task: cls
    for cls in (ScratchItchEnv, BedBathingEnv, DrinkingEnv, FeedingEnv,
                DressingEnv, ArmManipulationEnv)
}
