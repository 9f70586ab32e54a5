"""Episode lifecycle shared by the six assistive environments.

Each environment couples one robot, one sampled human (sex and one of
three impairments drawn at reset), a task tool, and task payloads in a
quasi-statically stepped scene. Episodes run 200 steps at 10 Hz.

Actions are position deltas in [-1, 1] per joint, scaled to at most
0.05 rad/step for robot joints and 0.025 rad/step for human joints.

Robot observation layout (all positions relative to the robot base):
    [0:3]    tool-arm end-effector position
    [3:7]    end-effector orientation quaternion (w, x, y, z)
    [7:7+n]  arm joint positions (n = 7 or 14)
    [+3]     force vector at the end effector (N)
    [+3k]    task-relevant points on the human (documented per task)
    [+7]     head pose (position + quaternion), feeding/drinking only

Human observation (active mode): controlled-chain joint positions plus
the tool position relative to the human base.

Both agents receive the same per-step reward (shared objective).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..base_placement import GoalSet, optimize_base_pose
from ..geom import (
    QUAT_IDENTITY,
    Transform,
    quat_conj,
    quat_mul,
    t_compose,
    t_inverse,
    t_point,
    vadd,
    vdist,
    vscale,
    vsub,
)
from ..human import (
    LimitationProfile,
    TREMOR,
    WEAKNESS,
    apply_limitation,
    default_pose_predicate,
    enforce_pose_validity,
    generate_human,
    tremor_offset,
)
from ..kinematics import forward_kinematics, solve_ik
from ..reward import (
    PreferenceConfig,
    PreferenceCosts,
    RewardBreakdown,
    force_costs,
    intake_speed_cost,
    pressure_cost,
    velocity_cost,
)
from ..robots import TASK_TOOL, load_robot, make_tool, mount_rule
from ..rng import SeededRng
from ..stepping import (
    ChainControl,
    DT,
    MODE_COMMANDED,
    MODE_HELD,
    MODE_PASSIVE,
    PairSpec,
    SceneState,
    step_quasistatic,
)
from . import scene as scn

EPISODE_STEPS = 200
ROBOT_ACTION_SCALE = 0.05    # rad per step per joint
HUMAN_ACTION_SCALE = 0.025
EE_PERTURBATION = 0.05       # m, per axis at reset

TASKS = ("scratch_itch", "bed_bathing", "drinking", "feeding",
         "dressing", "arm_manipulation")

# chain the human controls (and where tremor strikes) per task
HUMAN_CHAIN = {
    "scratch_itch": "right_arm",
    "bed_bathing": "right_arm",
    "drinking": "head",
    "feeding": "head",
    "dressing": "left_arm",
    "arm_manipulation": "right_arm",
}


class ResetError(Exception):
    """Reset could not construct a valid initial scene."""


class ActionError(Exception):
    """Bad action vector (dimension or non-finite values)."""


@dataclass
class EnvSpec:
    task: str
    robot_name: str
    active_human: bool = False
    episode_steps: int = EPISODE_STEPS
    dt: float = DT
    placement_samples: int = 100

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")

    @property
    def env_id(self) -> str:
        mode = "active" if self.active_human else "static"
        return f"{self.task}/{self.robot_name}/{mode}"


class AssistiveEnv:
    """Base class: subclasses implement the task hooks at the bottom."""

    task: str = ""

    def __init__(self, spec: EnvSpec, pref_config: PreferenceConfig | None = None):
        assert spec.task == self.task
        self.spec = spec
        self.pref = pref_config or PreferenceConfig.for_task(spec.task)
        self.robot = load_robot(spec.robot_name)
        self.rng = SeededRng(0)
        self.scene: SceneState | None = None
        self.human = None
        self.t = 0
        self.done = True
        self.info: dict = {}
        self._episode_success = False

    # ------------------------------------------------------------------ reset

    def reset(self, seed: int):
        """Build a fresh randomized scene; returns the observation(s)."""
        self.rng = SeededRng(seed)
        self.t = 0
        self.done = False
        self._episode_success = False

        # human: sex and one limitation sampled per episode
        sex = "male" if self.rng.random() < 0.5 else "female"
        self.human = generate_human(sex)
        self.limitation = LimitationProfile.sample(self.rng)
        apply_limitation(self.human, self.limitation)

        scene = SceneState()
        scene.bodies["human"] = self.human.body
        scene.bodies["robot"] = self.robot.body
        self.tool = make_tool(TASK_TOOL[self.task])
        scene.tool_capsules = self.tool.capsules

        self._pose_human(scene)
        self._build_furniture(scene)
        self._sample_task(scene)
        self._post_pose_hook(scene)

        # human chains: held at the static pose targets
        self.human_nominal: dict[str, list[float]] = {}
        for chain, qidx in self.human.chains.items():
            target = list(self._static_pose[chain])
            ctl = ChainControl(f"human_{chain}", "human", qidx, MODE_HELD,
                               target=list(target))
            scene.chains[f"human_{chain}"] = ctl
            self.human_nominal[chain] = list(target)
            # start exactly at the target so the first step holds still
            for qi, v in zip(qidx, target):
                self.human.body.q[qi] = v
        self.human.body.q = self.human.body.clamp_q(self.human.body.q)

        # robot chains
        for side, qidx in self.robot.arm_q_indices.items():
            scene.chains[f"robot_{side}"] = ChainControl(
                f"robot_{side}", "robot", qidx, MODE_COMMANDED)
        self.robot.park_inactive_arms()

        self._place_robot(scene)
        self._grasp_tool(scene)
        self._register_pairs(scene)
        self._setup_payloads(scene)

        frames = forward_kinematics(self.robot.body)
        scene.tool_pose = self.robot.tool_pose(frames)
        for side in self.robot.arm_q_indices:
            scene.ee_prev[side] = frames[self.robot.ee_links[side]][1]
        self._prev_tool_tip = t_point(scene.tool_pose, self.tool.tip)
        self._prev_arm_q = {c: self.human.chain_q(c)
                            for c in ("right_arm", "left_arm")}

        self.scene = scene
        self.info = {"success": False, "perturbation": self._perturbation,
                     "sex": sex, "limitation": self.limitation.kind}
        self._counters = {}
        self._init_counters()
        return self._observe()

    def _pose_human(self, scene: SceneState) -> None:
        if self.task in ("bed_bathing", "arm_manipulation"):
            self.human.body.base = scn.supine_base(self._supine_shift())
            self._static_pose = scn.supine_pose(self.human)
            # small random variation of the resting arm pose
            for chain in ("right_arm", "left_arm"):
                pose = self._static_pose[chain]
                pose[2] += self.rng.uniform(-0.1, 0.1)
                pose[5] += self.rng.uniform(-0.1, 0.1)
        else:
            self.human.body.base = scn.seated_base()
            self._static_pose = scn.seated_pose(self.human)
        if self.task in ("feeding", "drinking"):
            yaw = self.rng.uniform(-math.pi / 6, math.pi / 6)
            pitch = self.rng.uniform(-math.pi / 6, math.pi / 6)
            self._static_pose["head"] = [yaw, pitch, 0.0, 0.0]
        # clamp all targets into (possibly rom-limited) joint boxes
        for chain, vals in self._static_pose.items():
            lo, hi = self.human.chain_limits(chain)
            self._static_pose[chain] = [min(max(v, a), b)
                                        for v, a, b in zip(vals, lo, hi)]

    def _supine_shift(self) -> float:
        return 0.0

    def _post_pose_hook(self, scene: SceneState) -> None:
        pass

    def _build_furniture(self, scene: SceneState) -> None:
        if self.task in ("bed_bathing", "arm_manipulation"):
            scene.furniture.extend(scn.bed_capsules())
        else:
            scene.furniture.extend(scn.wheelchair_capsules())

    def _place_robot(self, scene: SceneState) -> None:
        decision = mount_rule(self.spec.robot_name, self.task)
        human_frames = forward_kinematics(self.human.body)
        obstacles = [cap.transformed(human_frames[l])
                     for l, cap in self.human.body.capsules.items()]
        obstacles += [c for _, c in scene.furniture]
        goals = self._task_goals(human_frames)

        if decision.fixed_socket == "wheelchair":
            self.robot.body.base = scn.WHEELCHAIR_SOCKET
            self._placement = None
        elif decision.fixed_socket == "nightstand":
            centroid = goals.centroid()

            def nightstand_sampler(r):
                # stands beside the bed on the human's right
                x = r.uniform(-0.9, 0.9)
                y = r.uniform(-1.05, -0.7)
                yaw = math.atan2(centroid[1] - y, centroid[0] - x) \
                    + r.uniform(-0.6, 0.6)
                return (x, y, yaw)

            best = optimize_base_pose(
                self.robot, goals, self.rng.spawn(11), obstacles,
                samples=self.spec.placement_samples, base_z=scn.NIGHTSTAND_TOP,
                sample_fn=nightstand_sampler)
            x, y, yaw = best.base_pose
            scene.furniture.extend(scn.nightstand_capsules(x, y))
            self.robot.body.base = scn.nightstand_socket(x, y, yaw)
            self._placement = best
        else:
            best = optimize_base_pose(
                self.robot, goals, self.rng.spawn(11), obstacles,
                samples=self.spec.placement_samples)
            from ..base_placement import base_transform

            self.robot.body.base = base_transform(*best.base_pose)
            self._placement = best

    def _grasp_tool(self, scene: SceneState) -> None:
        """IK the tool arm to the task start pose, with <=5 cm perturbation.

        The spawn must also be collision-free (robot arm and tool clear of
        the human and furniture): re-samples the perturbation up to 10
        times before giving up.
        """
        base_pose = self._task_start_pose(forward_kinematics(self.human.body))
        side = self.robot.tool_arm
        if side in self.robot.home_q:
            self.robot.set_arm_q(side, self.robot.home_q[side])
        last_err = None
        for attempt in range(10):
            offset = tuple(self.rng.uniform(-EE_PERTURBATION, EE_PERTURBATION)
                           for _ in range(3))
            target = (base_pose[0], vadd(base_pose[1], offset))
            sub = _arm_subchain(self.robot, side)
            res = solve_ik(sub.body, sub.ee, target, rng=self.rng,
                           max_restarts=4, use_orientation=False)
            if not res.success:
                last_err = f"best IK residual {res.pos_residual:.3f} m"
                continue
            self.robot.set_arm_q(side, [res.q[i] for i in sub.arm_q])
            worst = self._spawn_clearance(scene)
            if worst < -0.002:
                last_err = f"spawn penetration {-worst:.3f} m"
                continue
            self._perturbation = offset
            return
        raise ResetError(
            f"{self.spec.env_id}: no valid initial tool pose ({last_err})")

    def _spawn_clearance(self, scene: SceneState) -> float:
        """Smallest distance from robot arm/tool capsules to human+furniture."""
        from ..geom import capsule_distance

        rframes = forward_kinematics(self.robot.body)
        hframes = forward_kinematics(self.human.body)
        tool_pose = self.robot.tool_pose(rframes)
        moving = [cap.transformed(rframes[l])
                  for l, cap in self.robot.body.capsules.items()
                  if self._is_arm_link(l)]
        moving += [c.transformed(tool_pose) for c in scene.tool_capsules]
        static = [cap.transformed(hframes[l])
                  for l, cap in self.human.body.capsules.items()]
        static += [c for _, c in scene.furniture]
        worst = 1.0
        for mc in moving:
            for sc in static:
                d, _, _, _ = capsule_distance(mc, sc)
                if d < worst:
                    worst = d
        return worst

    def _register_pairs(self, scene: SceneState) -> None:
        """Collision pairs: tool/robot arm capsules vs human and furniture."""
        human_links = self._human_contact_links()
        robot_caps = [l for l in self.robot.body.capsules
                      if self._is_arm_link(l)]
        for ci in range(len(scene.tool_capsules)):
            for hl in human_links:
                scene.pairs.append(PairSpec("tool", ci, "human", hl,
                                            self._yield_chain(hl)))
            for fi in range(len(scene.furniture)):
                scene.pairs.append(PairSpec("tool", ci, "furniture", fi))
        for rl in robot_caps:
            for hl in human_links:
                scene.pairs.append(PairSpec("robot", rl, "human", hl,
                                            self._yield_chain(hl)))
        # human self-collision (limbs vs trunk)
        for a, bl in self.human.self_collision_pairs:
            scene.pairs.append(PairSpec("human", a, "human", bl))

    def _is_arm_link(self, link: int) -> bool:
        body = self.robot.body
        arm_q = {qi for idx in self.robot.arm_q_indices.values() for qi in idx}
        l = link
        while l >= 0:
            if body.q_index(l) in arm_q:
                return True
            l = body.parents[l]
        return False

    def _human_contact_links(self) -> list[int]:
        names = ("right_upper_arm", "right_forearm", "right_hand", "torso",
                 "head", "left_upper_arm", "left_forearm", "left_hand",
                 "right_thigh", "left_thigh")
        return [self.human.sites[n] for n in names if n in self.human.sites]

    def _yield_chain(self, human_link: int) -> str | None:
        return None

    # ------------------------------------------------------------------- step

    def step(self, robot_action, human_action=None):
        """One control step. Returns (obs, RewardBreakdown, done, info)."""
        if self.done:
            raise ActionError("episode finished; call reset")
        robot_action = self._check_action(robot_action, self.robot_action_dim,
                                          "robot")
        commands = {}
        sides = ["right"] + (["left"] if self.robot.arms == 2 else [])
        for i, side in enumerate(sides):
            part = robot_action[7 * i: 7 * (i + 1)]
            commands[f"robot_{side}"] = [v * ROBOT_ACTION_SCALE for v in part]

        # human targets: nominal pose plus tremor on the controlled chain
        chain = HUMAN_CHAIN[self.task]
        if self.spec.active_human:
            human_action = self._check_action(human_action,
                                              self.human_action_dim, "human")
            nominal = self.human_nominal[chain]
            lo, hi = self.human.chain_limits(chain)
            for k, dv in enumerate(human_action):
                nominal[k] = min(max(nominal[k] + dv * HUMAN_ACTION_SCALE,
                                     lo[k]), hi[k])
        eps = self.limitation.epsilon if self.limitation.kind == TREMOR else 0.0
        for cname, ctl in self.scene.chains.items():
            if not cname.startswith("human_"):
                continue
            ch = cname[len("human_"):]
            if ctl.mode == MODE_PASSIVE:
                continue
            base_target = self.human_nominal[ch]
            if ch == chain and eps > 0.0:
                ctl.target = tremor_offset(base_target, eps, self.t)
            else:
                ctl.target = list(base_target)

        prev_tool_tip = self._prev_tool_tip
        prev_ee = dict(self.scene.ee_prev)

        new_scene, contacts = step_quasistatic(
            self.scene, commands, self.robot.ee_links[self.robot.tool_arm],
            self.robot.tool_socket)

        # arm pose-validity rollback (both arms, every step)
        self.scene = new_scene
        self.human.body = new_scene.bodies["human"]
        self.robot.body = new_scene.bodies["robot"]
        predicate = self._pose_predicate()
        rolled_back = False
        for arm in ("right_arm", "left_arm"):
            q_new = self.human.chain_q(arm)
            accepted = enforce_pose_validity(self._prev_arm_q[arm], q_new,
                                             predicate)
            if accepted != q_new:
                self.human.set_chain_q(arm, accepted)
                rolled_back = True
                if self.spec.active_human and arm == chain:
                    self.human_nominal[arm] = list(accepted)
            self._prev_arm_q[arm] = self.human.chain_q(arm)

        frames = new_scene.final_frames["robot"]
        human_frames = (forward_kinematics(self.human.body) if rolled_back
                        else new_scene.final_frames["human"])

        # velocities of the end effectors
        ee_vel = {}
        for side in self.robot.arm_q_indices:
            p = frames[self.robot.ee_links[side]][1]
            ee_vel[side] = vscale(vsub(p, prev_ee[side]), 1.0 / DT)
            new_scene.ee_prev[side] = p
        tool_tip = t_point(new_scene.tool_pose, self.tool.tip)
        self._prev_tool_tip = tool_tip

        self.t += 1
        new_scene.t = self.t

        # task events and shaping reward
        r_task, events = self._process_events(
            new_scene, contacts, frames, human_frames, tool_tip, prev_tool_tip)

        costs = self._compute_costs(new_scene, contacts, ee_vel, human_frames,
                                    events)
        breakdown = RewardBreakdown(r_task=r_task, costs=costs, config=self.pref)

        success_now = self._success_predicate(new_scene, human_frames)
        if success_now:
            self._episode_success = True
        early = self._early_termination(success_now)
        self.done = self.t >= self.spec.episode_steps or early

        self.info = {"success": self._success_now_final(success_now),
                     "events": events, "t": self.t, "terminal": early,
                     "sex": self.human.sex, "limitation": self.limitation.kind}
        self.info.update(self._counters)
        return (self._observe(frames, human_frames), breakdown, self.done,
                dict(self.info))

    def _success_now_final(self, success_now: bool) -> bool:
        return success_now

    def success(self) -> bool:
        """Task success of the finished (or current) episode."""
        if self.scene is None:
            return False
        return self._success_predicate(self.scene,
                                       forward_kinematics(self.human.body))

    def _early_termination(self, success_now: bool) -> bool:
        return False

    def _pose_predicate(self):
        return default_pose_predicate

    def _check_action(self, action, dim: int, who: str):
        if action is None or len(action) != dim:
            got = 0 if action is None else len(action)
            raise ActionError(f"{who} action has {got} dims, expected {dim}")
        clipped = []
        for v in action:
            v = float(v)
            if not math.isfinite(v):
                raise ActionError(f"{who} action contains non-finite values")
            clipped.append(min(max(v, -1.0), 1.0))
        return clipped

    # ----------------------------------------------------------------- reward

    def _compute_costs(self, scene, contacts, ee_vel, human_frames,
                       events) -> PreferenceCosts:
        sides = list(self.robot.arm_q_indices)
        v_r = ee_vel["right"]
        v_l = ee_vel.get("left", v_r)
        on_person = [c for c in contacts
                     if "human" in (c.body_a, c.body_b)
                     and "furniture" not in (c.body_a, c.body_b)
                     and not (c.body_a == "human" and c.body_b == "human")]
        target = self._cost_target_point(human_frames)
        c_f, c_hf = force_costs(on_person, target)
        return PreferenceCosts(
            velocity=velocity_cost(v_l, v_r),
            misdirected_force=c_f,
            high_force=c_hf,
            food_drop=float(events.get("spilled_on_person", 0)),
            fast_intake=intake_speed_cost(events.get("capture_speeds", ())),
            garment_force=events.get("garment_force", 0.0),
            pressure=pressure_cost(on_person),
        )

    # ------------------------------------------------------------ observation

    @property
    def robot_action_dim(self) -> int:
        return self.robot.action_dim

    @property
    def human_action_dim(self) -> int:
        return len(self.human.chains[HUMAN_CHAIN[self.task]]) if self.human else \
            (4 if self.task in ("feeding", "drinking") else 10)

    def _observe(self, frames=None, human_frames=None):
        base_inv = t_inverse(self.robot.body.base)
        if frames is None:
            frames = forward_kinematics(self.robot.body)
        if human_frames is None:
            human_frames = forward_kinematics(self.human.body)
        ee = frames[self.robot.ee_links[self.robot.tool_arm]]
        ee_rel = t_compose(base_inv, ee)
        obs = list(ee_rel[1]) + list(ee_rel[0])
        for side in (["right", "left"] if self.robot.arms == 2 else ["right"]):
            obs.extend(self.robot.arm_q(side))
        obs.extend(self._ee_force_reading())
        for p in self._task_points(human_frames):
            obs.extend(t_point(base_inv, p))
        if self.task in ("feeding", "drinking"):
            head = t_compose(base_inv, human_frames[self.human.sites["head"]])
            obs.extend(head[1])
            obs.extend(head[0])
        if not self.spec.active_human:
            return obs
        # human view: proprioception + tool position in the human base frame
        hbase_inv = t_inverse(self.human.body.base)
        hobs = list(self.human.chain_q(HUMAN_CHAIN[self.task]))
        hobs.extend(t_point(hbase_inv, self.scene.tool_pose[1]))
        return {"robot": obs, "human": hobs}

    def _ee_force_reading(self):
        total = [0.0, 0.0, 0.0]
        for c in (self.scene.contacts if self.scene else ()):
            if c.body_a == "tool":
                sign = 1.0
            elif c.body_b == "tool":
                sign = -1.0
            elif c.body_a == "robot":
                sign = 1.0
            elif c.body_b == "robot":
                sign = -1.0
            else:
                continue
            for k in range(3):
                total[k] += sign * c.force * c.normal[k]
        return total

    def observation_dim(self) -> int:
        obs = self._observe()
        return len(obs["robot"] if isinstance(obs, dict) else obs)

    def describe(self) -> dict:
        """Machine-readable spec: dims and the observation layout."""
        layout = [("ee_position", 3), ("ee_orientation", 4),
                  ("arm_joint_positions", 7 * self.robot.arms),
                  ("ee_force", 3)]
        layout += [(name, 3) for name in self._task_point_names()]
        if self.task in ("feeding", "drinking"):
            layout.append(("head_pose", 7))
        human_obs = (len(self.human.chains[HUMAN_CHAIN[self.task]])
                     if self.human else self.human_action_dim) + 3
        return {
            "env_id": self.spec.env_id,
            "task": self.task,
            "robot": self.spec.robot_name,
            "active_human": self.spec.active_human,
            "episode_steps": self.spec.episode_steps,
            "robot_action_dim": self.robot_action_dim,
            "human_action_dim": self.human_action_dim if self.spec.active_human else 0,
            "robot_observation": layout,
            "robot_observation_dim": sum(n for _, n in layout),
            "human_observation_dim": human_obs if self.spec.active_human else 0,
        }

    # -------------------------------------------------------------- task hooks

    def _init_counters(self) -> None:
        raise NotImplementedError

    def _sample_task(self, scene: SceneState) -> None:
        raise NotImplementedError

    def _task_goals(self, human_frames) -> GoalSet:
        raise NotImplementedError

    def _task_start_pose(self, human_frames) -> Transform:
        raise NotImplementedError

    def _setup_payloads(self, scene: SceneState) -> None:
        pass

    def _process_events(self, scene, contacts, robot_frames, human_frames,
                        tool_tip, prev_tool_tip) -> tuple[float, dict]:
        raise NotImplementedError

    def _success_predicate(self, scene, human_frames) -> bool:
        raise NotImplementedError

    def _cost_target_point(self, human_frames):
        raise NotImplementedError

    def _task_point_names(self) -> list[str]:
        raise NotImplementedError

    def _task_points(self, human_frames) -> list:
        raise NotImplementedError


class _Subchain:
    def __init__(self, body, ee, arm_q):
        self.body = body
        self.ee = ee
        self.arm_q = arm_q


def _arm_subchain(robot, side: str) -> _Subchain:
    """The robot body restricted (by limits) to one arm for IK.

    Other joints are frozen at their current values by temporarily treating
    the full body as the IK chain but pinning non-arm joints via equal
    limits on a copy.
    """
    body = robot.body.copy()
    arm = set(robot.arm_q_indices[side])
    pinned = []
    for link in range(body.n_links):
        qi = body.q_index(link)
        if qi >= 0 and qi not in arm:
            j = body.joints[link]
            v = body.q[qi]
            from ..kinematics import JointSpec

            body.joints[link] = JointSpec(j.name, j.axis, j.jtype, v, v,
                                          j.tau_max, j.v_max)
            pinned.append(qi)
    return _Subchain(body, robot.ee_links[side], robot.arm_q_indices[side])
