"""Toy planar 2-DoF reach task for learning-sanity checks.

A two-revolute-joint arm must bring its tip within 5 cm of a nearby
random target. Episodes are short (15 steps) with targets sampled within
reach of a few full-speed actions, so per-action credit is nearly direct
and the run mainly exercises the training machinery (rollout collection,
GAE, the clipped update, evaluation) end to end.

Actions command the tip displacement (2D); the env resolves them to the
two joints through the damped arm Jacobian. Rewards stay positive
(distance shaping plus a graded precision term), which keeps
phase-to-phase return ratios meaningful.
"""

from __future__ import annotations

import math

from ..reward import PreferenceConfig, PreferenceCosts, RewardBreakdown
from ..rng import SeededRng
from .core import ActionError

L1 = 0.5
L2 = 0.5
ACTION_SCALE = 0.1         # m of commanded tip motion per step
DLS_DAMPING = 0.1
EPISODE_STEPS = 15
SUCCESS_RADIUS = 0.05
TARGET_NEAR = 0.15
TARGET_FAR = 0.55


class Reach2dEnv:
    task = "reach2d"

    def __init__(self):
        self.rng = SeededRng(0)
        self.q = [0.0, 0.0]
        self.target = (0.5, 0.5)
        self.t = 0
        self.done = True
        self._pref = PreferenceConfig(alpha=(0,) * 7)
        self._success = False
        self.spec = self  # minimal spec-compatibility
        self.episode_steps = EPISODE_STEPS
        self.active_human = False
        self.env_id = "reach2d"
        self.robot_action_dim = 2
        self.human_action_dim = 0

    def _tip(self):
        x = L1 * math.cos(self.q[0]) + L2 * math.cos(self.q[0] + self.q[1])
        y = L1 * math.sin(self.q[0]) + L2 * math.sin(self.q[0] + self.q[1])
        return (x, y)

    def reset(self, seed: int):
        self.rng = SeededRng(seed)
        # bent-elbow start (a straight arm is singular for radial commands);
        # the target lands a few full-speed steps away from the start tip
        sign = 1.0 if self.rng.random() < 0.5 else -1.0
        self.q = [self.rng.uniform(-math.pi, math.pi),
                  sign * self.rng.uniform(0.7, 1.7)]
        tip = self._tip()
        for _ in range(64):
            ang = self.rng.uniform(-math.pi, math.pi)
            rad = self.rng.uniform(TARGET_NEAR, TARGET_FAR)
            target = (tip[0] + rad * math.cos(ang), tip[1] + rad * math.sin(ang))
            # keep the target in the comfortably reachable annulus
            r = math.hypot(*target)
            if 0.25 <= r <= 0.92:
                break
        self.target = target
        self.t = 0
        self.done = False
        self._success = False
        return self._observe()

    def _observe(self):
        # cos/sin joint encoding (no wraparound) plus the target-relative
        # vector, the standard observation design for reach tasks
        tip = self._tip()
        return [math.cos(self.q[0]), math.sin(self.q[0]),
                math.cos(self.q[1]), math.sin(self.q[1]),
                self.target[0] - tip[0], self.target[1] - tip[1]]

    def step(self, robot_action, human_action=None):
        if self.done:
            raise ActionError("episode finished; call reset")
        if robot_action is None or len(robot_action) != 2:
            raise ActionError("reach2d expects a 2-dim action")
        for v in robot_action:
            if not math.isfinite(float(v)):
                raise ActionError("non-finite action")
        dx = min(max(float(robot_action[0]), -1.0), 1.0) * ACTION_SCALE
        dy = min(max(float(robot_action[1]), -1.0), 1.0) * ACTION_SCALE
        # damped-least-squares resolution of the commanded tip motion
        s1 = math.sin(self.q[0])
        c1 = math.cos(self.q[0])
        s12 = math.sin(self.q[0] + self.q[1])
        c12 = math.cos(self.q[0] + self.q[1])
        j11 = -L1 * s1 - L2 * s12
        j12 = -L2 * s12
        j21 = L1 * c1 + L2 * c12
        j22 = L2 * c12
        # J^T (J J^T + lambda^2 I)^-1 [dx, dy]
        a = j11 * j11 + j12 * j12 + DLS_DAMPING ** 2
        b = j11 * j21 + j12 * j22
        c = j21 * j21 + j22 * j22 + DLS_DAMPING ** 2
        det = a * c - b * b
        ux = (c * dx - b * dy) / det
        uy = (a * dy - b * dx) / det
        dq1 = j11 * ux + j21 * uy
        dq2 = j12 * ux + j22 * uy
        for i, dq in enumerate((dq1, dq2)):
            dq = min(max(dq, -0.4), 0.4)
            self.q[i] = min(max(self.q[i] + dq, -2.0 * math.pi), 2.0 * math.pi)
        self.t += 1
        tip = self._tip()
        dist = math.hypot(tip[0] - self.target[0], tip[1] - self.target[1])
        # positive distance shaping (keeps returns positive so phase ratios
        # are meaningful) plus a graded precision term within 10 cm
        r_task = 1.0 - dist + 2.0 * max(0.0, 1.0 - dist / 0.1)
        if dist < SUCCESS_RADIUS:
            self._success = True
        breakdown = RewardBreakdown(r_task=r_task, costs=PreferenceCosts(),
                                    config=self._pref)
        self.done = self.t >= EPISODE_STEPS
        info = {"success": self._success, "dist": dist, "t": self.t}
        return self._observe(), breakdown, self.done, info

    def success(self) -> bool:
        return self._success

    def describe(self) -> dict:
        return {
            "env_id": "reach2d",
            "task": "reach2d",
            "robot": "planar2",
            "active_human": False,
            "episode_steps": EPISODE_STEPS,
            "robot_action_dim": 2,
            "human_action_dim": 0,
            "robot_observation": [("joint_cos_sin", 4), ("target_delta", 2)],
            "robot_observation_dim": 6,
            "human_observation_dim": 0,
        }
