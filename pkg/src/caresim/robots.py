"""The four supported robots and their task-relevant tools.

Robot kinematics are shipped as body description files with documented,
product-approximate parameters (desk-scale fidelity: plausible reach,
limits, and geometry, not mesh accuracy). Dual-arm robots (PR2, Baxter)
drive the right arm in single-tool tasks and park the left.

Mounting rules: the Jaco is bolted to the wheelchair for the seated tasks
(itch scratching, drinking, feeding, dressing) and to a nightstand for the
bed tasks (bed bathing, arm manipulation; the nightstand pose itself gets
optimized). The wheeled robots always get their 2D base pose optimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bodies import DATA_DIR, load_body_file
from .geom import (
    Capsule,
    Transform,
    quat_from_euler,
    t_compose,
    vnorm,
)
from .kinematics import ArticulatedBody, forward_kinematics

ROBOT_NAMES = ("pr2", "jaco", "baxter", "sawyer")

WHEELCHAIR_TASKS = ("scratch_itch", "drinking", "feeding", "dressing")
BED_TASKS = ("bed_bathing", "arm_manipulation")

TOOL_KINDS = ("scratcher", "washcloth", "cup", "spoon", "gown", "scoop")

# tool used by each task
TASK_TOOL = {
    "scratch_itch": "scratcher",
    "bed_bathing": "washcloth",
    "drinking": "cup",
    "feeding": "spoon",
    "dressing": "gown",
    "arm_manipulation": "scoop",
}


@dataclass
class ToolModel:
    """Rigid tool that follows the end effector through its grasp transform."""

    kind: str
    capsules: list[Capsule]          # in tool frame
    grasp: Transform                 # ee frame -> tool frame
    tip: tuple[float, float, float]  # working point in tool frame

    def __post_init__(self):
        if self.kind not in TOOL_KINDS:
            raise ValueError(f"unknown tool kind {self.kind!r}")


def make_tool(kind: str) -> ToolModel:
    """Tool geometry in the tool frame: +z points out of the gripper."""
    ident = ((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    if kind == "scratcher":
        return ToolModel(kind, [Capsule((0, 0, 0), (0, 0, 0.15), 0.01)], ident,
                         (0.0, 0.0, 0.16))
    if kind == "washcloth":
        return ToolModel(kind, [Capsule((0, 0, 0.02), (0, 0, 0.1), 0.05)], ident,
                         (0.0, 0.0, 0.15))
    if kind == "cup":
        return ToolModel(kind, [Capsule((0, 0, 0.0), (0, 0, 0.13), 0.045)], ident,
                         (0.0, 0.0, 0.13))
    if kind == "spoon":
        return ToolModel(kind, [Capsule((0, 0, 0), (0, 0, 0.18), 0.012),
                                Capsule((0, 0, 0.18), (0, 0, 0.2), 0.022)], ident,
                         (0.0, 0.0, 0.19))
    if kind == "gown":
        # grasp point of the gown sleeve opening; cloth itself is the ring model
        return ToolModel(kind, [Capsule((0, 0, 0), (0, 0, 0.05), 0.02)], ident,
                         (0.0, 0.0, 0.05))
    if kind == "scoop":
        return ToolModel(kind, [Capsule((0, 0, 0.02), (0, 0, 0.22), 0.055)], ident,
                         (0.0, 0.0, 0.12))
    raise ValueError(f"unknown tool kind {kind!r}")


class RobotModel:
    """Loaded robot: articulated body plus arm/end-effector bookkeeping."""

    def __init__(self, body: ArticulatedBody, meta: dict):
        self.body = body
        self.name = body.name
        self.arms = int(meta["arms"])
        self.mobility = meta["mobility"]
        self.ee_links = {side: body.link_index(n) for side, n in meta["ee_links"].items()}
        self.arm_q_indices = {
            side: [body.q_index(body.link_index(n)) for n in names]
            for side, names in meta["arm_links"].items()
        }
        sock = meta.get("tool_socket", {})
        self.tool_socket: Transform = (
            quat_from_euler(*sock.get("rpy", (0.0, 0.0, 0.0))),
            tuple(sock.get("xyz", (0.0, 0.0, 0.0))),
        )
        self.home_q = {side: list(v) for side, v in meta.get("home_q", {}).items()}
        self.parked_q = {side: list(v) for side, v in meta.get("parked", {}).items()}
        for side, qi in self.arm_q_indices.items():
            if len(qi) != 7:
                raise ValueError(f"{self.name} {side} arm has {len(qi)} joints, expected 7")

    @property
    def action_dim(self) -> int:
        return 7 * self.arms

    @property
    def tool_arm(self) -> str:
        return "right"

    def arm_reach(self, side: str = "right") -> float:
        """Straightened-chain reach: sum of fixed offsets along the arm."""
        first_q = self.arm_q_indices[side][0]
        chain_links = []
        for link in range(self.body.n_links):
            qi = self.body.q_index(link)
            if qi == first_q:
                start = link
                break
        ee = self.ee_links[side]
        link = ee
        total = 0.0
        while link >= 0:
            total += vnorm(self.body.locals[link][1])
            if link == start:
                break
            link = self.body.parents[link]
        return total

    def set_arm_q(self, side: str, values) -> None:
        for qi, v in zip(self.arm_q_indices[side], values):
            self.body.q[qi] = float(v)
        self.body.q = self.body.clamp_q(self.body.q)

    def arm_q(self, side: str) -> list[float]:
        return [self.body.q[i] for i in self.arm_q_indices[side]]

    def park_inactive_arms(self) -> None:
        for side in self.arm_q_indices:
            if side != self.tool_arm and side in self.parked_q:
                self.set_arm_q(side, self.parked_q[side])

    def ee_pose(self, side: str = "right", frames=None) -> Transform:
        if frames is None:
            frames = forward_kinematics(self.body)
        return frames[self.ee_links[side]]

    def tool_pose(self, frames=None) -> Transform:
        return t_compose(self.ee_pose(self.tool_arm, frames), self.tool_socket)


def load_robot(name: str) -> RobotModel:
    if name not in ROBOT_NAMES:
        raise ValueError(f"unknown robot {name!r}; expected one of {ROBOT_NAMES}")
    body, meta = load_body_file(DATA_DIR / "robots" / f"{name}.json")
    return RobotModel(body, meta)


@dataclass
class MountDecision:
    """How a robot is placed for a task before any episode starts."""

    fixed_socket: str | None       # "wheelchair" or "nightstand", None = free base
    optimize_base: bool            # 2D pose (or nightstand pose) to optimize

    @property
    def requires_optimization(self) -> bool:
        return self.optimize_base


def mount_rule(robot_name: str, task: str) -> MountDecision:
    """Mounting policy: Jaco bolts to furniture, wheeled robots are placed."""
    if task not in WHEELCHAIR_TASKS and task not in BED_TASKS:
        raise ValueError(f"unknown task {task!r}")
    if robot_name == "jaco":
        if task in WHEELCHAIR_TASKS:
            return MountDecision("wheelchair", False)
        # nightstand pose is itself optimized for the bed tasks
        return MountDecision("nightstand", True)
    return MountDecision(None, True)
