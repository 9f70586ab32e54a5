"""Scene assembly: furniture, human posing, and task payload state.

World frame: z up, meters. Seated tasks put the human in a wheelchair at
the origin facing +x; bed tasks lay the human supine on a bed with the
head toward -x. The human's right side is at -y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..geom import Capsule, Transform, quat_from_axis_angle, quat_mul, t_compose
from ..human import HumanModel

SEAT_HEIGHT = 0.55
BED_TOP = 0.55
BED_HALFWIDTH = 0.45
NIGHTSTAND_TOP = 0.55

GRAVITY = -9.81
FLOOR_Z = 0.02


# particle lifecycle states
HELD = "held"
AIRBORNE = "airborne"
CAPTURED = "captured"
SPILLED = "spilled"

_STATE_ORDER = {HELD: 0, AIRBORNE: 1, CAPTURED: 2, SPILLED: 2}


class Particle:
    """One food/water sphere. States only advance held->airborne->{captured,spilled}."""

    __slots__ = ("pos", "vel", "state", "local")

    def __init__(self, local, state=HELD):
        self.local = local          # offset in the tool frame while held
        self.pos = (0.0, 0.0, 0.0)
        self.vel = (0.0, 0.0, 0.0)
        self.state = state

    def advance(self, new_state: str) -> None:
        if _STATE_ORDER[new_state] < _STATE_ORDER[self.state]:
            raise ValueError(f"particle cannot go {self.state} -> {new_state}")
        self.state = new_state

    def copy(self) -> "Particle":
        p = Particle(self.local, self.state)
        p.pos = self.pos
        p.vel = self.vel
        return p


class SleeveRing:
    """Dressing abstraction: a rigid ring sliding along the left arm axis.

    s is the arc-length coordinate from the hand tip (0) toward the
    shoulder (arm_length); it only advances (the gown bunches rather than
    slides back). axial_force feeds the garment-force cost.
    """

    __slots__ = ("s", "engaged", "radius", "axial_force", "arm_length", "forearm_length")

    def __init__(self, radius: float, arm_length: float, forearm_length: float):
        self.s = 0.0
        self.engaged = False
        self.radius = radius
        self.axial_force = 0.0
        self.arm_length = arm_length
        self.forearm_length = forearm_length

    def advance(self, ds: float) -> float:
        ds = max(0.0, ds)
        before = self.s
        self.s = min(self.arm_length, self.s + ds)
        return self.s - before

    def copy(self) -> "SleeveRing":
        r = SleeveRing(self.radius, self.arm_length, self.forearm_length)
        r.s = self.s
        r.engaged = self.engaged
        r.axial_force = self.axial_force
        return r


def wheelchair_capsules() -> list[tuple[str, Capsule]]:
    """Seat, backrest, and armrests as fat capsules around the origin."""
    seat_z = SEAT_HEIGHT - 0.08
    return [
        ("seat_l", Capsule((0.0, 0.12, seat_z), (0.4, 0.12, seat_z), 0.07)),
        ("seat_r", Capsule((0.0, -0.12, seat_z), (0.4, -0.12, seat_z), 0.07)),
        ("backrest_l", Capsule((-0.22, 0.12, seat_z), (-0.25, 0.12, seat_z + 0.55), 0.06)),
        ("backrest_r", Capsule((-0.22, -0.12, seat_z), (-0.25, -0.12, seat_z + 0.55), 0.06)),
        ("armrest_l", Capsule((-0.15, 0.32, SEAT_HEIGHT + 0.18), (0.3, 0.32, SEAT_HEIGHT + 0.18), 0.04)),
        ("armrest_r", Capsule((-0.15, -0.32, SEAT_HEIGHT + 0.18), (0.3, -0.32, SEAT_HEIGHT + 0.18), 0.04)),
    ]


def bed_capsules(length=2.1, halfwidth=BED_HALFWIDTH) -> list[tuple[str, Capsule]]:
    rows = []
    r = 0.1
    z = BED_TOP - r
    for i, y in enumerate((-halfwidth + r, 0.0, halfwidth - r)):
        rows.append((f"bed_{i}", Capsule((-length / 2, y, z), (length / 2, y, z), r)))
    return rows


def nightstand_capsules(x: float, y: float) -> list[tuple[str, Capsule]]:
    return [("nightstand", Capsule((x, y, 0.1), (x, y, NIGHTSTAND_TOP - 0.06), 0.14))]


# socket where the Jaco mount bolts to the wheelchair (left side, at the
# front of the armrest) and onto a nightstand top
WHEELCHAIR_SOCKET: Transform = (
    quat_from_axis_angle((0.0, 0.0, 1.0), -0.3), (0.05, 0.44, SEAT_HEIGHT + 0.12))


def nightstand_socket(x: float, y: float, yaw: float) -> Transform:
    return (quat_from_axis_angle((0.0, 0.0, 1.0), yaw), (x, y, NIGHTSTAND_TOP))


def seated_base() -> Transform:
    return ((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, SEAT_HEIGHT))


def supine_base(y_shift: float = 0.0) -> Transform:
    """Lying on the back: body +z -> world -x (head toward -x), face up."""
    rot = quat_from_axis_angle((0.0, 1.0, 0.0), -math.pi / 2)
    return (rot, (0.35, y_shift, BED_TOP + 0.08))


def seated_pose(model: HumanModel) -> dict[str, list[float]]:
    """Static target per chain for a person seated in the wheelchair."""
    arm_rest = [0.0, 0.0, 0.25, 0.45, 0.0, 0.9, 0.0, 0.0, 0.0, 0.2]
    return {
        "torso": [0.0, 0.0],
        "head": [0.0, 0.0, 0.0, 0.0],
        "right_arm": list(arm_rest),
        "left_arm": list(arm_rest),
        "right_leg": [1.45, 0.0, 0.0, 1.35, 0.1, 0.0, 0.0],
        "left_leg": [1.45, 0.0, 0.0, 1.35, 0.1, 0.0, 0.0],
    }


def supine_pose(model: HumanModel) -> dict[str, list[float]]:
    """Static target per chain for a person lying on the bed."""
    arm_side = [0.0, 0.0, 0.12, 0.1, 0.0, 0.15, 0.0, 0.0, 0.0, 0.1]
    return {
        "torso": [0.0, 0.0],
        "head": [0.0, 0.0, 0.0, 0.0],
        "right_arm": list(arm_side),
        "left_arm": list(arm_side),
        "right_leg": [0.1, 0.0, 0.0, 0.15, 0.0, 0.0, 0.0],
        "left_leg": [0.1, 0.0, 0.0, 0.15, 0.0, 0.0, 0.0],
    }


def hanging_arm_rest() -> list[float]:
    """Right-arm rest pose for the arm hanging off the bed edge (supine).

    Abducted over the edge with internal rotation so the flexed forearm
    points toward the floor.
    """
    return [0.0, 0.0, 1.3, -0.5, -1.5, 1.0, 0.0, 0.0, 0.0, 0.1]


def arm_surface_markers(model: HumanModel, frames, spacing: float = 0.03,
                        side: str = "right"):
    """Points every ~3 cm on rings around the forearm and upper arm.

    Returns a list of [link_index, lx, ly, lz, wiped] entries with the
    point in the link's local frame (so they follow the arm).
    """
    out = []
    for part in (f"{side}_upper_arm", f"{side}_forearm"):
        link = model.sites[part]
        cap = model.body.capsules[link]
        ax = (cap.b[0] - cap.a[0], cap.b[1] - cap.a[1], cap.b[2] - cap.a[2])
        length = math.sqrt(sum(v * v for v in ax))
        ax = tuple(v / length for v in ax)
        # local orthonormal frame around the capsule axis
        helper = (1.0, 0.0, 0.0) if abs(ax[0]) < 0.9 else (0.0, 1.0, 0.0)
        u = (ax[1] * helper[2] - ax[2] * helper[1],
             ax[2] * helper[0] - ax[0] * helper[2],
             ax[0] * helper[1] - ax[1] * helper[0])
        un = math.sqrt(sum(v * v for v in u))
        u = tuple(v / un for v in u)
        v = (ax[1] * u[2] - ax[2] * u[1],
             ax[2] * u[0] - ax[0] * u[2],
             ax[0] * u[1] - ax[1] * u[0])
        n_rings = max(2, int(length / spacing))
        n_around = max(4, int(2 * math.pi * cap.r / spacing))
        for i in range(n_rings):
            t = (i + 0.5) / n_rings
            center = tuple(cap.a[k] + t * (cap.b[k] - cap.a[k]) for k in range(3))
            for j in range(n_around):
                ang = 2 * math.pi * j / n_around
                p = tuple(center[k] + cap.r * (math.cos(ang) * u[k] + math.sin(ang) * v[k])
                          for k in range(3))
                out.append([link, p[0], p[1], p[2], False])
    return out
