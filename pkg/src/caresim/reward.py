"""Human-preference reward: seven cost terms combined into r_H(s).

The total per-step reward is r = r_R + r_H, where r_R is the task shaping
reward (owned by each environment) and

    r_H(s) = -alpha . (omega * [C_v, C_f, C_hf, C_fd, C_fdv, C_d, C_p])

alpha is a per-task {0,1} activation vector, omega the shipped weight
vector. Cost definitions (each zero in a quiescent, contact-free state):

    C_v    sum of end-effector speeds, |v_L| + |v_R| (m/s); single-arm
           robots count the one arm twice (v_L = v_R)
    C_f    total contact force on the person farther than 5 cm from the
           task target (N)
    C_hf   force near the target in excess of 10 N
    C_fd   count of particles newly spilled onto the person this step
    C_fdv  excess speed over 0.5 m/s summed over particles entering the
           mouth this step (m/s)
    C_d    axial force the garment ring applies to the arm (N)
    C_p    peak contact pressure in excess of 10 kPa, from the contact
           patch estimate (kPa)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

DEFAULT_WEIGHTS = (0.25, 0.01, 0.05, 1.0, 1.0, 0.01, 0.01)

HIGH_FORCE_THRESHOLD = 10.0     # N
NEAR_TARGET_RADIUS = 0.05       # m
INTAKE_SPEED_THRESHOLD = 0.5    # m/s
PRESSURE_THRESHOLD_KPA = 10.0   # kPa

COST_NAMES = ("velocity", "misdirected_force", "high_force",
              "food_drop", "fast_intake", "garment_force", "pressure")

# which cost terms each task enables (alpha vectors)
TASK_ACTIVATIONS = {
    "scratch_itch":     (1, 1, 1, 0, 0, 0, 0),
    "bed_bathing":      (1, 1, 1, 0, 0, 0, 1),
    "drinking":         (1, 1, 1, 1, 1, 0, 0),
    "feeding":          (1, 1, 1, 1, 1, 0, 0),
    "dressing":         (1, 1, 1, 0, 0, 1, 0),
    "arm_manipulation": (1, 1, 1, 0, 0, 0, 1),
}


@dataclass(frozen=True)
class PreferenceConfig:
    """Activation vector alpha and weight vector omega."""

    alpha: tuple = (1, 1, 1, 1, 1, 1, 1)
    omega: tuple = DEFAULT_WEIGHTS

    def __post_init__(self):
        if len(self.alpha) != 7 or len(self.omega) != 7:
            raise ValueError("alpha and omega must have length 7")
        if any(a not in (0, 1) for a in self.alpha):
            raise ValueError("alpha entries must be 0 or 1")
        if any(w < 0 for w in self.omega):
            raise ValueError("omega entries must be non-negative")

    @staticmethod
    def for_task(task: str, omega=None) -> "PreferenceConfig":
        return PreferenceConfig(alpha=TASK_ACTIVATIONS[task],
                                omega=tuple(omega) if omega else DEFAULT_WEIGHTS)


@dataclass(frozen=True)
class PreferenceCosts:
    velocity: float = 0.0
    misdirected_force: float = 0.0
    high_force: float = 0.0
    food_drop: float = 0.0
    fast_intake: float = 0.0
    garment_force: float = 0.0
    pressure: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"cost {f.name} must be non-negative")

    def as_tuple(self) -> tuple:
        return (self.velocity, self.misdirected_force, self.high_force,
                self.food_drop, self.fast_intake, self.garment_force,
                self.pressure)


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-step reward decomposition: r = r_task + r_preference exactly."""

    r_task: float
    costs: PreferenceCosts
    config: PreferenceConfig

    @property
    def r_preference(self) -> float:
        return human_preference_reward(self.costs, self.config)

    @property
    def r(self) -> float:
        return self.r_task + self.r_preference


def human_preference_reward(costs: PreferenceCosts, config: PreferenceConfig) -> float:
    """r_H = -sum_i alpha_i * omega_i * C_i; always <= 0."""
    c = costs.as_tuple()
    if len(c) != 7:
        raise ValueError("expected 7 cost terms")
    return -sum(a * w * v for a, w, v in zip(config.alpha, config.omega, c))


def total_reward(r_task: float, r_preference: float) -> float:
    if not (math.isfinite(r_task) and math.isfinite(r_preference)):
        raise ValueError("reward terms must be finite")
    return r_task + r_preference


def velocity_cost(v_left, v_right) -> float:
    """|v_L| + |v_R|; pass the same vector twice for single-arm robots."""
    nl = math.sqrt(sum(v * v for v in v_left))
    nr = math.sqrt(sum(v * v for v in v_right))
    return nl + nr


def force_costs(contacts_on_person, target_point) -> tuple[float, float]:
    """(C_f, C_hf) from contact reports against the human.

    Forces within NEAR_TARGET_RADIUS of the target are "directed": only
    their excess over the 10 N threshold costs (C_hf). Everything farther
    away is misdirected force (C_f).
    """
    far_total = 0.0
    near_total = 0.0
    for c in contacts_on_person:
        dx = c.point[0] - target_point[0]
        dy = c.point[1] - target_point[1]
        dz = c.point[2] - target_point[2]
        if math.sqrt(dx * dx + dy * dy + dz * dz) <= NEAR_TARGET_RADIUS:
            near_total += c.force
        else:
            far_total += c.force
    return far_total, max(0.0, near_total - HIGH_FORCE_THRESHOLD)


def pressure_cost(contacts_on_person) -> float:
    """Peak pressure (kPa) over the threshold, using patch area estimates."""
    peak = 0.0
    for c in contacts_on_person:
        if c.area > 1e-9:
            peak = max(peak, c.force / c.area / 1000.0)
    return max(0.0, peak - PRESSURE_THRESHOLD_KPA)


def intake_speed_cost(capture_speeds) -> float:
    """Sum of excess speed over 0.5 m/s for particles entering the mouth."""
    return sum(max(0.0, s - INTAKE_SPEED_THRESHOLD) for s in capture_speeds)
