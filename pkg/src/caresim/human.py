"""Parametric human model, impairment profiles, and pose-validity rules.

The human is generated programmatically from an anthropometry config
(male/female link lengths, masses, shared joint limits). It has exactly 40
controllable joints: waist (2), head (4), two arms (10 each), two legs
(7 each). Arm chains are laid out so the limb hangs along -z at q = 0 and
every joint has l_min <= 0 <= l_max, which is what the range-of-motion
scaling assumes.

Impairments:
    tremor       oscillating offset q_t = q_bar + eps * (-1)^t on the
                 controlled chain, eps ~ U(0, 20 deg)
    weakness     tau_max scaled by beta ~ U(0.25, 1) on all human joints
    limited_rom  l_min, l_max scaled by gamma ~ U(0.5, 1)

Pose validity: a pluggable arm predicate C(q_arm) -> bool. Invalid new
poses roll the arm back to the previous accepted configuration. The
default predicate is a conservative analytic stand-in (box limits plus a
high-elevation/high-internal-rotation exclusion); a learned model can be
swapped in from a weights file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .bodies import DATA_DIR, BodyLoadError
from .geom import Capsule, IDENTITY, QUAT_IDENTITY
from .kinematics import ArticulatedBody, JointSpec
from .rng import SeededRng

TREMOR = "tremor"
WEAKNESS = "weakness"
LIMITED_ROM = "limited_rom"
LIMITATION_KINDS = (TREMOR, WEAKNESS, LIMITED_ROM)

TREMOR_MAX = math.radians(20.0)

ANTHROPOMETRY_FILE = DATA_DIR / "human" / "anthropometry.json"

# q-vector layout of one arm chain (10 joints, shoulder to fingers)
ARM_JOINT_ORDER = (
    "clavicle_raise", "clavicle_forward",
    "shoulder_abduct", "shoulder_flex", "shoulder_rotate",
    "elbow_flex", "forearm_pronate",
    "wrist_flex", "wrist_deviate", "hand_curl",
)
HEAD_JOINT_ORDER = ("neck_yaw", "neck_pitch", "neck_roll", "head_nod")


@dataclass
class LimitationProfile:
    """One sampled impairment. Exactly one kind is active per human."""

    kind: str
    epsilon: float = 0.0   # tremor amplitude, radians
    beta: float = 1.0      # torque scale
    gamma: float = 1.0     # joint-limit scale

    def __post_init__(self):
        if self.kind not in LIMITATION_KINDS:
            raise ValueError(f"unknown limitation kind {self.kind!r}")

    @staticmethod
    def sample(rng: SeededRng) -> "LimitationProfile":
        kind = LIMITATION_KINDS[rng.randint(3)]
        if kind == TREMOR:
            return LimitationProfile(TREMOR, epsilon=rng.uniform(0.0, TREMOR_MAX))
        if kind == WEAKNESS:
            return LimitationProfile(WEAKNESS, beta=rng.uniform(0.25, 1.0))
        return LimitationProfile(LIMITED_ROM, gamma=rng.uniform(0.5, 1.0))


def tremor_offset(q_bar, epsilon: float, t: int):
    """Oscillating tremor target: q_bar + eps on even steps, - eps on odd."""
    if t < 0:
        raise ValueError("step index must be non-negative")
    sign = 1.0 if t % 2 == 0 else -1.0
    if isinstance(q_bar, (int, float)):
        return q_bar + epsilon * sign
    return [v + epsilon * sign for v in q_bar]


def enforce_pose_validity(q_prev, q_new, predicate) -> list[float]:
    """Rollback rule: keep q_new only if the predicate accepts it."""
    return list(q_new) if predicate(q_new) else list(q_prev)


def default_pose_predicate(q_arm) -> bool:
    """Conservative analytic arm-validity rule.

    Rejects the combination of high shoulder elevation (> 120 deg) with
    strong internal rotation (> 60 deg), which pose-independent box limits
    would allow. Stand-in for a learned validity model; swap via
    load_pose_predicate.
    """
    if len(q_arm) != len(ARM_JOINT_ORDER):
        raise ValueError(f"arm predicate expects {len(ARM_JOINT_ORDER)} joints")
    elevation = q_arm[2]
    internal_rot = q_arm[4]
    if elevation > math.radians(120.0) and internal_rot > math.radians(60.0):
        return False
    return True


def load_pose_predicate(path):
    """Load a learned arm-validity model (policy-container MLP, 1 output).

    The model's raw output is thresholded at zero: C(q) = (f(q) > 0).
    """
    from .learn.nets import Mlp

    net = Mlp.load(path)

    def predicate(q_arm) -> bool:
        if len(q_arm) != net.input_dim:
            raise ValueError(f"predicate model expects {net.input_dim} inputs")
        return float(net.forward([float(v) for v in q_arm])[0]) > 0.0

    return predicate


class HumanModel:
    """Articulated human plus impairment state and named chains/sites."""

    def __init__(self, body: ArticulatedBody, sex: str, anthro: dict):
        self.body = body
        self.sex = sex
        self.anthro = anthro
        self.limitation: LimitationProfile | None = None
        self.chains: dict[str, list[int]] = {}     # chain name -> q indices
        self.sites: dict[str, int] = {}            # site name -> link index
        self.self_collision_pairs: list[tuple[int, int]] = []

    @property
    def controllable_joint_count(self) -> int:
        return self.body.dof

    def chain_q(self, chain: str) -> list[float]:
        return [self.body.q[i] for i in self.chains[chain]]

    def set_chain_q(self, chain: str, values) -> None:
        for i, v in zip(self.chains[chain], values):
            lo = self.body.joints[self._joint_link(i)].l_min
            hi = self.body.joints[self._joint_link(i)].l_max
            self.body.q[i] = min(max(float(v), lo), hi)

    def _joint_link(self, q_index: int) -> int:
        return self._q_to_link[q_index]

    def finalize(self):
        self._q_to_link = {}
        for link in range(self.body.n_links):
            qi = self.body.q_index(link)
            if qi >= 0:
                self._q_to_link[qi] = link
        return self

    def chain_limits(self, chain: str):
        lo, hi = [], []
        for qi in self.chains[chain]:
            j = self.body.joints[self._joint_link(qi)]
            lo.append(j.l_min)
            hi.append(j.l_max)
        return lo, hi


def _load_anthropometry(config_path=None) -> dict:
    path = Path(config_path) if config_path else ANTHROPOMETRY_FILE
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BodyLoadError(f"cannot read anthropometry config {path}: {exc}") from exc
    for key in ("male", "female", "joint_limits", "strength", "speed"):
        if key not in doc:
            raise BodyLoadError(f"anthropometry config missing {key!r}")
    return doc


def generate_human(sex: str, rng: SeededRng | None = None,
                   config_path=None) -> HumanModel:
    """Build a human model for the given sex from the anthropometry config.

    Deterministic: the same sex and config always produce the same model
    (the rng argument is accepted for interface symmetry with samplers).
    """
    if sex not in ("male", "female"):
        raise ValueError(f"sex must be 'male' or 'female', got {sex!r}")
    doc = _load_anthropometry(config_path)
    L = doc[sex]["lengths"]
    R = doc[sex]["radii"]
    M = doc[sex]["masses"]
    lim = doc["joint_limits"]
    tq = doc["strength"]
    spd = doc["speed"]

    b = ArticulatedBody(f"human_{sex}")

    def rev(name, kind, axis, speed_key):
        lo, hi = lim[kind]
        return JointSpec(name, axis, "revolute", lo, hi, tq[kind], spd[speed_key])

    # pelvis root: capsule across the hips (y axis)
    pelvis = b.add_link(
        "pelvis", -1, IDENTITY,
        capsule=Capsule((0.0, -L["pelvis_halfwidth"], 0.0),
                        (0.0, L["pelvis_halfwidth"], 0.0), R["torso"] * 0.85),
        mass=M["pelvis"], com=(0.0, 0.0, 0.0))

    # waist (2) and torso
    wb = b.add_link("waist_bend", pelvis, (QUAT_IDENTITY, (0.0, 0.0, 0.1)),
                    rev("waist_bend", "waist_bend", (0.0, 1.0, 0.0), "waist"))
    torso_len = L["torso"] - 0.1
    torso = b.add_link(
        "torso", wb, IDENTITY,
        rev("waist_twist", "waist_twist", (0.0, 0.0, 1.0), "waist"),
        capsule=Capsule((0.0, 0.0, 0.05), (0.0, 0.0, torso_len), R["torso"]),
        mass=M["torso"], com=(0.0, 0.0, torso_len * 0.55))

    # head chain (4)
    ny = b.add_link("neck_yaw", torso, (QUAT_IDENTITY, (0.0, 0.0, torso_len + 0.02)),
                    rev("neck_yaw", "neck_yaw", (0.0, 0.0, 1.0), "head"))
    np_ = b.add_link("neck_pitch", ny, IDENTITY,
                     rev("neck_pitch", "neck_pitch", (0.0, 1.0, 0.0), "head"))
    nr = b.add_link("neck", np_, IDENTITY,
                    rev("neck_roll", "neck_roll", (1.0, 0.0, 0.0), "head"),
                    capsule=Capsule((0.0, 0.0, 0.0), (0.0, 0.0, L["neck"]), R["neck"]),
                    mass=M["neck"], com=(0.0, 0.0, L["neck"] / 2))
    head = b.add_link("head", nr, (QUAT_IDENTITY, (0.0, 0.0, L["neck"])),
                      rev("head_nod", "head_nod", (0.0, 1.0, 0.0), "head"),
                      capsule=Capsule((0.0, 0.0, 0.03), (0.0, 0.0, 0.03 + L["head"] * 0.6),
                                      R["head"]),
                      mass=M["head"], com=(0.0, 0.0, 0.08))
    mouth = b.add_link("mouth", head,
                       (QUAT_IDENTITY, (L["mouth_forward"], 0.0, 0.06 - L["mouth_down"])))

    def build_arm(side: str, mirror: float):
        """mirror = -1 for the right arm (at -y), +1 for the left."""
        p = side + "_"
        shoulder_y = mirror * L["shoulder_halfwidth"]
        cr = b.add_link(p + "clavicle_raise", torso,
                        (QUAT_IDENTITY, (0.0, mirror * 0.05, torso_len - 0.02)),
                        rev(p + "clavicle_raise", "clavicle_raise",
                            (mirror * 1.0, 0.0, 0.0), "arm"))
        cf = b.add_link(p + "clavicle_forward", cr, IDENTITY,
                        rev(p + "clavicle_forward", "clavicle_forward",
                            (0.0, 0.0, mirror * 1.0), "arm"))
        sa = b.add_link(p + "shoulder_abduct", cf,
                        (QUAT_IDENTITY, (0.0, shoulder_y - mirror * 0.05, 0.0)),
                        rev(p + "shoulder_abduct", "shoulder_abduct",
                            (mirror * 1.0, 0.0, 0.0), "arm"))
        sf = b.add_link(p + "shoulder_flex", sa, IDENTITY,
                        rev(p + "shoulder_flex", "shoulder_flex",
                            (0.0, -1.0, 0.0), "arm"))
        ua = b.add_link(p + "upper_arm", sf, IDENTITY,
                        rev(p + "shoulder_rotate", "shoulder_rotate",
                            (0.0, 0.0, -mirror * 1.0), "arm"),
                        capsule=Capsule((0.0, 0.0, -0.03), (0.0, 0.0, -L["upper_arm"]),
                                        R["upper_arm"]),
                        mass=M["upper_arm"], com=(0.0, 0.0, -L["upper_arm"] / 2))
        fa = b.add_link(p + "forearm", ua, (QUAT_IDENTITY, (0.0, 0.0, -L["upper_arm"])),
                        rev(p + "elbow_flex", "elbow_flex", (0.0, -1.0, 0.0), "arm"),
                        capsule=Capsule((0.0, 0.0, 0.0), (0.0, 0.0, -L["forearm"]),
                                        R["forearm"]),
                        mass=M["forearm"], com=(0.0, 0.0, -L["forearm"] / 2))
        pr = b.add_link(p + "forearm_roll", fa, (QUAT_IDENTITY, (0.0, 0.0, -L["forearm"])),
                        rev(p + "forearm_pronate", "forearm_pronate",
                            (0.0, 0.0, -mirror * 1.0), "arm"))
        wf = b.add_link(p + "wrist", pr, IDENTITY,
                        rev(p + "wrist_flex", "wrist_flex", (0.0, -1.0, 0.0), "arm"))
        hand = b.add_link(p + "hand", wf, IDENTITY,
                          rev(p + "wrist_deviate", "wrist_deviate",
                              (mirror * 1.0, 0.0, 0.0), "arm"),
                          capsule=Capsule((0.0, 0.0, 0.0), (0.0, 0.0, -L["hand"] * 0.55),
                                          R["hand"]),
                          mass=M["hand"], com=(0.0, 0.0, -L["hand"] * 0.3))
        fingers = b.add_link(p + "fingers", hand,
                             (QUAT_IDENTITY, (0.0, 0.0, -L["hand"] * 0.55)),
                             rev(p + "hand_curl", "hand_curl", (0.0, -1.0, 0.0), "arm"),
                             capsule=Capsule((0.0, 0.0, 0.0), (0.0, 0.0, -L["hand"] * 0.4),
                                             R["hand"] * 0.9),
                             mass=0.1, com=(0.0, 0.0, -L["hand"] * 0.2))
        tip = b.add_link(p + "hand_tip", fingers,
                         (QUAT_IDENTITY, (0.0, 0.0, -L["hand"] * 0.45)))
        return {"clavicle": cr, "upper_arm": ua, "forearm": fa, "hand": hand,
                "fingers": fingers, "tip": tip, "wrist_link": wf}

    right = build_arm("right", -1.0)
    left = build_arm("left", 1.0)

    def build_leg(side: str, mirror: float):
        p = side + "_"
        hf = b.add_link(p + "hip_flex", pelvis,
                        (QUAT_IDENTITY, (0.0, mirror * L["pelvis_halfwidth"], -0.02)),
                        rev(p + "hip_flex", "hip_flex", (0.0, -1.0, 0.0), "leg"))
        ha = b.add_link(p + "hip_abduct", hf, IDENTITY,
                        rev(p + "hip_abduct", "hip_abduct", (mirror * 1.0, 0.0, 0.0), "leg"))
        thigh = b.add_link(p + "thigh", ha, IDENTITY,
                           rev(p + "hip_rotate", "hip_rotate", (0.0, 0.0, -mirror * 1.0), "leg"),
                           capsule=Capsule((0.0, 0.0, -0.05), (0.0, 0.0, -L["thigh"]),
                                           R["thigh"]),
                           mass=M["thigh"], com=(0.0, 0.0, -L["thigh"] / 2))
        shank = b.add_link(p + "shank", thigh, (QUAT_IDENTITY, (0.0, 0.0, -L["thigh"])),
                           rev(p + "knee_flex", "knee_flex", (0.0, 1.0, 0.0), "leg"),
                           capsule=Capsule((0.0, 0.0, 0.0), (0.0, 0.0, -L["shank"]),
                                           R["shank"]),
                           mass=M["shank"], com=(0.0, 0.0, -L["shank"] / 2))
        ap = b.add_link(p + "ankle_pitch", shank, (QUAT_IDENTITY, (0.0, 0.0, -L["shank"])),
                        rev(p + "ankle_pitch", "ankle_pitch", (0.0, -1.0, 0.0), "leg"))
        foot = b.add_link(p + "foot", ap, IDENTITY,
                          rev(p + "ankle_roll", "ankle_roll", (mirror * 1.0, 0.0, 0.0), "leg"),
                          capsule=Capsule((0.0, 0.0, -0.02), (L["foot"] * 0.8, 0.0, -0.02),
                                          R["foot"]),
                          mass=M["foot"], com=(L["foot"] * 0.3, 0.0, -0.02))
        toe = b.add_link(p + "toe", foot, (QUAT_IDENTITY, (L["foot"] * 0.8, 0.0, -0.02)),
                         rev(p + "toe_flex", "toe_flex", (0.0, -1.0, 0.0), "leg"))
        return {"thigh": thigh, "shank": shank, "foot": foot, "toe": toe}

    rleg = build_leg("right", -1.0)
    lleg = build_leg("left", 1.0)

    model = HumanModel(b, sex, doc[sex])
    if b.dof != 40:
        raise BodyLoadError(f"human generated with {b.dof} controllable joints, expected 40")

    def chain_q_indices(link_names):
        return [b.q_index(b.link_index(n)) for n in link_names]

    model.chains = {
        "torso": chain_q_indices(["waist_bend", "torso"]),
        "head": chain_q_indices(["neck_yaw", "neck_pitch", "neck", "head"]),
        "right_arm": chain_q_indices(
            ["right_clavicle_raise", "right_clavicle_forward", "right_shoulder_abduct",
             "right_shoulder_flex", "right_upper_arm", "right_forearm",
             "right_forearm_roll", "right_wrist", "right_hand", "right_fingers"]),
        "left_arm": chain_q_indices(
            ["left_clavicle_raise", "left_clavicle_forward", "left_shoulder_abduct",
             "left_shoulder_flex", "left_upper_arm", "left_forearm",
             "left_forearm_roll", "left_wrist", "left_hand", "left_fingers"]),
        "right_leg": chain_q_indices(
            ["right_hip_flex", "right_hip_abduct", "right_thigh", "right_shank",
             "right_ankle_pitch", "right_foot", "right_toe"]),
        "left_leg": chain_q_indices(
            ["left_hip_flex", "left_hip_abduct", "left_thigh", "left_shank",
             "left_ankle_pitch", "left_foot", "left_toe"]),
    }
    model.sites = {
        "head": head, "mouth": mouth, "torso": torso, "pelvis": pelvis,
        "right_upper_arm": right["upper_arm"], "right_forearm": right["forearm"],
        "right_hand": right["hand"], "right_fingers": right["fingers"],
        "right_hand_tip": right["tip"], "right_wrist": right["wrist_link"],
        "left_upper_arm": left["upper_arm"], "left_forearm": left["forearm"],
        "left_hand": left["hand"], "left_fingers": left["fingers"],
        "left_hand_tip": left["tip"], "left_wrist": left["wrist_link"],
        "right_thigh": rleg["thigh"], "left_thigh": lleg["thigh"],
        "right_shank": rleg["shank"], "left_shank": lleg["shank"],
    }

    # self-collision: limbs against trunk and head
    trunk = [torso, pelvis, head]
    for arm in (right, left):
        for limb_link in (arm["upper_arm"], arm["forearm"], arm["hand"], arm["fingers"]):
            for t in trunk:
                model.self_collision_pairs.append((limb_link, t))
        for t in (rleg["thigh"], lleg["thigh"]):
            model.self_collision_pairs.append((arm["forearm"], t))
            model.self_collision_pairs.append((arm["hand"], t))

    return model.finalize()


def apply_limitation(model: HumanModel, profile: LimitationProfile) -> HumanModel:
    """Apply one impairment to the model in place and return it.

    weakness scales every joint's torque cap by beta; limited_rom scales
    both pose-independent limits by gamma (they shrink toward zero since
    l_min <= 0 <= l_max); tremor only records its amplitude for runtime
    target offsetting.
    """
    model.limitation = profile
    if profile.kind == WEAKNESS:
        model.body.joints = [
            JointSpec(j.name, j.axis, j.jtype, j.l_min, j.l_max,
                      j.tau_max * profile.beta, j.v_max) if j.jtype != "fixed" else j
            for j in model.body.joints
        ]
    elif profile.kind == LIMITED_ROM:
        model.body.joints = [
            JointSpec(j.name, j.axis, j.jtype, j.l_min * profile.gamma,
                      j.l_max * profile.gamma, j.tau_max, j.v_max)
            if j.jtype != "fixed" else j
            for j in model.body.joints
        ]
        model.body.q = model.body.clamp_q(model.body.q)
    return model
