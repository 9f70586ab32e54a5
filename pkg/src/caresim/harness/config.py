"""Run configuration: everything needed to reproduce a run bit-for-bit."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..learn import PpoConfig, TrainerConfig


@dataclass
class RunConfig:
    env: str = "feeding"
    robot: str = "jaco"
    human: str = "static"              # static | active
    seed: int = 0
    steps: int = 200_000
    actors: int = 8
    workers: int = 1
    episodes: int = 100                # evaluation rollouts
    policy: str = ""                   # robot policy file, "zero", or "random"
    human_policy: str = ""             # human policy file for active mode
    omega: list[float] | None = None   # preference weight override
    alpha: list[int] | None = None     # preference activation override
    placement_samples: int = 100
    out: str = "runs/run"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @staticmethod
    def from_dict(doc: dict) -> "RunConfig":
        known = {f for f in RunConfig.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown run-config fields: {sorted(extra)}")
        return RunConfig(**doc)

    @staticmethod
    def load(path) -> "RunConfig":
        return RunConfig.from_dict(json.loads(Path(path).read_text()))

    @property
    def active_human(self) -> bool:
        return self.human == "active"

    def trainer_config(self) -> TrainerConfig:
        return TrainerConfig(total_steps=self.steps, actors=self.actors,
                             workers=self.workers, seed=self.seed,
                             ppo=PpoConfig())

    def make_env(self):
        from .. import envs
        from ..reward import PreferenceConfig, TASK_ACTIVATIONS

        if self.env == "reach2d":
            return envs.make("reach2d")
        alpha = tuple(self.alpha) if self.alpha else TASK_ACTIVATIONS[self.env]
        pref = PreferenceConfig(alpha=alpha,
                                omega=tuple(self.omega) if self.omega else
                                PreferenceConfig().omega)
        return envs.make(self.env, self.robot, self.active_human,
                         pref_config=pref,
                         placement_samples=self.placement_samples)
