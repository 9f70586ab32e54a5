"""Environment registry: six assistive tasks x four robots x human modes."""

from __future__ import annotations

from ..reward import PreferenceConfig
from ..robots import ROBOT_NAMES
from .core import ActionError, AssistiveEnv, EnvSpec, ResetError, TASKS
from .reach2d import Reach2dEnv
from .tasks import TASK_CLASSES


def env_ids() -> list[str]:
    out = []
    for task in TASKS:
        for robot in ROBOT_NAMES:
            for mode in ("static", "active"):
                out.append(f"{task}/{robot}/{mode}")
    out.append("reach2d")
    return out


def make(task: str, robot: str = "jaco", active_human: bool = False,
         pref_config: PreferenceConfig | None = None,
         placement_samples: int = 100):
    """Construct an environment. `task` may also be a full env id."""
    if task == "reach2d":
        return Reach2dEnv()
    if "/" in task:
        parts = task.split("/")
        task = parts[0]
        robot = parts[1]
        if len(parts) > 2:
            active_human = parts[2] == "active"
    if task not in TASK_CLASSES:
        raise ValueError(f"unknown task {task!r}; known: {sorted(TASK_CLASSES)}")
    if robot not in ROBOT_NAMES:
        raise ValueError(f"unknown robot {robot!r}; known: {ROBOT_NAMES}")
    spec = EnvSpec(task=task, robot_name=robot, active_human=active_human,
                   placement_samples=placement_samples)
    return TASK_CLASSES[task](spec, pref_config)
