"""caresim: physics-lite simulation and RL stack for robot-assisted care."""

__version__ = "0.1.0"
