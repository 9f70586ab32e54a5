from .nets import Adam, GaussianPolicy, Mlp, ObsNormalizer, PolicyFormatError, ValueNet
from .ppo import PpoConfig, RolloutBatch, UpdateError, compute_gae, ppo_update
from .trainer import (
    CO_OPTIMIZE,
    ROBOT_ONLY,
    EvalReport,
    TrainerConfig,
    TrainResult,
    evaluate,
    random_policy,
    train,
)
