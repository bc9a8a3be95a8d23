# NODA — Configuration and result schemas
from noda.schemas.config import ModelConfig, TrainConfig, load_train_config
from noda.schemas.experiment import ExperimentSpec, MetricRow, load_experiment_spec

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "load_train_config",
    "ExperimentSpec",
    "MetricRow",
    "load_experiment_spec",
]
