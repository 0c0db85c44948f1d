"""Training, evaluation, synthetic data and the command line."""

from .config import DESK_PROFILE, PAPER_PROFILE, TrainConfig, build_configs
from .evaluate import ConfigurationError, EvalOptions, evaluate_subtask
from .metrics import Metrics, compute_metrics
from .modelio import build_model, load_model, save_model
from .synth import generate_synthetic
from .train import Adam, TrainingDiverged, lr_schedule, train

__all__ = [
    "DESK_PROFILE", "PAPER_PROFILE", "TrainConfig", "build_configs", "ConfigurationError",
    "EvalOptions", "evaluate_subtask", "Metrics", "compute_metrics", "build_model", "load_model",
    "save_model", "generate_synthetic", "Adam", "TrainingDiverged", "lr_schedule", "train",
]
