"""
NODA — Neural Operator Data Assimilation

Spectral PDE simulators, a define-by-run autodiff engine, an FNO
predictor and an observer-style learned corrector, trained end-to-end
through recursive rollouts.

Public API:
  - generate_trajectories: KS / KdV / 2D Navier–Stokes ground truth
  - observe, sample_schedule: noisy measurements on a random schedule
  - init_params, predict_step, assimilate_step: the NODA model
  - rollout, rollout_from_truth: recursive estimation
  - train: windowed BPTT with Adam
  - save_checkpoint, load_model: NODM model files
  - read_trajectory, write_trajectory: trajectory container files

Usage:
    from noda import generate_trajectories, default_config, train, reference_config
    from noda import rollout_from_truth, observe, sample_schedule
"""

from noda.config import APP_VERSION

__version__ = APP_VERSION

from noda.errors import (
    NodaError,
    GridError,
    ShapeError,
    FormatError,
    NumericalError,
    BlowUpError,
    ZeroSignalError,
    MissingObservationError,
    TapeError,
)
from noda.dataset import (
    Equation,
    Trajectory,
    MeasurementOperator,
    ObservationSet,
    Schedule,
    observe,
    sample_schedule,
    split,
)
from noda.solvers.factory import default_config, generate_trajectories
from noda.trajectory_io import (
    read_trajectory,
    write_trajectory,
    load_dataset,
    save_dataset,
)
from noda.neural_operator import NodaParams, init_params, predict_step
from noda.assimilation import assimilate_step, correct_step, rollout, rollout_from_truth
from noda.training import train, reference_config, loss_J
from noda.checkpoint import save_checkpoint, load_checkpoint, load_model

__all__ = [
    "__version__",
    "NodaError", "GridError", "ShapeError", "FormatError", "NumericalError",
    "BlowUpError", "ZeroSignalError", "MissingObservationError", "TapeError",
    "Equation", "Trajectory", "MeasurementOperator", "ObservationSet", "Schedule",
    "observe", "sample_schedule", "split",
    "default_config", "generate_trajectories",
    "read_trajectory", "write_trajectory", "load_dataset", "save_dataset",
    "NodaParams", "init_params", "predict_step",
    "assimilate_step", "correct_step", "rollout", "rollout_from_truth",
    "train", "reference_config", "loss_J",
    "save_checkpoint", "load_checkpoint", "load_model",
]
