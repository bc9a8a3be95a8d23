"""
PDE Solvers — ground-truth trajectory generation.

All steppers share one interface so rollout and dataset generation
never branch on the equation:

  - KS   : ETDRK4, linear symbol k² − k⁴, nonlinearity −z z_x
  - KdV  : ETDRK4, linear symbol i k³,   nonlinearity −z z_x
  - NS   : Crank–Nicolson diffusion + Heun advection, vorticity form

Swap equations with `get_stepper(equation, config)` from
noda.solvers.factory.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from noda.dataset import Equation
from noda.errors import BlowUpError


class Stepper(ABC):
    """One inner substep of a time integrator on a fixed grid."""

    equation: Equation

    @abstractmethod
    def step(self, state: np.ndarray) -> np.ndarray:
        """Advance a real-space state by one inner substep."""

    @property
    @abstractmethod
    def inner_steps(self) -> int:
        """Substeps per recorded frame."""

    def advance_frame(self, state: np.ndarray, frame: int) -> np.ndarray:
        """Advance one recorded frame; raise BlowUpError naming `frame` on NaN/Inf."""
        for _ in range(self.inner_steps):
            state = self.step(state)
        if not np.all(np.isfinite(state)):
            raise BlowUpError(frame, self.equation.label)
        return state


from noda.solvers.grf import GrfSpec, sample_initial_condition  # noqa: E402
from noda.solvers.etdrk4 import (  # noqa: E402
    ETDRK4Stepper,
    KSConfig,
    KdVConfig,
    etdrk4_step,
)
from noda.solvers.navier_stokes import (  # noqa: E402
    CrankNicolsonStepper,
    NSConfig,
    ns_crank_nicolson_step,
    recover_velocity,
)
from noda.solvers.factory import (  # noqa: E402
    default_config,
    default_grf,
    generate_trajectories,
    get_stepper,
    rollout,
)

__all__ = [
    "Equation",
    "Stepper",
    "GrfSpec",
    "sample_initial_condition",
    "ETDRK4Stepper",
    "KSConfig",
    "KdVConfig",
    "etdrk4_step",
    "CrankNicolsonStepper",
    "NSConfig",
    "ns_crank_nicolson_step",
    "recover_velocity",
    "default_config",
    "default_grf",
    "generate_trajectories",
    "get_stepper",
    "rollout",
]
