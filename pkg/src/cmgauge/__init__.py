"""Calogero-Moser systems solved by projecting a free gauge field on a cylinder.

The exact solver (``solve``) reads positions, momenta and spins off the
eigen-decomposition of the monodromy of the gauge field.  An independent ODE
integrator (``integrate``) and a verification harness (``cmgauge.verify``)
cross-check it.
"""
from .exact import CollisionDetected, SolverSettings, Trajectory, solve
from .models import (
    CollisionSingularity,
    ConfigError,
    DeltaSites,
    PhaseState,
    PiecewiseExp,
    RationalSpin,
    SutherlandHyp,
    SutherlandTrig,
    SystemConfig,
    hamiltonian,
)
from .oracle import IntegratorSettings, integrate, integrate_field

__version__ = "0.1.0"

__all__ = [
    "CollisionDetected",
    "CollisionSingularity",
    "ConfigError",
    "DeltaSites",
    "IntegratorSettings",
    "PhaseState",
    "PiecewiseExp",
    "RationalSpin",
    "SolverSettings",
    "SutherlandHyp",
    "SutherlandTrig",
    "SystemConfig",
    "Trajectory",
    "hamiltonian",
    "integrate",
    "integrate_field",
    "solve",
]
