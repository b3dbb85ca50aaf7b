"""Truncated-Wigner Monte Carlo for the pumped and damped Bose-Hubbard dimer."""

__version__ = "0.1.0"

from .model import DimerParams, Topology, WignerState, drift, noise_vector, sample_vacuum
from .engine import (
    MomentAccumulator,
    ShapeMismatch,
    SimGrid,
    TooManyDivergences,
    TrajectoryOutcome,
    integrate_trajectory,
    merge,
    run_ensemble,
)
from .statistics import (
    ObservableSeries,
    QuadratureSpec,
    SameWellCovariance,
    duan_simon,
    epr_product,
    kappa3,
    kappa4,
    mean_amplitude,
    optimize_epr,
    population,
    quad_covariance,
    quad_variance,
    quadrature_moment,
    steady_value,
)
from .config import ConfigError, RunConfig, load_config, parse_config

__all__ = [
    "DimerParams",
    "Topology",
    "WignerState",
    "drift",
    "noise_vector",
    "sample_vacuum",
    "SimGrid",
    "TrajectoryOutcome",
    "MomentAccumulator",
    "integrate_trajectory",
    "run_ensemble",
    "merge",
    "TooManyDivergences",
    "ShapeMismatch",
    "QuadratureSpec",
    "ObservableSeries",
    "SameWellCovariance",
    "quadrature_moment",
    "kappa3",
    "kappa4",
    "quad_variance",
    "quad_covariance",
    "epr_product",
    "optimize_epr",
    "duan_simon",
    "population",
    "mean_amplitude",
    "steady_value",
    "RunConfig",
    "ConfigError",
    "parse_config",
    "load_config",
    "__version__",
]
