"""Figure rendering for twdimer observable CSVs."""

__version__ = "0.1.0"

from .plots import MissingObservable, PlotSpec, plot_angle_landscape, plot_series
from .reader import AngleLandscape, SchemaError, Series, SeriesKey, read_angles, read_observables

__all__ = [
    "PlotSpec",
    "plot_series",
    "plot_angle_landscape",
    "MissingObservable",
    "SchemaError",
    "Series",
    "SeriesKey",
    "AngleLandscape",
    "read_observables",
    "read_angles",
    "__version__",
]
