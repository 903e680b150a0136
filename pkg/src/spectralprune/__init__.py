"""Graph-spectral neuron redundancy scoring and structured pruning."""

from . import ablation, collect, config, data, experiment, graphs, nn, pruning, spectral
from .errors import ConfigError, DataIOError, DimensionError, NumericError

__all__ = [
    "ablation",
    "collect",
    "config",
    "data",
    "experiment",
    "graphs",
    "nn",
    "pruning",
    "spectral",
    "ConfigError",
    "DataIOError",
    "DimensionError",
    "NumericError",
]

__version__ = "0.1.0"
