"""Multi-grade deep learning: grade-by-grade residual fitting with spectral diagnostics."""
from . import datasets, engine, metrics, nn, spectrum
from .engine import GradeSpec, run_mgdl, run_sgdl
from .nn import MlpSpec, TrainConfig

__version__ = "0.1.0"

__all__ = ["datasets", "engine", "metrics", "nn", "spectrum", "GradeSpec", "MlpSpec",
           "TrainConfig", "run_mgdl", "run_sgdl", "__version__"]
