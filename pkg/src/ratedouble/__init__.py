"""Kernel interpolation in Korobov, min-kernel and RBF native spaces, with a
harness for measuring how fast interpolation errors decay in n."""
from . import interp, korobov, measure, rbf, study
from .interp import PointSet, fit, korobov_kernel, min_kernel
from .korobov import KorobovSpace, SpectralFunction, spectral_norms
from .study import StudyConfig, doubling_verdict, fit_rate, run_sweep

__all__ = [
    "interp",
    "korobov",
    "measure",
    "rbf",
    "study",
    "PointSet",
    "fit",
    "korobov_kernel",
    "min_kernel",
    "KorobovSpace",
    "SpectralFunction",
    "spectral_norms",
    "StudyConfig",
    "run_sweep",
    "fit_rate",
    "doubling_verdict",
]

__version__ = "0.1.0"
