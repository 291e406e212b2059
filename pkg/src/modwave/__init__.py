"""Waves in spring-mass chains with progressive space-time modulation.

Monodromy and Floquet analysis of single oscillators and modulated chains,
weighted dispersion diagrams, time-domain simulation and the continuum
limit.
"""

__version__ = "0.1.0"

from .chain import ChainSpec, ModelError
from .integrators import DEFAULT_CONFIG, GL6, ConvergenceError, StepConfig
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "ChainSpec",
    "ConvergenceError",
    "DEFAULT_CONFIG",
    "GL6",
    "ModelError",
    "StepConfig",
    "__version__",
]
