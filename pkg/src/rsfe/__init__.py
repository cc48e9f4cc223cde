"""Model-free free-energy (risk-sensitive) value estimation.

The core rule, ``v += 2 alpha sigma_beta(x - v) (x - v)``, has the Gaussian
free energy ``mu + beta / (2 rho)`` as its stable fixed point.
"""
from ._jit import USING_NUMBA
from .estimator import EstimatorState, LearningRateSchedule, MdState, fe_step, md_step, run_stream
from .math_core import (
    GaussianSpec,
    UniformSpec,
    beta_for_sigma,
    dilog,
    error_function,
    floored_sigmoid,
    gaussian_free_energy,
    logistic_sigmoid,
    uniform_free_energy,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "EstimatorState",
    "LearningRateSchedule",
    "MdState",
    "fe_step",
    "md_step",
    "run_stream",
    "GaussianSpec",
    "UniformSpec",
    "beta_for_sigma",
    "dilog",
    "error_function",
    "floored_sigmoid",
    "gaussian_free_energy",
    "logistic_sigmoid",
    "uniform_free_energy",
]
