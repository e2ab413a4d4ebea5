"""Estimate the density of a function's derivative from uniform samples of the function."""

from .errors import ConfigError, NumericError, WaveDensityError
from .functions import AnalyticFunction, SampledFunction, get_builtin, sample
from .spectrum import SpectrumEstimate, estimate_spectrum, tau_lower_bound

__all__ = [
    "AnalyticFunction",
    "ConfigError",
    "NumericError",
    "SampledFunction",
    "SpectrumEstimate",
    "WaveDensityError",
    "estimate_spectrum",
    "get_builtin",
    "sample",
    "tau_lower_bound",
]
