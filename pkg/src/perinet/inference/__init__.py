"""Likelihoods, parameter layouts and maximum-likelihood estimation."""

from .design import Design, poisson_loglik
from .layout import Layout, network_layout, time_basis
from .likelihood import (direct_pre_intensities, intensity_path, log_likelihood,
                         loglik_gradient, markov_log_likelihood, markov_pre_intensities,
                         seasonal_log_likelihood)
from .mle import FitOptions, FitResult, estimation_errors, fit_mle, reconstruct_kernels

__all__ = [
    "Design", "poisson_loglik", "Layout", "network_layout", "time_basis",
    "direct_pre_intensities", "intensity_path", "log_likelihood", "loglik_gradient",
    "markov_log_likelihood", "markov_pre_intensities", "seasonal_log_likelihood",
    "FitOptions", "FitResult", "estimation_errors", "fit_mle", "reconstruct_kernels",
]
