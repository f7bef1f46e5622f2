"""Periodic multivariate Poisson autoregressions on networks.

Subpackages and modules:

* :mod:`perinet.core`: jump rates, networks, kernels and model specifications
* :mod:`perinet.simulate`: direct and Markov simulation, coupling, SBM graphs
* :mod:`perinet.stability`: spectral-radius stability checks and decay rates
* :mod:`perinet.kernelapprox`: exponential-polynomial kernel approximation
* :mod:`perinet.inference`: likelihoods and maximum-likelihood estimation
* :mod:`perinet.forecast`: forecasts, RMSE, Diebold-Mariano, BH and BIC
* :mod:`perinet.io`, :mod:`perinet.experiments`, :mod:`perinet.cli`: files,
  reproduction presets and the command-line tool
"""

from .core import (CountSeries, ExpPolyKernel, GeneralKernel, JumpRate, ModelSpec,
                   NetworkKernel, NetworkSpec, PeriodicBaseline, TrigBaseline,
                   TrigExpPolyKernel, load_model, save_model, validate_model)
from .errors import (ConfigurationError, DegenerateLossDifferential, NumericError, ParseError,
                     PerinetError, PreconditionError)
from .forecast import (ForecastReport, bh_adjust, bic, compare_reports, diebold_mariano,
                       forecast, rmse, rolling_forecast)
from .inference import (FitOptions, FitResult, Layout, fit_mle, log_likelihood,
                        loglik_gradient, markov_log_likelihood, network_layout,
                        seasonal_log_likelihood)
from .kernelapprox import approximate_kernel, l1_refine, l2_project
from .simulate import (SimulationConfig, coupling_distance, empirical_moments, generate_sbm,
                       simulate_coupled, simulate_direct, simulate_markov)
from .stability import (check_global, check_periodic, classify_decay, convolution_bound,
                        domination_sequence, spectral_radius)

__version__ = "0.1.0"

__all__ = [
    "CountSeries", "ExpPolyKernel", "GeneralKernel", "JumpRate", "ModelSpec", "NetworkKernel",
    "NetworkSpec", "PeriodicBaseline", "TrigBaseline", "TrigExpPolyKernel", "load_model",
    "save_model", "validate_model", "ConfigurationError", "DegenerateLossDifferential",
    "NumericError", "ParseError", "PerinetError", "PreconditionError", "ForecastReport",
    "bh_adjust", "bic", "compare_reports", "diebold_mariano", "forecast", "rmse",
    "rolling_forecast", "FitOptions", "FitResult", "Layout", "fit_mle", "log_likelihood",
    "loglik_gradient", "markov_log_likelihood", "network_layout", "seasonal_log_likelihood",
    "approximate_kernel", "l1_refine", "l2_project", "SimulationConfig", "coupling_distance",
    "empirical_moments", "generate_sbm", "simulate_coupled", "simulate_direct",
    "simulate_markov", "check_global", "check_periodic", "classify_decay",
    "convolution_bound", "domination_sequence", "spectral_radius", "__version__",
]
