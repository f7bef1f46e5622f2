"""Log-likelihoods of a model specification on observed counts."""

from __future__ import annotations

import warnings

import numpy as np

from ..core.kernels import season_of
from ..core.model import CountSeries, ModelSpec
from ..engine import DirectConvolver
from ..errors import ConfigurationError
from .design import Design, _stack_history, exp_filter, poisson_loglik
from .layout import Layout


def direct_pre_intensities(data: CountSeries, spec: ModelSpec, history=None) -> np.ndarray:
    """Pre-intensities from the literal lag sums, ``O(T^2 d^2)``."""
    yall, n_hist = _stack_history(data, history)
    conv = DirectConvolver(spec.kernel, spec.periodicity, yall.shape[0])
    mu = spec.baseline_at(data.times)
    eta = np.empty((data.T, data.d))
    window = yall[None]
    for i, t in enumerate(data.times):
        j = n_hist + i
        n = min(j, conv.L)
        eta[i] = mu[i] + conv(int(t), window[:, j - n:j])[0]
    return eta


def markov_pre_intensities(data: CountSeries, spec: ModelSpec, history=None) -> np.ndarray:
    """Pre-intensities through the auxiliary processes, ``O(q T d^2)``."""
    kern = spec.kernel
    if not getattr(kern, "is_markov", False):
        raise ConfigurationError("Markov likelihood requires an exponential-polynomial kernel")
    yall, n_hist = _stack_history(data, history)
    times_all = np.arange(data.t0 - n_hist, data.t0 + data.T)
    decays = kern.decays
    eta = np.array(spec.baseline_at(data.times), dtype=float)
    if spec.periodicity == "I":
        g = kern.coefficients(data.times)
        for m, r in enumerate(decays):
            xi = exp_filter(yall, r)[n_hist:]
            eta += np.einsum("tij,tj->ti", g[:, m], xi)
    else:
        g = kern.coefficients(times_all)
        for m, r in enumerate(decays):
            pushed = np.einsum("tij,tj->ti", g[:, m], yall)
            eta += exp_filter(pushed, r)[n_hist:]
    return eta


def intensity_path(data: CountSeries, spec: ModelSpec, method: str = "auto", history=None):
    """Intensities ``lambda_t`` implied by ``spec`` along the observed counts."""
    if method == "auto":
        method = "markov" if getattr(spec.kernel, "is_markov", False) else "direct"
    if method == "markov":
        eta = markov_pre_intensities(data, spec, history)
    elif method == "direct":
        eta = direct_pre_intensities(data, spec, history)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    return spec.jump_rate(eta)


def _check(data: CountSeries, spec: ModelSpec):
    if data.d != spec.d:
        raise ConfigurationError("data width does not match the model dimension")
    spec.require_valid()


def log_likelihood(data: CountSeries, spec: ModelSpec, normalize: bool = False,
                   history=None) -> float:
    """``sum_t sum_i Y log(lambda) - lambda`` with lag sums evaluated directly.

    The empty history (or ``history``) precedes the first observation.  With
    ``normalize`` the value is divided by the number of time steps.
    """
    _check(data, spec)
    ll = poisson_loglik(data.counts, spec.jump_rate(direct_pre_intensities(data, spec, history)))
    return ll / data.T if normalize else ll


def markov_log_likelihood(data: CountSeries, spec: ModelSpec, normalize: bool = False,
                          history=None) -> float:
    """Same value as :func:`log_likelihood` for exponential kernels, in linear time."""
    _check(data, spec)
    ll = poisson_loglik(data.counts, spec.jump_rate(markov_pre_intensities(data, spec, history)))
    return ll / data.T if normalize else ll


def seasonal_log_likelihood(data: CountSeries, spec: ModelSpec, v: int, history=None) -> float:
    """Contribution ``L^(v)`` of the times of season ``v`` (Type I only).

    Under Type I periodicity these terms depend on the parameters of season
    ``v`` alone, and they add up to the full log-likelihood.
    """
    _check(data, spec)
    if spec.periodicity != "I":
        raise ConfigurationError("the seasonal factorisation holds for Type I periodicity only; "
                                 "use the joint log-likelihood")
    lam = intensity_path(data, spec, history=history)
    rows = season_of(data.times, spec.p) == ((v - 1) % spec.p) + 1
    return poisson_loglik(data.counts[rows], lam[rows])


def loglik_gradient(data: CountSeries, params, layout: Layout, history=None,
                    return_info: bool = False):
    """Score of the log-likelihood with respect to the layout's parameter vector.

    Args:
        data: Observed counts.
        params: Parameter vector or a :class:`ModelSpec` of the layout's family.
        layout: Parameter layout.
        history: Optional counts preceding the data.
        return_info: Also return a dict with a ``finite_difference`` flag.

    Jump rates without an analytic derivative use central differences and
    raise a ``RuntimeWarning``.
    """
    theta = layout.from_model(params) if isinstance(params, ModelSpec) else np.asarray(params, float)
    design = Design.build(layout, data, history)
    fd = not layout.jump_rate.differentiable
    if fd:
        warnings.warn("jump rate is not differentiable; using finite differences",
                      RuntimeWarning, stacklevel=2)
        grad = design.fd_gradient(theta)
    else:
        grad = design.gradient(theta)
    return (grad, {"finite_difference": fd}) if return_info else grad
