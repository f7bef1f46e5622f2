"""Reference models used by the experiments and the test-suite."""

from __future__ import annotations

import numpy as np

from .core.jumprate import JumpRate
from .core.kernels import ExpPolyKernel, GeneralKernel, NetworkKernel
from .core.model import ModelSpec, PeriodicBaseline
from .core.network import NetworkSpec
from .simulate import generate_sbm

SBM_SIZES = (4, 8)
SBM_PROBS = ((0.8, 0.1), (0.1, 0.7))
DEFAULT_NETWORK_SEED = 0


def sbm_network(seed: int = DEFAULT_NETWORK_SEED) -> NetworkSpec:
    """Twelve-node two-community SBM (blocks of 4 and 8 nodes)."""
    return generate_sbm(SBM_SIZES, SBM_PROBS, seed)


def seasonal_network_kernel(network: NetworkSpec, max_lag: int = 60) -> NetworkKernel:
    """Period-4 example kernel.

    Momentum ``alpha^(t)_k = 0.3 (8 [t = 0 mod 4] + 0.2 [t != 0 mod 4]) / k^2``
    for ``k <= 10`` and network part ``beta^(t)_k = 0.2 exp(-3k)(1 + cos(t pi / 2))``,
    truncated at ``max_lag`` (the network part is below ``1e-70`` at lag 60).
    """
    seasons = np.arange(1, 5)[:, None]
    k = np.arange(1, max_lag + 1)[None, :].astype(float)
    amp = np.where(seasons % 4 == 0, 8.0, 0.2)
    alpha = 0.3 * amp / k**2 * (k <= 10)
    beta = 0.2 * np.exp(-3 * k) * (1 + np.cos(seasons * np.pi / 2))
    return NetworkKernel(alpha, beta, network)


def seasonal_network_model(periodicity: str = "I", network: NetworkSpec | None = None,
                           max_lag: int = 60, mu: float = 0.4) -> ModelSpec:
    """Linear 12-node period-4 model built on :func:`seasonal_network_kernel`."""
    network = sbm_network() if network is None else network
    kern = seasonal_network_kernel(network, max_lag)
    return ModelSpec(network.d, 4, PeriodicBaseline.constant(mu, network.d, 4), kern,
                     JumpRate.identity(), periodicity)


WELLSPEC_A = np.array([1.0, 0.5, -1.5, -2.0])
WELLSPEC_B = np.array([1.5, 1.5, -4.0, -5.0])


def wellspec_coefficients(p: int = 7):
    """``(a, b)`` arrays of shape (p, 4) of the well-specified study."""
    v = np.arange(1, p + 1)[:, None]
    a = WELLSPEC_A[None, :] * 0.5 * (1 + np.cos(2 * np.pi * v / p))
    b = WELLSPEC_B[None, :] * np.sin(2 * np.pi * v / p)
    return a, b


def wellspec_model(network: NetworkSpec | None = None, p: int = 7, tau: float = 4.0) -> ModelSpec:
    """Type I period-7 network model with an exact 4-term exponential kernel.

    Baseline ``mu_v = 1`` for ``v <= 3`` and 0 otherwise, jump rate
    ``softplus + 0.01``.
    """
    network = sbm_network() if network is None else network
    a, b = wellspec_coefficients(p)
    kern = ExpPolyKernel.from_network(a, b, network, tau)
    mu = np.repeat((np.arange(1, p + 1) <= 3).astype(float)[:, None], network.d, axis=1)
    return ModelSpec(network.d, p, PeriodicBaseline(mu), kern,
                     JumpRate.softplus_offset(0.01), "I")


def heavy_tail_target(n_lags: int) -> np.ndarray:
    """``k^1.5 / (75 (1 + (0.2 k)^3.5))`` for ``k = 1..n_lags``."""
    k = np.arange(1, n_lags + 1, dtype=float)
    return k**1.5 / (75 * (1 + (0.2 * k) ** 3.5))


def heavy_tail_kernel(n_lags: int = 2000) -> GeneralKernel:
    """Univariate period-4 kernel active on seasons ``t = 2, 3 mod 4``."""
    base = heavy_tail_target(n_lags)
    on = np.array([0.0, 1.0, 1.0, 0.0])  # seasons 1..4
    return GeneralKernel.scalar(on[:, None] * base[None, :])


def heavy_tail_model(n_lags: int = 2000, mu: float = 1.0) -> ModelSpec:
    return ModelSpec(1, 4, PeriodicBaseline.constant(mu, 1, 4), heavy_tail_kernel(n_lags),
                     JumpRate.identity(), "I")
