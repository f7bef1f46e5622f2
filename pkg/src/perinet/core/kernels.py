"""Periodic families of lag kernels ``phi^(v)_k`` (d x d matrices).

Seasons are numbered ``1..p`` and time ``t`` belongs to season
``((t - 1) mod p) + 1``.  All arrays indexed by season store season ``v`` at
position ``v - 1``; any integer passed as a season is reduced modulo ``p``, so
``0`` and ``p`` denote the same season.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, PreconditionError
from .network import NetworkSpec

FAMILIES = ("odd", "all")


def season_of(t, p: int):
    """Season in ``1..p`` of the (array of) time index ``t``."""
    return (np.asarray(t) - 1) % p + 1


def season_slot(t, p: int):
    """Zero-based storage slot of time or season ``t``."""
    return (np.asarray(t, dtype=np.int64) - 1) % p


def decay_rates(q: int, tau: float, family: str = "odd") -> np.ndarray:
    """Exponents ``c_m`` of the basis ``exp(-c_m k)``, ``m = 1..q``."""
    if tau <= 0:
        raise ConfigurationError("characteristic time tau must be positive")
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown exponent family {family!r}")
    m = np.arange(1, q + 1, dtype=float)
    return (2 * m + 1) / tau if family == "odd" else m / tau


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class PeriodicKernel:
    """Common interface of every kernel variant."""

    kind: str = ""
    d: int
    period: float
    max_lag: int | None = None
    is_markov = False

    @property
    def integer_period(self) -> bool:
        return float(self.period).is_integer()

    @property
    def p(self) -> int:
        if not self.integer_period:
            raise ConfigurationError("kernel has a non-integer period")
        return int(self.period)

    def matrices(self, times, lags) -> np.ndarray:
        """``phi^(t)_lag`` for broadcast arrays of times and lags, shape (n, d, d)."""
        raise NotImplementedError

    def table(self, n_lags: int) -> np.ndarray:
        """Dense ``(p, n_lags, d, d)`` array of ``phi^(v)_k`` for ``k = 1..n_lags``."""
        seasons = np.arange(1, self.p + 1)
        lags = np.arange(1, n_lags + 1)
        s, k = np.meshgrid(seasons, lags, indexing="ij")
        return self.matrices(s.ravel(), k.ravel()).reshape(self.p, n_lags, self.d, self.d)

    def support(self, n_lags: int) -> int:
        """Number of lags among the first ``n_lags`` that can be nonzero."""
        return n_lags if self.max_lag is None else min(n_lags, self.max_lag)

    def l1_norms(self) -> np.ndarray:
        """Per-season entrywise sums ``sum_k |phi^(v)_k|``, shape (p, d, d)."""
        return np.abs(self.table(self.max_lag)).sum(axis=1)

    def truncated(self, n_lags: int) -> "GeneralKernel":
        return GeneralKernel(self.table(n_lags))

    def _check_lags(self, lags):
        lags = np.asarray(lags)
        if np.any(lags < 1):
            raise PreconditionError("lags start at 1")
        return lags


@dataclass(frozen=True, eq=False)
class GeneralKernel(PeriodicKernel):
    """Dense kernel truncated at ``max_lag``: ``phi`` has shape (p, K, d, d)."""

    phi: np.ndarray
    kind = "general"

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 4 or phi.shape[2] != phi.shape[3]:
            raise ConfigurationError("general kernel must have shape (p, K, d, d)")
        if phi.shape[0] < 1 or phi.shape[1] < 1:
            raise ConfigurationError("general kernel needs at least one season and one lag")
        object.__setattr__(self, "phi", _frozen(phi))

    @classmethod
    def scalar(cls, values, p: int = 1) -> "GeneralKernel":
        """Univariate kernel from per-season lag sequences, shape (p, K) or (K,)."""
        v = np.asarray(values, dtype=float)
        v = np.broadcast_to(v, (p, v.shape[-1])) if v.ndim == 1 else v
        return cls(v[:, :, None, None])

    @classmethod
    def zero(cls, d: int, p: int = 1, max_lag: int = 1) -> "GeneralKernel":
        return cls(np.zeros((p, max_lag, d, d)))

    @property
    def d(self):
        return self.phi.shape[2]

    @property
    def period(self):
        return self.phi.shape[0]

    @property
    def max_lag(self):
        return self.phi.shape[1]

    def matrices(self, times, lags):
        times, lags = np.broadcast_arrays(np.asarray(times, dtype=np.int64),
                                          self._check_lags(lags))
        times, lags = times.ravel(), lags.ravel()
        out = np.zeros((lags.size, self.d, self.d))
        ok = lags <= self.max_lag
        out[ok] = self.phi[season_slot(times[ok], self.period), lags[ok] - 1]
        return out

    def table(self, n_lags):
        out = np.zeros((self.period, n_lags, self.d, self.d))
        n = min(n_lags, self.max_lag)
        out[:, :n] = self.phi[:, :n]
        return out


@dataclass(frozen=True, eq=False)
class NetworkKernel(PeriodicKernel):
    """``phi^(v)_k = alpha[v, k] I + beta[v, k] W`` with (p, K) lag sequences."""

    alpha: np.ndarray
    beta: np.ndarray
    network: NetworkSpec
    kind = "network"

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        b = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if a.shape != b.shape or a.ndim != 2:
            raise ConfigurationError("alpha and beta must share the shape (p, K)")
        object.__setattr__(self, "alpha", _frozen(a))
        object.__setattr__(self, "beta", _frozen(b))

    @property
    def d(self):
        return self.network.d

    @property
    def period(self):
        return self.alpha.shape[0]

    @property
    def max_lag(self):
        return self.alpha.shape[1]

    def matrices(self, times, lags):
        times, lags = np.broadcast_arrays(np.asarray(times, dtype=np.int64),
                                          self._check_lags(lags))
        times, lags = times.ravel(), lags.ravel()
        a = np.zeros(lags.size)
        b = np.zeros(lags.size)
        ok = lags <= self.max_lag
        s = season_slot(times[ok], self.period)
        a[ok] = self.alpha[s, lags[ok] - 1]
        b[ok] = self.beta[s, lags[ok] - 1]
        return a[:, None, None] * np.eye(self.d) + b[:, None, None] * self.network.W

    def table(self, n_lags):
        n = min(n_lags, self.max_lag)
        a = np.zeros((self.period, n_lags))
        b = np.zeros((self.period, n_lags))
        a[:, :n] = self.alpha[:, :n]
        b[:, :n] = self.beta[:, :n]
        return a[..., None, None] * np.eye(self.d) + b[..., None, None] * self.network.W


class _ExpBasisKernel(PeriodicKernel):
    """Shared code of the exponential-polynomial variants."""

    is_markov = True

    @property
    def rates(self) -> np.ndarray:
        return decay_rates(self.q, self.tau, self.family)

    @property
    def decays(self) -> np.ndarray:
        """One-step decay factors ``r_m = exp(-c_m)``."""
        return np.exp(-self.rates)

    def coefficients(self, times) -> np.ndarray:
        """Matrices ``G_t^(m)`` at the given times, shape (n, q, d, d)."""
        raise NotImplementedError

    def matrices(self, times, lags):
        times, lags = np.broadcast_arrays(np.asarray(times), self._check_lags(lags))
        times, lags = times.ravel(), lags.ravel().astype(float)
        basis = np.exp(-lags[:, None] * self.rates[None, :])
        return np.einsum("nq,nqij->nij", basis, self.coefficients(times))

    def tail_horizon(self) -> int:
        """Truncation lag used when infinite sums are evaluated numerically."""
        return int(math.ceil(50 * self.tau))


@dataclass(frozen=True, eq=False)
class ExpPolyKernel(_ExpBasisKernel):
    """``phi^(v)_k = sum_m G[v, m] exp(-c_m k)`` with ``c_m = (2m+1)/tau`` (or ``m/tau``).

    ``G`` has shape (p, q, d, d).  Under Type I periodicity ``G[v]`` weights the
    auxiliary processes at the current season; under Type II it weights the
    counts of season ``v`` when they enter the auxiliary processes.
    """

    G: np.ndarray
    tau: float
    family: str = "odd"
    network: NetworkSpec | None = None
    kind = "exppoly"

    def __post_init__(self):
        g = np.asarray(self.G, dtype=float)
        if g.ndim != 4 or g.shape[2] != g.shape[3]:
            raise ConfigurationError("exponential kernel coefficients must have shape (p, q, d, d)")
        decay_rates(1, self.tau, self.family)
        object.__setattr__(self, "G", _frozen(g))
        object.__setattr__(self, "tau", float(self.tau))

    @classmethod
    def from_network(cls, a, b, network: NetworkSpec, tau: float, family: str = "odd"):
        """Coefficients ``G[v, m] = a[v, m] I + b[v, m] W`` from (p, q) arrays."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        g = a[..., None, None] * np.eye(network.d) + b[..., None, None] * network.W
        return cls(g, tau, family, network)

    @property
    def d(self):
        return self.G.shape[2]

    @property
    def q(self):
        return self.G.shape[1]

    @property
    def period(self):
        return self.G.shape[0]

    def coefficients(self, times):
        return self.G[season_slot(times, self.period)]

    def table(self, n_lags):
        lags = np.arange(1, n_lags + 1, dtype=float)
        basis = np.exp(-lags[:, None] * self.rates[None, :])
        return np.einsum("kq,vqij->vkij", basis, self.G)

    def l1_norms(self, closed_form: bool = True):
        """Per-season ``sum_k |phi^(v)_k|``.

        Entries whose coefficients share a sign use the geometric series
        ``sum_k r^k = r / (1 - r)``; the rest are summed up to ``50 tau``.
        """
        truncated = np.abs(self.table(self.tail_horizon())).sum(axis=1)
        if not closed_form:
            return truncated
        r = self.decays
        geo = np.einsum("m,vmij->vij", r / (1 - r), np.abs(self.G))
        same_sign = np.all(self.G >= 0, axis=1) | np.all(self.G <= 0, axis=1)
        return np.where(same_sign, geo, truncated)


@dataclass(frozen=True, eq=False)
class TrigExpPolyKernel(_ExpBasisKernel):
    """Exponential kernel whose coefficients vary as trigonometric polynomials.

    ``G_t^(m) = const[m] + sum_j sin[j, m] sin(2 pi j t / P) + cos[j, m] cos(2 pi j t / P)``
    with a real period ``P``.  ``const`` has shape (q, d, d); ``sin`` and
    ``cos`` have shape (r, q, d, d) for ``r`` harmonics.
    """

    period: float
    tau: float
    const: np.ndarray
    sin: np.ndarray
    cos: np.ndarray
    family: str = "odd"
    network: NetworkSpec | None = None
    kind = "trig_exppoly"

    def __post_init__(self):
        c = np.asarray(self.const, dtype=float)
        s = np.asarray(self.sin, dtype=float)
        k = np.asarray(self.cos, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ConfigurationError("const coefficients must have shape (q, d, d)")
        if s.shape != k.shape or s.ndim != 4 or s.shape[1:] != c.shape:
            raise ConfigurationError("sin/cos coefficients must have shape (r, q, d, d)")
        if not self.period > 0:
            raise ConfigurationError("period must be positive")
        decay_rates(1, self.tau, self.family)
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "tau", float(self.tau))
        for name, arr in (("const", c), ("sin", s), ("cos", k)):
            object.__setattr__(self, name, _frozen(arr))

    @classmethod
    def from_network(cls, period, tau, a, b, network: NetworkSpec, family: str = "odd"):
        """Network coefficients from (1 + 2r, q) arrays ordered (const, sin_1.., cos_1..)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        g = a[..., None, None] * np.eye(network.d) + b[..., None, None] * network.W
        r = (g.shape[0] - 1) // 2
        return cls(period, tau, g[0], g[1:1 + r], g[1 + r:], family, network)

    @property
    def d(self):
        return self.const.shape[1]

    @property
    def q(self):
        return self.const.shape[0]

    @property
    def harmonics(self):
        return self.sin.shape[0]

    def trig_basis(self, times) -> np.ndarray:
        """(n, 1 + 2r) matrix of ``[1, sin(2 pi j t/P)..., cos(2 pi j t/P)...]``."""
        t = np.asarray(times, dtype=float).ravel()
        j = np.arange(1, self.harmonics + 1)
        ang = 2 * np.pi * np.outer(t, j) / self.period
        return np.hstack([np.ones((t.size, 1)), np.sin(ang), np.cos(ang)])

    def coefficients(self, times):
        stacked = np.concatenate([self.const[None], self.sin, self.cos])
        return np.einsum("nb,bqij->nqij", self.trig_basis(times), stacked)

    def table(self, n_lags):
        if not self.integer_period:
            raise ConfigurationError("a season table needs an integer period")
        return super().table(n_lags)

    def l1_norms(self):
        """Sums over lags at the times ``1..ceil(P)`` of the first period."""
        times = np.arange(1, int(math.ceil(self.period)) + 1)
        lags = np.arange(1, self.tail_horizon() + 1)
        t, k = np.meshgrid(times, lags, indexing="ij")
        mats = self.matrices(t.ravel(), k.ravel()).reshape(times.size, lags.size, self.d, self.d)
        return np.abs(mats).sum(axis=1)


def eval_kernel(kernel: PeriodicKernel, season, lag: int) -> np.ndarray:
    """``phi^(season)_lag`` as a d x d matrix."""
    if lag < 1:
        raise PreconditionError("lags start at 1")
    return kernel.matrices(np.array([season]), np.array([lag]))[0]


def kernel_l1_norms(kernel: PeriodicKernel) -> np.ndarray:
    """Per-season entrywise l1 norms of the lag sequences, shape (p, d, d)."""
    return kernel.l1_norms()
