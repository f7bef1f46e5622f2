"""Intensity recursions shared by simulation, likelihood and forecasting.

Two evaluators of the pre-intensity ``eta_t = mu_t + sum_{s<t} phi_{t-s} Y_s``:

* :class:`DirectConvolver` evaluates the lag sum literally, one time step at
  a time, in ``O(t d^2)`` operations per step.
* :class:`MarkovFilter` keeps the ``q`` auxiliary processes of an
  exponential-polynomial kernel and advances them in ``O(q d^2)`` per step.

Both accept a batch of ``R`` replicates (leading axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.kernels import PeriodicKernel, season_slot
from .errors import ConfigurationError

# direct tables larger than this are replaced by on-the-fly kernel evaluation
_TABLE_BYTES = 256 * 2**20


class DirectConvolver:
    """Lag sum ``sum_{l=1..n} phi^(sigma)_l Y_{t-l}`` for a window of past counts.

    ``sigma`` is the current time ``t`` for Type I periodicity and the event
    time ``t - l`` for Type II.  For integer periods the kernel is tabulated
    once per season with the lag axis reversed, so a step is a single matrix
    product of the flattened window with a slice of that table.

    Args:
        kernel: The kernel.
        periodicity: ``"I"`` or ``"II"``.
        horizon: Largest number of past steps that will ever be requested.
    """

    def __init__(self, kernel: PeriodicKernel, periodicity: str, horizon: int):
        self.kernel = kernel
        self.periodicity = periodicity
        self.d = kernel.d
        self.L = max(kernel.support(max(horizon, 1)), 1)
        self.table = None
        d, L = self.d, self.L
        if kernel.integer_period and kernel.p * L * d * d * 8 <= _TABLE_BYTES:
            p = kernel.p
            c = kernel.table(L)
            if periodicity == "II":
                s = np.arange(p)[:, None]
                lag = np.arange(1, L + 1)[None, :]
                c = c[(s - lag) % p, lag - 1]
            self.table = np.ascontiguousarray(c[:, ::-1].transpose(0, 1, 3, 2).reshape(p, L * d, d))

    def window_size(self, available: int) -> int:
        return min(available, self.L)

    def __call__(self, t: int, window: np.ndarray) -> np.ndarray:
        """Lag sum at time ``t``.

        Args:
            t: Absolute time index.
            window: ``(R, n, d)`` counts at times ``t-n, ..., t-1`` (oldest
                first) with ``n <= L``.
        """
        n_rep, n, d = window.shape
        if n == 0:
            return np.zeros((n_rep, d))
        if self.table is not None:
            slot = (t - 1) % self.table.shape[0]
            return window.reshape(n_rep, n * d) @ self.table[slot, (self.L - n) * d:]
        lags = np.arange(n, 0, -1)
        times = np.full(n, t) if self.periodicity == "I" else t - lags
        mats = self.kernel.matrices(times, lags)
        return np.einsum("rnj,nij->ri", window, mats)


@dataclass
class MarkovState:
    """Auxiliary processes of an exponential-polynomial kernel.

    Attributes:
        xi: ``(R, q, d)`` array; ``xi`` for Type I, ``zeta`` for Type II.
        decays: ``r_m = exp(-c_m)``, shape ``(q,)``.
        t_next: Time index whose pre-intensity the state currently encodes.
        periodicity: ``"I"`` or ``"II"``.
    """

    xi: np.ndarray
    decays: np.ndarray
    t_next: int
    periodicity: str = "I"

    def copy(self) -> "MarkovState":
        return MarkovState(self.xi.copy(), self.decays, self.t_next, self.periodicity)

    def replicate(self, index) -> "MarkovState":
        return MarkovState(self.xi[index].copy(), self.decays, self.t_next, self.periodicity)


class MarkovFilter:
    """Step-by-step Markov evaluation of an exponential-polynomial kernel."""

    def __init__(self, kernel: PeriodicKernel, periodicity: str):
        if not getattr(kernel, "is_markov", False):
            raise ConfigurationError("Markov recursion requires an exponential-polynomial kernel")
        self.kernel = kernel
        self.periodicity = periodicity
        self.decays = kernel.decays
        self._cache = None
        if kernel.integer_period:
            self._cache = kernel.G

    def start(self, n_rep: int, t_first: int) -> MarkovState:
        return MarkovState(np.zeros((n_rep, self.kernel.q, self.kernel.d)), self.decays,
                           t_first, self.periodicity)

    def coefficients(self, t: int) -> np.ndarray:
        if self._cache is not None:
            return self._cache[season_slot(t, self._cache.shape[0])]
        return self.kernel.coefficients(np.array([t]))[0]

    def lag_sum(self, state: MarkovState) -> np.ndarray:
        """``sum_{s<t} phi Y_s`` at ``t = state.t_next``, shape ``(R, d)``."""
        if self.periodicity == "II":
            return state.xi.sum(axis=1)
        g = self.coefficients(state.t_next)
        return np.einsum("mij,rmj->ri", g, state.xi)

    def advance(self, state: MarkovState, y: np.ndarray) -> None:
        """Feed the counts observed at ``state.t_next`` and move one step."""
        r = self.decays[None, :, None]
        y = np.asarray(y, dtype=float)
        if self.periodicity == "II":
            g = self.coefficients(state.t_next)
            state.xi = r * (state.xi + np.einsum("mij,rj->rmi", g, y))
        else:
            state.xi = r * (state.xi + y[:, None, :])
        state.t_next += 1
