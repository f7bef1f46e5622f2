"""Data features for a layout, and the likelihood and score built on them.

Because the auxiliary processes only depend on observed counts, the
pre-intensity is linear in the parameter vector.  The features are computed
once per data set and every likelihood or gradient evaluation is a handful of
tensor contractions.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.signal import lfilter

from ..core.model import CountSeries
from ..errors import ConfigurationError
from .layout import Layout, time_basis

# identity jump rate: below this pre-intensity the log term is extended by a
# concave quadratic and negative intensities are penalised
_EPS = 1e-6
_PENALTY = 1e6


def _stack_history(data: CountSeries, history):
    y = np.asarray(data.counts, dtype=float)
    if history is None:
        return y, 0
    h = np.asarray(history, dtype=float).reshape(-1, data.d)
    return np.vstack([h, y]), h.shape[0]


def exp_filter(series: np.ndarray, r: float) -> np.ndarray:
    """``x_t = sum_{l >= 1} r^l s_{t-l}`` along axis 0 (zero before the start)."""
    return lfilter([0.0, r], [1.0, -r], series, axis=0)


def lag_shift(series: np.ndarray, k: int) -> np.ndarray:
    """``x_t = s_{t-k}`` along axis 0 with zeros before the start."""
    out = np.zeros_like(series)
    if k < series.shape[0]:
        out[k:] = series[:-k]
    return out


class Design:
    """Features of a data set under a layout.

    Attributes:
        layout: The layout.
        Y: ``(T, d)`` counts.
        times: Absolute times of the rows.
        Hmu: ``(T, Bmu)`` baseline basis.
        F: ``(T, B, C, d)`` kernel features.
        FW: ``F @ W^T`` for network layouts, else ``None``.
    """

    def __init__(self, layout: Layout, Y, times, Hmu, F):
        self.layout = layout
        self.Y = np.asarray(Y, dtype=float)
        self.times = np.asarray(times)
        self.Hmu = Hmu
        self.F = F
        self.FW = F @ layout.network.W.T if layout.structure == "network" else None

    @classmethod
    def build(cls, layout: Layout, data: CountSeries, history=None) -> "Design":
        if data.d != layout.d:
            raise ConfigurationError("data width does not match the layout dimension")
        yall, n_hist = _stack_history(data, history)
        times_all = np.arange(data.t0 - n_hist, data.t0 + data.T)
        hmu = time_basis(layout.mu_basis, data.times, layout.period, layout.harmonics)
        hc_all = time_basis(layout.kernel_basis, times_all, layout.period, layout.harmonics)
        n_b = hc_all.shape[1]
        n_c = layout.q
        T, d = data.T, data.d
        F = np.zeros((T, n_b, n_c, d))
        if not layout.fixed_kernel:
            if layout.periodicity == "I":
                for c in range(n_c):
                    if layout.channel == "exp":
                        x = exp_filter(yall, np.exp(-layout.rates[c]))
                    else:
                        x = lag_shift(yall, c + 1)
                    F[:, :, c, :] = hc_all[n_hist:, :, None] * x[n_hist:, None, :]
            else:
                for b in range(n_b):
                    weighted = hc_all[:, b, None] * yall
                    for c in range(n_c):
                        if layout.channel == "exp":
                            x = exp_filter(weighted, np.exp(-layout.rates[c]))
                        else:
                            x = lag_shift(weighted, c + 1)
                        F[:, b, c, :] = x[n_hist:]
        return cls(layout, data.counts, data.times, hmu, F)

    def restrict(self, rows) -> "Design":
        """Design on a subset of rows (same layout and parameter vector)."""
        out = Design.__new__(Design)
        out.layout = self.layout
        out.Y = self.Y[rows]
        out.times = self.times[rows]
        out.Hmu = self.Hmu[rows]
        out.F = self.F[rows]
        out.FW = None if self.FW is None else self.FW[rows]
        return out

    @property
    def n_obs(self) -> int:
        return self.Y.size

    # evaluation ------------------------------------------------------------
    def eta(self, theta) -> np.ndarray:
        lay = self.layout
        mu, coef = lay.unpack(theta)
        mu = np.broadcast_to(mu, (mu.shape[0], lay.d))
        out = self.Hmu @ mu
        if lay.fixed_kernel:
            return out
        if lay.structure == "network":
            out = out + np.einsum("tbcj,bc->tj", self.F, coef[:, 0])
            out = out + np.einsum("tbcj,bc->tj", self.FW, coef[:, 1])
        else:
            out = out + np.einsum("tbcj,bcij->ti", self.F, coef)
        return out

    def intensities(self, theta) -> np.ndarray:
        return self.layout.jump_rate(self.eta(theta))

    def loglik(self, theta) -> float:
        return poisson_loglik(self.Y, self.intensities(theta))

    def score_weights(self, eta) -> np.ndarray:
        """``d l / d eta = (Y / psi(eta) - 1) psi'(eta)``."""
        psi = self.layout.jump_rate
        lam = psi(eta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.Y > 0, self.Y / lam, 0.0)
        return (ratio - 1.0) * psi.derivative(eta)

    def chain(self, w) -> np.ndarray:
        """Map ``d/d eta`` weights ``(T, d)`` to a gradient in parameter space."""
        lay = self.layout
        g_mu = self.Hmu.T @ w
        if not lay.mu_per_node:
            g_mu = g_mu.sum(axis=1, keepdims=True)
        parts = [g_mu.ravel()]
        if not lay.fixed_kernel:
            if lay.structure == "network":
                ga = np.einsum("ti,tbci->bc", w, self.F)
                gb = np.einsum("ti,tbci->bc", w, self.FW)
                parts.append(np.stack([ga, gb], axis=1).ravel())
            else:
                parts.append(np.einsum("ti,tbcj->bcij", w, self.F).ravel())
        return np.concatenate(parts)

    def gradient(self, theta) -> np.ndarray:
        return self.chain(self.score_weights(self.eta(theta)))

    def fd_gradient(self, theta, fn=None) -> np.ndarray:
        """Central differences with step ``1e-5 (1 + |theta|)``."""
        fn = self.loglik if fn is None else fn
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for i in range(theta.size):
            h = 1e-5 * (1 + abs(theta[i]))
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            out[i] = (fn(up) - fn(dn)) / (2 * h)
        return out

    def objective(self, theta):
        """Log-likelihood and score used by the optimiser.

        For the identity jump rate the log term is continued below ``1e-6``
        by its second-order expansion and negative pre-intensities pay a
        quadratic penalty, which keeps the objective finite, smooth and
        concave outside the feasible set.
        """
        eta = self.eta(theta)
        psi = self.layout.jump_rate
        if not psi.is_linear:
            lam = psi(eta)
            ll = poisson_loglik(self.Y, lam, warn=False)
            return ll, self.chain(self.score_weights(eta))
        y = self.Y
        safe = np.maximum(eta, _EPS)
        low = eta < _EPS
        dx = eta - _EPS
        logv = np.where(low, np.log(_EPS) + dx / _EPS - dx**2 / (2 * _EPS**2), np.log(safe))
        dlog = np.where(low, 1.0 / _EPS - dx / _EPS**2, 1.0 / safe)
        neg = np.minimum(eta, 0.0)
        ll = float(np.sum(np.where(y > 0, y * logv, 0.0)) - eta.sum() - 0.5 * _PENALTY * np.sum(neg**2))
        w = np.where(y > 0, y * dlog, 0.0) - 1.0 - _PENALTY * neg
        return ll, self.chain(w)


def poisson_loglik(y, lam, warn: bool = True) -> float:
    """``sum y log(lam) - lam`` without the ``log(y!)`` constant.

    Entries with ``y = 0`` contribute ``-lam``.  A zero intensity paired with a
    positive count makes the result ``-inf``.
    """
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    pos = y > 0
    if np.any(lam[pos] <= 0):
        if warn:
            n_bad = int(np.sum(lam[pos] <= 0))
            warnings.warn(f"{n_bad} positive counts have zero intensity; log-likelihood is -inf",
                          RuntimeWarning, stacklevel=2)
        return float("-inf")
    with np.errstate(divide="ignore"):
        logs = np.where(pos, np.log(np.where(pos, lam, 1.0)), 0.0)
    return float(np.sum(y * logs) - np.sum(lam))
