"""Stability checks for periodic kernels and decay-rate classification.

Everything here works on nonnegative domination sequences ``A_k`` with
``L |phi^(v)_k| <= A_k`` entrywise.  Only absolute values are used; inhibitory
kernels whose positive part alone would be stable are therefore reported
conservatively (see ``docs/stability.md``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core.kernels import PeriodicKernel
from .errors import ConfigurationError, NumericError, PreconditionError

DENSE_FALLBACK_SIZE = 64


def _dense_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0


def spectral_radius(matrix, tol: float = 1e-10, max_iter: int = 100_000,
                    stall_iter: int = 2_000) -> float:
    """Spectral radius of a square matrix.

    Nonnegative matrices go through power iteration on ``A + I`` from the
    all-ones vector; the Collatz-Wielandt quotients bracket the Perron root
    and the loop stops when the bracket is narrower than ``tol``.  If the
    bracket has not closed after ``stall_iter`` steps (typical of reducible
    or defective matrices) and the size is at most 64, a dense eigenvalue
    solve is used.  Matrices with negative entries always use the dense path.

    Raises:
        NumericError: If the iteration does not converge within ``max_iter``.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError("spectral radius needs a square matrix")
    n = a.shape[0]
    if n == 0:
        return 0.0
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries", {"shape": a.shape})
    if np.any(a < 0):
        return _dense_radius(a)
    if not a.any():
        return 0.0
    scale = float(a.max())
    b = a / scale + np.eye(n)
    x = np.ones(n)
    lo = hi = float("nan")
    for it in range(1, max_iter + 1):
        y = b @ x
        pos = x > 0
        ratios = y[pos] / x[pos]
        lo, hi = float(ratios.min()), float(ratios.max())
        if (hi - lo) * scale <= tol:
            return max(0.0, (0.5 * (lo + hi) - 1.0) * scale)
        x = y / y.max()
        if it == stall_iter and n <= DENSE_FALLBACK_SIZE:
            return _dense_radius(a)
    raise NumericError("power iteration did not converge",
                       {"iterations": max_iter, "lower": (lo - 1) * scale,
                        "upper": (hi - 1) * scale, "size": n})


@dataclass(frozen=True)
class Decay:
    """Decay classification of a domination sequence.

    ``kind`` is ``"exponential"`` (``delta`` is the largest rate with
    ``rho(sum_k e^{delta k} A_k) < 1``; ``inf`` when unbounded),
    ``"polynomial"`` (``beta`` from ``A_k = O(k^{-2(1+beta)})``) or
    ``"unclassified"``.
    """

    kind: str
    delta: float = float("nan")
    beta: float = float("nan")
    r2: float = float("nan")
    capped: bool = False

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": _num(self.delta), "beta": _num(self.beta),
                "r2": _num(self.r2), "capped": self.capped}


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return float(x)


@dataclass(frozen=True, eq=False)
class DominationSequence:
    """Nonnegative matrices ``A_k``, ``k = 1..K``, stored as ``(K, d, d)``.

    ``exp_terms = (C, c)`` optionally records the exact infinite form
    ``A_k = sum_m C[m] exp(-c[m] k)`` so that sums can be taken in closed
    form.
    """

    A: np.ndarray
    exp_terms: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        if a.ndim == 1:
            a = a[:, None, None]
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ConfigurationError("domination matrices must have shape (K, d, d)")
        if np.any(a < 0):
            raise ConfigurationError("domination matrices must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "A", a)
        if self.exp_terms is not None:
            c, rates = self.exp_terms
            c = np.asarray(c, dtype=float)
            c = c[:, None, None] if c.ndim == 1 else c
            object.__setattr__(self, "exp_terms", (c, np.asarray(rates, dtype=float)))

    @classmethod
    def exponential(cls, coef, rates, n_lags: int | None = None) -> "DominationSequence":
        """``A_k = sum_m coef[m] exp(-rates[m] k)`` with an exact closed form."""
        coef = np.asarray(coef, dtype=float)
        coef = coef[:, None, None] if coef.ndim == 1 else coef
        rates = np.asarray(rates, dtype=float)
        if n_lags is None:
            n_lags = int(math.ceil(50 / rates.min()))
        k = np.arange(1, n_lags + 1, dtype=float)
        a = np.einsum("km,mij->kij", np.exp(-np.outer(k, rates)), coef)
        return cls(a, (coef, rates))

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def total(self) -> np.ndarray:
        """``S_A = sum_k A_k`` (closed form when available)."""
        return self.tilted_sum(0.0)

    def remainder(self, t: int) -> np.ndarray:
        """``U_t = sum_{k >= t} A_k`` over the stored lags."""
        return self.A[max(t, 1) - 1:].sum(axis=0)

    def tilted_sum(self, delta: float) -> np.ndarray:
        """``sum_k exp(delta k) A_k``; ``inf`` entries when not summable."""
        if self.exp_terms is not None:
            coef, rates = self.exp_terms
            net = rates - delta
            out = np.zeros((self.d, self.d))
            for cm, rm in zip(coef, net):
                if rm <= 0:
                    out = out + np.where(cm > 0, np.inf, 0.0)
                else:
                    r = math.exp(-rm)
                    out = out + cm * (r / (1 - r))
            return out
        k = np.arange(1, self.K + 1, dtype=float)
        with np.errstate(over="ignore"):
            w = np.exp(delta * k)
        return np.einsum("k,kij->ij", w, self.A)

    def convolve(self, seq: np.ndarray) -> np.ndarray:
        """``(A * x)_t = sum_{k=1}^{t-1} A_k x_{t-k}`` for ``x`` of shape ``(T, d)``."""
        T = seq.shape[0]
        out = np.zeros_like(seq, dtype=float)
        for k in range(1, min(self.K, T - 1) + 1):
            out[k:] += seq[:-k] @ self.A[k - 1].T
        return out


def domination_sequence(kernel: PeriodicKernel, L: float = 1.0,
                        n_lags: int | None = None) -> DominationSequence:
    """``A_k = L max_v |phi^(v)_k|`` entrywise.

    Infinite kernels are cut at ``n_lags`` (default ``ceil(50 tau)`` for
    exponential kernels).  For non-integer periods the maximum runs over the
    times of the first period.
    """
    if n_lags is None:
        n_lags = kernel.max_lag if kernel.max_lag is not None else kernel.tail_horizon()
    if kernel.integer_period:
        tab = np.abs(kernel.table(n_lags))
    else:
        times = np.arange(1, int(math.ceil(kernel.period)) + 1)
        lags = np.arange(1, n_lags + 1)
        t, k = np.meshgrid(times, lags, indexing="ij")
        tab = np.abs(kernel.matrices(t.ravel(), k.ravel())).reshape(times.size, n_lags,
                                                                  kernel.d, kernel.d)
    a = L * tab.max(axis=0)
    exp_terms = None
    g = getattr(kernel, "G", None)
    if g is not None and g.shape[0] == 1 and (np.all(g >= 0) or np.all(g <= 0)):
        exp_terms = (L * np.abs(g[0]), kernel.rates)
    return DominationSequence(a, exp_terms)


@dataclass
class StabilityVerdict:
    mode: str
    spectral_radius: float
    stable: bool
    margin: float = 0.0
    decay: Decay | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "spectral_radius": self.spectral_radius,
                "stable": self.stable, "margin": self.margin,
                "decay": None if self.decay is None else self.decay.to_dict(),
                "details": self.details}


def check_global(kernel: PeriodicKernel, L: float = 1.0, margin: float = 0.0,
                 n_lags: int | None = None, classify: bool = False) -> StabilityVerdict:
    """``rho(sum_k A_k)`` for the uniform-in-season domination ``A_k``."""
    dom = domination_sequence(kernel, L, n_lags)
    rho = spectral_radius(dom.A.sum(axis=0))
    stable = rho < 1 - margin
    decay = classify_decay(dom) if (classify and stable) else None
    return StabilityVerdict("global", rho, stable, margin, decay, {"n_lags": dom.K})


def companion_matrices(kernel: PeriodicKernel, L: float = 1.0, m: int = 1,
                       periodicity: str = "I") -> np.ndarray:
    """Companion blocks ``Gamma_v``, ``v = 1..p``, each of size ``d m p``.

    The first block row of ``Gamma_v`` holds ``L |phi_k|`` for ``k = 1..mp``
    as seen at a time of season ``v`` (``phi^(v)_k`` under Type I and
    ``phi^(v-k)_k`` under Type II); the sub-diagonal shifts the state.
    """
    if m < 1:
        raise ConfigurationError("m must be a positive integer")
    p, d = kernel.p, kernel.d
    n = m * p
    tab = np.abs(kernel.table(n)) * L
    out = np.zeros((p, d * n, d * n))
    for v in range(p):
        for k in range(1, n + 1):
            src = v if periodicity == "I" else (v - k) % p
            out[v, :d, (k - 1) * d:k * d] = tab[src, k - 1]
        out[v, d:, :-d] = np.eye(d * (n - 1))
    return out


def check_periodic(kernel: PeriodicKernel, L: float = 1.0, m: int = 1, margin: float = 0.0,
                   periodicity: str = "I") -> StabilityVerdict:
    """``rho(Gamma_p ... Gamma_1)`` with the kernel truncated at ``m p`` lags."""
    gam = companion_matrices(kernel, L, m, periodicity)
    prod = np.eye(gam.shape[1])
    for g in gam:
        prod = g @ prod
    rho = spectral_radius(prod)
    ignored = 0.0
    if kernel.max_lag is None or kernel.max_lag > m * kernel.p:
        horizon = kernel.max_lag or kernel.tail_horizon()
        ignored = float(L * np.abs(kernel.table(horizon)[:, m * kernel.p:]).sum(axis=1).max())
    return StabilityVerdict("periodic", rho, rho < 1 - margin, margin, None,
                            {"m": m, "size": int(prod.shape[0]), "ignored_tail_l1": ignored})


def _fit_line(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2


def _bisect_delta(dom: DominationSequence, upper: float, tol: float):
    """Largest delta in ``(0, upper)`` with ``rho(tilted_sum(delta)) < 1``."""

    def ok(delta):
        s = dom.tilted_sum(delta)
        return bool(np.all(np.isfinite(s))) and spectral_radius(s) < 1

    if not ok(0.0):
        raise PreconditionError("domination sequence is not stable (rho(S_A) >= 1)")
    capped = False
    if math.isinf(upper):
        hi = 1.0
        while ok(hi):
            hi *= 2
            if hi > 1e6:
                return float("inf"), False
        lo = hi / 2 if hi > 1 else 0.0
    else:
        lo, hi = 0.0, upper
        if ok(hi - tol / 2):
            return hi - tol / 2, True
    while hi - lo > tol / 2:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo, capped


def classify_decay(domination: DominationSequence, tol: float = 1e-4,
                   r2_threshold: float = 0.99) -> Decay:
    """Classify the decay of ``A_k`` and find the exponential moment rate.

    An exponential profile (log-linear fit of ``max_ij A_k`` with
    ``R^2 >= r2_threshold``) yields the largest ``delta`` below the fitted
    rate with ``rho(sum e^{delta k} A_k) < 1``, located by bisection to
    ``tol``.  Otherwise a log-log fit with slope ``s`` gives a polynomial
    class with ``beta = -s/2 - 1`` when positive.  Sequences with fewer than
    three nonzero lags count as finitely supported, for which the rate is
    only limited by the spectral condition.
    """
    dom = domination
    if dom.exp_terms is not None:
        coef, rates = dom.exp_terms
        active = rates[np.any(coef > 0, axis=(1, 2))]
        if active.size == 0:
            return Decay("exponential", float("inf"), r2=1.0)
        delta, capped = _bisect_delta(dom, float(active.min()), tol)
        return Decay("exponential", delta, r2=1.0, capped=capped)
    peak = dom.A.reshape(dom.K, -1).max(axis=1)
    pos = np.nonzero(peak > 0)[0]
    if pos.size == 0:
        return Decay("exponential", float("inf"), r2=1.0)
    if pos.size < 3:
        delta, capped = _bisect_delta(dom, float("inf"), tol)
        return Decay("exponential", delta, r2=1.0, capped=capped)
    k = pos + 1.0
    logs = np.log(peak[pos])
    slope, _, r2 = _fit_line(k, logs)
    if r2 >= r2_threshold and slope < 0:
        delta, capped = _bisect_delta(dom, -slope, tol)
        return Decay("exponential", delta, r2=r2, capped=capped)
    pslope, _, pr2 = _fit_line(np.log(k), logs)
    beta = -pslope / 2 - 1
    if pr2 >= r2_threshold and beta > 0:
        return Decay("polynomial", beta=beta, r2=pr2)
    return Decay("unclassified", r2=max(r2, pr2))


def convolution_bound(domination: DominationSequence, K) -> np.ndarray:
    """``sum_{n >= 0} A^{*n} * |K|``, the bound driven by a sequence ``K_t``.

    Args:
        domination: Sequence with ``rho(S_A) < 1``.
        K: Either a constant (scalar or ``d``-vector), in which case the
            result is ``(I - S_A)^{-1} |K|``, or a ``(T, d)`` sequence indexed
            ``t = 1..T``, for which the series of convolution powers is summed
            until its increments fall below ``1e-12``.
    """
    s = domination.total
    if not np.all(np.isfinite(s)) or spectral_radius(s) >= 1:
        raise PreconditionError("convolution bound needs rho(S_A) < 1")
    d = domination.d
    k = np.abs(np.asarray(K, dtype=float))
    if k.ndim <= 1:
        kbar = np.broadcast_to(k, (d,))
        return np.linalg.solve(np.eye(d) - s, kbar)
    if k.ndim != 2 or k.shape[1] != d:
        raise ConfigurationError("driver sequence must have shape (T, d)")
    total = k.copy()
    term = k
    for _ in range(k.shape[0]):
        term = domination.convolve(term)
        total += term
        if np.abs(term).max() < 1e-12:
            break
    return total
