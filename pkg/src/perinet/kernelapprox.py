"""Exponential-polynomial approximation of lag kernels.

A scalar lag sequence ``phi_k`` is approximated by
``sum_m nu_m exp(-c_m k)`` in two steps: an ``l2`` projection through the
Gram system of the basis, then an exact ``l1`` refinement solved as a linear
programme.  Matrix and periodic kernels are approximated entry by entry and
season by season.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from .core.kernels import (ExpPolyKernel, NetworkKernel, PeriodicKernel, decay_rates)
from .errors import ConfigurationError, NumericError
from .stability import check_global

GRAM_CONDITION_LIMIT = 1e12


def select_tau(cutoff: float) -> float:
    """Characteristic time ``3/5 T_c``: every basis term is below ``e^{-5}`` at ``T_c``."""
    if not cutoff > 0:
        raise ConfigurationError("cutoff lag must be positive")
    return 0.6 * float(cutoff)


def fit_horizon(tau: float, target=None, family: str = "odd") -> int:
    """Number of lags on which the basis is fitted: ``max(50 tau, last |phi_k| >= 1e-12)``."""
    n = int(math.ceil(50 * tau))
    if target is not None:
        big = np.nonzero(np.abs(np.asarray(target)) >= 1e-12)[0]
        if big.size:
            n = max(n, int(big[-1]) + 1)
    return n


def basis_matrix(n_lags: int, tau: float, q: int, family: str = "odd") -> np.ndarray:
    """``(n_lags, q)`` matrix of ``exp(-c_m k)``, ``k = 1..n_lags``."""
    k = np.arange(1, n_lags + 1, dtype=float)
    return np.exp(-np.outer(k, decay_rates(q, tau, family)))


def _gram_solve(gram, rhs):
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
        warnings.warn(f"ill-conditioned Gram system (condition {cond:.3g}); using a ridge",
                      RuntimeWarning, stacklevel=3)
        gram = gram + 1e-10 * np.trace(gram) * np.eye(gram.shape[0])
    return np.linalg.solve(gram, rhs)


def l2_project(target, tau: float, q: int, family: str = "odd", tilt: bool = False) -> np.ndarray:
    """Least-squares coefficients of the exponential basis.

    The target is extended by zeros beyond its length, so the Gram matrix is
    the exact infinite sum ``sum_{k>=1} exp(-(c_m + c_n) k) = r / (1 - r)``
    and the right-hand side is ``b_m = sum_k phi_k exp(-c_m k)``.

    With ``tilt=True`` the projection is instead carried out on the tilted
    sequence ``phi_k e^{k/tau}`` onto ``exp(-2 m k / tau)`` and mapped back,
    which is the construction used in density arguments for the odd family.
    It only makes sense for targets decaying faster than ``e^{-k/tau}``.

    Returns:
        Coefficients ``nu`` of shape ``(q,)``.
    """
    phi = np.asarray(target, dtype=float).ravel()
    rates = decay_rates(q, tau, family)
    k = np.arange(1, phi.size + 1, dtype=float)
    if tilt:
        if family != "odd":
            raise ConfigurationError("the tilted projection is defined for the odd family")
        m = np.arange(1, q + 1)
        r = np.exp(-2.0 * (m[:, None] + m[None, :]) / tau)
        gram = r / (1 - r)
        rhs = np.exp(-np.outer(2 * m - 1, k) / tau) @ phi
    else:
        r = np.exp(-(rates[:, None] + rates[None, :]))
        gram = r / (1 - r)
        rhs = np.exp(-np.outer(rates, k)) @ phi
    if not np.any(rhs):
        return np.zeros(q)
    return _gram_solve(gram, rhs)


def l1_objective(target, coef, tau: float, family: str = "odd", n_lags: int | None = None) -> float:
    """``sum_k |phi_k - sum_m nu_m exp(-c_m k)|`` over ``k = 1..n_lags``.

    Lags beyond the stored target count as zero targets; the default horizon
    covers both the target and ``50 tau``.
    """
    phi = np.asarray(target, dtype=float).ravel()
    coef = np.asarray(coef, dtype=float).ravel()
    n = max(phi.size, int(math.ceil(50 * tau))) if n_lags is None else n_lags
    full = np.zeros(n)
    m = min(n, phi.size)
    full[:m] = phi[:m]
    return float(np.abs(full - basis_matrix(n, tau, coef.size, family) @ coef).sum())


@dataclass
class L1Result:
    coef: np.ndarray
    error: float
    init_error: float
    converged: bool = True
    iterations: int = 0
    method: str = "simplex"


def l1_refine(target, tau: float, q: int, init=None, family: str = "odd",
              method: str = "simplex", max_iter: int = 10_000) -> L1Result:
    """Minimise the ``l1`` distance between target and basis expansion.

    Args:
        target: Lag sequence ``phi_1..phi_K``.
        tau: Characteristic time.
        q: Number of exponentials.
        init: Starting coefficients (default: the ``l2`` projection).
        family: ``"odd"`` or ``"all"``.
        method: ``"simplex"`` solves the exact linear programme
            ``min sum_k s_k`` subject to ``-s <= phi - B nu <= s`` with the
            dual simplex method; ``"nelder-mead"`` runs a derivative-free
            simplex search from ``init``.
        max_iter: Iteration cap; reaching it sets ``converged=False`` and
            returns the best point found.

    Returns:
        :class:`L1Result`; its error never exceeds the error at ``init``.

    The objective runs over ``max(50 tau, K)`` lags.  Past the last lag where
    the target is at least ``1e-12`` and past ``50 tau`` the basis is below
    ``e^{-50}``, so remaining target mass enters as a constant.
    """
    phi = np.asarray(target, dtype=float).ravel()
    init = l2_project(phi, tau, q, family) if init is None else np.asarray(init, dtype=float)
    n_total = max(phi.size, int(math.ceil(50 * tau)))
    # past this lag every basis function is below exp(-50)
    n_fit = min(fit_horizon(tau, phi, family),
                int(math.ceil(50 / decay_rates(q, tau, family).min())))
    fit = np.zeros(n_fit)
    fit[:min(n_fit, phi.size)] = phi[:n_fit]
    tail = float(np.abs(phi[n_fit:]).sum()) if phi.size > n_fit else 0.0
    basis = basis_matrix(n_fit, tau, q, family)

    def objective(c):
        return float(np.abs(fit - basis @ c).sum()) + tail

    init_err = l1_objective(phi, init, tau, family, n_total)
    if not np.any(fit):
        coef, conv, iters = np.zeros(q), True, 0
    elif method == "simplex":
        n = n_fit
        # variables: nu (q, free), s (n, >= 0)
        c = np.concatenate([np.zeros(q), np.ones(n)])
        eye = sparse.identity(n, format="csr")
        a_ub = sparse.bmat([[sparse.csr_matrix(-basis), -eye], [sparse.csr_matrix(basis), -eye]],
                           format="csr")
        b_ub = np.concatenate([-fit, fit])
        bounds = [(None, None)] * q + [(0, None)] * n
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs-ds",
                      options={"maxiter": max_iter})
        conv, iters = res.status == 0, int(getattr(res, "nit", 0) or 0)
        coef = res.x[:q] if res.x is not None else init.copy()
    elif method == "nelder-mead":
        res = minimize(objective, init, method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-12, "fatol": 1e-14})
        coef, conv, iters = res.x, bool(res.success), int(res.nit)
    else:
        raise ConfigurationError(f"unknown l1 method {method!r}")
    err = l1_objective(phi, coef, tau, family, n_total)
    if err > init_err:
        coef, err = init.copy(), init_err
    return L1Result(np.asarray(coef, dtype=float), err, init_err, conv, iters, method)


@dataclass
class ApproximationReport:
    """Errors of an entrywise approximation.

    ``errors`` is ``(p, d, d)`` with the ``l1`` distance per season and
    entry.  ``max_over_seasons`` and ``sum_over_seasons`` are the entrywise
    maxima and sums over seasons.
    """

    errors: np.ndarray
    tau: float
    q: int
    family: str
    scale: float = 1.0
    rho_target: float = float("nan")
    rho_approx: float = float("nan")
    flags: list = field(default_factory=list)

    @property
    def max_over_seasons(self) -> np.ndarray:
        return self.errors.max(axis=0)

    @property
    def sum_over_seasons(self) -> np.ndarray:
        return self.errors.sum(axis=0)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "q": self.q, "family": self.family,
                "errors": self.errors.tolist(),
                "max_over_seasons": self.max_over_seasons.tolist(),
                "sum_over_seasons": self.sum_over_seasons.tolist(),
                "stability_scale": self.scale, "rho_target": self.rho_target,
                "rho_approx": self.rho_approx, "flags": self.flags}


def approximate_sequence(target, tau: float, q: int, family: str = "odd",
                         method: str = "simplex") -> L1Result:
    """``l2`` initialisation followed by ``l1`` refinement."""
    return l1_refine(target, tau, q, init=None, family=family, method=method)


def approximate_kernel(kernel: PeriodicKernel, tau: float, q: int, family: str = "odd",
                       method: str = "simplex", n_lags: int | None = None,
                       stability_guard: bool = True):
    """Exponential-polynomial kernel close to ``kernel`` in ``l1``.

    Each season and matrix entry is approximated separately.  Network
    kernels are approximated through their ``alpha`` and ``beta`` sequences,
    which keeps the ``a I + b W`` structure.  When ``stability_guard`` is on
    and the global stability check holds for the target but fails for the
    approximation, all coefficients are scaled down by the smallest factor
    that restores ``rho_approx <= rho_target``.

    Returns:
        ``(ExpPolyKernel, ApproximationReport)``.
    """
    if not kernel.integer_period:
        raise ConfigurationError("approximation needs an integer period")
    if n_lags is None:
        n_lags = kernel.max_lag if kernel.max_lag is not None else kernel.tail_horizon()
        n_lags = max(n_lags, int(math.ceil(50 * tau)))
    p, d = kernel.p, kernel.d
    flags = []

    if isinstance(kernel, NetworkKernel):
        a = np.zeros((p, q))
        b = np.zeros((p, q))
        for v in range(p):
            for seq, out in ((kernel.alpha[v], a), (kernel.beta[v], b)):
                res = approximate_sequence(seq, tau, q, family, method)
                out[v] = res.coef
                if not res.converged:
                    flags.append(f"season {v + 1}: l1 refinement hit the iteration cap")
        approx = ExpPolyKernel.from_network(a, b, kernel.network, tau, family)
    else:
        tab = kernel.table(n_lags)
        g = np.zeros((p, q, d, d))
        for v in range(p):
            for i in range(d):
                for j in range(d):
                    res = approximate_sequence(tab[v, :, i, j], tau, q, family, method)
                    g[v, :, i, j] = res.coef
                    if not res.converged:
                        flags.append(f"season {v + 1} entry ({i},{j}): iteration cap")
        approx = ExpPolyKernel(g, tau, family)

    scale = 1.0
    rho_t = rho_a = float("nan")
    if stability_guard:
        rho_t = check_global(kernel, n_lags=n_lags).spectral_radius
        rho_a = check_global(approx, n_lags=n_lags).spectral_radius
        if rho_t < 1 <= rho_a:
            # rho of sum_k max_v |phi| is positively homogeneous in the coefficients
            scale = rho_t / rho_a
            approx = ExpPolyKernel(approx.G * scale, tau, family, approx.network)
            rho_a = check_global(approx, n_lags=n_lags).spectral_radius
            flags.append(f"coefficients scaled by {scale:.6g} to preserve stability")
    errors = kernel_l1_distance(kernel, approx, n_lags)
    if not np.all(np.isfinite(errors)):
        raise NumericError("non-finite approximation error", {"tau": tau, "q": q})
    return approx, ApproximationReport(errors, tau, q, family, scale, rho_t, rho_a, flags)


def kernel_l1_distance(k1: PeriodicKernel, k2: PeriodicKernel, n_lags: int) -> np.ndarray:
    """Per-season entrywise ``sum_{k <= n_lags} |phi1 - phi2|``, shape ``(p, d, d)``."""
    return np.abs(k1.table(n_lags) - k2.table(n_lags)).sum(axis=1)
