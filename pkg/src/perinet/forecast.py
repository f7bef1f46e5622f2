"""Conditional-mean forecasts, rolling-origin evaluation and comparison statistics."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .core.model import CountSeries, ModelSpec
from .engine import DirectConvolver, MarkovFilter
from .errors import ConfigurationError, DegenerateLossDifferential, PreconditionError
from .rng import PoissonStream


def _paths_forecast(spec: ModelSpec, history: CountSeries, h: int, reps, seed: int,
                    simulate: bool) -> np.ndarray:
    """Mean intensity at ``t+1..t+h`` over the replicates ``reps``.

    With ``simulate=False`` the forecasts themselves are fed back as if they
    were observed, which is the exact recursion for a linear jump rate.
    Otherwise each replicate draws its own future counts, and averaging the
    intensities (rather than the counts) gives the conditional mean with a
    smaller variance.
    """
    psi = spec.jump_rate
    d = spec.d
    n_rep = len(reps)
    y_hist = np.asarray(history.counts, dtype=float)
    t_last = history.t0 + history.T - 1
    times = np.arange(t_last + 1, t_last + h + 1)
    mu = spec.baseline_at(times)
    stream = PoissonStream(seed) if simulate else None
    out = np.zeros((h, d))

    if getattr(spec.kernel, "is_markov", False):
        filt = MarkovFilter(spec.kernel, spec.periodicity)
        state = filt.start(1, history.t0)
        for row in y_hist:
            filt.advance(state, row[None])
        state = state.replicate(np.zeros(n_rep, dtype=int))
        for j, t in enumerate(times):
            lam = psi(mu[j] + filt.lag_sum(state))
            out[j] = lam.mean(axis=0)
            if j + 1 < h:
                y = stream.counts(lam, int(t), reps) if simulate else lam
                filt.advance(state, y)
        return out

    n_total = history.T + h
    conv = DirectConvolver(spec.kernel, spec.periodicity, n_total)
    buf = np.zeros((n_rep, n_total, d))
    buf[:, :history.T] = y_hist
    for j, t in enumerate(times):
        k = history.T + j
        n = min(k, conv.L)
        lam = psi(mu[j] + conv(int(t), buf[:, k - n:k]))
        out[j] = lam.mean(axis=0)
        buf[:, k] = stream.counts(lam, int(t), reps) if simulate else lam
    return out


def forecast(spec: ModelSpec, history: CountSeries, h: int, paths: int = 2000, seed: int = 0,
             threads: int = 1) -> np.ndarray:
    """Predictions ``E[Y_{t+j} | Y_s, s <= t]`` for ``j = 1..h``.

    ``t`` is the last time of ``history`` (times are absolute, so seasons
    follow ``history.t0``).  Counts before ``history.t0`` are taken as zero.
    The one-step prediction is the intensity ``lambda_{t+1}``.  For the
    identity jump rate the later steps follow the exact linear recursion;
    other jump rates average ``paths`` simulated continuations.

    Returns:
        ``(h, d)`` array.
    """
    if int(h) < 1:
        raise ConfigurationError("forecast horizon h must be at least 1")
    if history.d != spec.d:
        raise ConfigurationError("history width does not match the model dimension")
    spec.require_valid()
    h = int(h)
    if spec.jump_rate.is_linear or h == 1:
        return _paths_forecast(spec, history, h, np.zeros(1, dtype=np.int64), seed, False)
    if paths < 1:
        raise ConfigurationError("paths must be at least 1")
    reps = np.arange(paths, dtype=np.int64)
    n_chunks = max(1, min(threads, paths))
    if n_chunks == 1:
        return _paths_forecast(spec, history, h, reps, seed, True)
    chunks = np.array_split(reps, n_chunks)
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        parts = list(pool.map(lambda c: _paths_forecast(spec, history, h, c, seed, True), chunks))
    return sum(p * len(c) for p, c in zip(parts, chunks)) / paths


@dataclass
class RollingForecast:
    """Predictions of ``Y_{t+1..T}`` re-anchored every ``horizon`` steps."""

    origin: int
    horizon: int
    times: np.ndarray
    predictions: np.ndarray
    actual: np.ndarray
    anchors: np.ndarray


def rolling_forecast(spec: ModelSpec, data: CountSeries, origin: int, h: int, refit=None,
                     paths: int = 2000, seed: int = 0, threads: int = 1) -> RollingForecast:
    """Rolling-origin predictor ``E[Y_{t+j} | F_{t + floor((j-1)/h) h}]``.

    Args:
        spec: Model used at every anchor (unless ``refit`` is given).
        data: Full count series.
        origin: Absolute time ``t`` of the first anchor; ``t < T``.
        h: Re-anchoring interval (and maximal lead time).
        refit: Optional callable ``CountSeries -> ModelSpec`` invoked on the
            data up to each anchor.
        paths, seed, threads: Monte Carlo controls for nonlinear jump rates.
    """
    last = data.t0 + data.T - 1
    if not data.t0 <= origin < last:
        raise ConfigurationError(f"origin must lie in [{data.t0}, {last - 1}]")
    if int(h) < 1:
        raise ConfigurationError("h must be at least 1")
    preds, anchors = [], []
    anchor = origin
    while anchor < last:
        steps = min(h, last - anchor)
        past = data.window(data.t0, anchor + 1)
        model = refit(past) if refit is not None else spec
        preds.append(forecast(model, past, steps, paths, seed, threads))
        anchors.extend([anchor] * steps)
        anchor += steps
    times = np.arange(origin + 1, last + 1)
    actual = data.counts[origin + 1 - data.t0:]
    return RollingForecast(origin, int(h), times, np.vstack(preds), np.asarray(actual, float),
                           np.asarray(anchors))


def rmse(pred, actual) -> np.ndarray:
    """Per-column root mean squared error."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise PreconditionError(f"shape mismatch {pred.shape} vs {actual.shape}")
    if pred.shape[0] == 0:
        raise PreconditionError("rmse of an empty series is undefined")
    err = (pred - actual).reshape(pred.shape[0], -1)
    return np.sqrt(np.mean(err**2, axis=0)).reshape(pred.shape[1:])


@dataclass
class DMResult:
    statistic: float
    pvalue: float
    n: int
    horizon: int
    variance: float
    harvey: bool = False


def diebold_mariano(errors_a, errors_b, h: int = 1, harvey: bool = False) -> DMResult:
    """Diebold-Mariano test of equal squared-error loss.

    The loss differential is ``e_a^2 - e_b^2``; its long-run variance uses
    uniform weights on the autocovariances of lags ``0..h-1``.  A negative
    variance estimate at ``h > 1`` falls back to ``h = 1``.  Negative
    statistics favour ``a``.

    Args:
        errors_a: Forecast errors of the first model.
        errors_b: Forecast errors of the second model, same length.
        h: Forecast horizon.
        harvey: Apply the small-sample correction and use Student-t
            p-values with ``n - 1`` degrees of freedom.

    Raises:
        DegenerateLossDifferential: If the loss differential has zero variance.
    """
    ea = np.asarray(errors_a, dtype=float).ravel()
    eb = np.asarray(errors_b, dtype=float).ravel()
    if ea.shape != eb.shape:
        raise PreconditionError("error series must have equal length")
    n = ea.size
    if n < 4:
        raise PreconditionError("the DM test needs at least 4 observations")
    if h < 1:
        raise ConfigurationError("h must be at least 1")
    dl = ea**2 - eb**2
    dbar = dl.mean()
    dev = dl - dbar
    gam = np.array([np.dot(dev[k:], dev[:n - k]) / n for k in range(min(h, n))])
    var = (gam[0] + 2 * gam[1:].sum()) / n
    if not var > 0:
        if h > 1:
            return diebold_mariano(ea, eb, 1, harvey)
        raise DegenerateLossDifferential("loss differential has zero variance; DM is undefined")
    stat = dbar / math.sqrt(var)
    if harvey:
        stat *= math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
        p = 2 * stats.t.sf(abs(stat), df=n - 1)
    else:
        p = 2 * stats.norm.sf(abs(stat))
    return DMResult(float(stat), float(p), n, int(h), float(var), harvey)


def bh_adjust(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in the input order."""
    p = np.asarray(pvalues, dtype=float)
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise PreconditionError("p-values must lie in [0, 1]")
    flat = p.ravel()
    m = flat.size
    if m == 0:
        return p.copy()
    order = np.argsort(flat, kind="stable")
    scaled = flat[order] * m / np.arange(1, m + 1)
    adj = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    out = np.empty(m)
    out[order] = adj
    return out.reshape(p.shape)


def bic(loglik: float, k: int, n_obs: int) -> float:
    """``k ln(n_obs) - 2 loglik`` (lower is better)."""
    if n_obs < 1:
        raise PreconditionError("n_obs must be positive")
    return k * math.log(n_obs) - 2.0 * loglik


@dataclass
class ForecastReport:
    """Forecasts of one or more models on a common evaluation window.

    Attributes:
        horizon: Re-anchoring interval ``h``.
        origin: Last observed time before the first prediction.
        times: Predicted times.
        actual: Observed counts ``(n, d)``.
        predictions: Model name to ``(n, d)`` predictions.
        rmse: Model name to per-node RMSE.
        bic: Model name to BIC, where known.
        names: Node labels.
        dm_statistic, dm_pvalue, dm_adjusted: Per-node DM statistics of the
            first model against the second, raw and BH-adjusted p-values
            (empty for single-model reports).
        flags: Warnings, such as nodes with a degenerate loss differential.
    """

    horizon: int
    origin: int
    times: np.ndarray
    actual: np.ndarray
    predictions: dict
    rmse: dict = field(default_factory=dict)
    bic: dict = field(default_factory=dict)
    names: list | None = None
    dm_statistic: np.ndarray | None = None
    dm_pvalue: np.ndarray | None = None
    dm_adjusted: np.ndarray | None = None
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.actual = np.asarray(self.actual, dtype=float)
        self.predictions = {k: np.asarray(v, dtype=float) for k, v in self.predictions.items()}
        for key, pred in self.predictions.items():
            if key not in self.rmse:
                self.rmse[key] = rmse(pred, self.actual)
        self.rmse = {k: np.asarray(v, dtype=float) for k, v in self.rmse.items()}
        if self.names is None:
            self.names = [str(i + 1) for i in range(self.actual.shape[1])]

    @property
    def models(self) -> list:
        return list(self.predictions)

    @classmethod
    def from_rolling(cls, name: str, roll: RollingForecast, names=None, bic_value=None):
        b = {} if bic_value is None else {name: float(bic_value)}
        return cls(roll.horizon, roll.origin, roll.times, roll.actual,
                   {name: roll.predictions}, bic=b, names=names)

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()
        return {
            "horizon": self.horizon,
            "origin": self.origin,
            "times": self.times.tolist(),
            "names": list(self.names),
            "actual": self.actual.tolist(),
            "predictions": {k: v.tolist() for k, v in self.predictions.items()},
            "rmse": {k: v.tolist() for k, v in self.rmse.items()},
            "bic": dict(self.bic),
            "dm_statistic": arr(self.dm_statistic),
            "dm_pvalue": arr(self.dm_pvalue),
            "dm_adjusted": arr(self.dm_adjusted),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForecastReport":
        def arr(x):
            return None if x is None else np.asarray(x, dtype=float)
        return cls(int(data["horizon"]), int(data["origin"]), data["times"], data["actual"],
                   data["predictions"], data.get("rmse", {}), data.get("bic", {}),
                   data.get("names"), arr(data.get("dm_statistic")),
                   arr(data.get("dm_pvalue")), arr(data.get("dm_adjusted")),
                   list(data.get("flags", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ForecastReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def table(self) -> list:
        """Rows ``node, RMSE per model, DM, adjusted p`` (header first)."""
        header = ["district"] + [f"RMSE_{m}" for m in self.models]
        has_dm = self.dm_statistic is not None
        if has_dm:
            header += ["DM", "p_adjusted"]
        rows = [header]
        for i, name in enumerate(self.names):
            row = [name] + [f"{self.rmse[m][i]:.6g}" for m in self.models]
            if has_dm:
                row += [f"{self.dm_statistic[i]:.6g}", f"{self.dm_adjusted[i]:.6g}"]
            rows.append(row)
        return rows


def compare_reports(a: ForecastReport, b: ForecastReport, harvey: bool = False) -> ForecastReport:
    """Merge two single-model reports and add per-node DM tests with BH adjustment.

    Nodes whose loss differential is identically zero get a ``nan`` statistic
    and a raw p-value of 1.
    """
    if a.actual.shape != b.actual.shape or not np.array_equal(a.times, b.times):
        raise PreconditionError("reports cover different evaluation windows")
    if not np.array_equal(a.actual, b.actual):
        raise PreconditionError("reports disagree on the observed counts")
    if a.horizon != b.horizon:
        raise PreconditionError("reports use different horizons")
    (name_a, pa), = list(a.predictions.items())[:1]
    (name_b, pb), = list(b.predictions.items())[:1]
    if name_a == name_b:
        name_a, name_b = f"{name_a}_a", f"{name_b}_b"
    d = a.actual.shape[1]
    stat = np.full(d, np.nan)
    pval = np.ones(d)
    flags = []
    for i in range(d):
        try:
            res = diebold_mariano(pa[:, i] - a.actual[:, i], pb[:, i] - b.actual[:, i],
                                  a.horizon, harvey)
            stat[i], pval[i] = res.statistic, res.pvalue
        except DegenerateLossDifferential:
            flags.append(f"node {a.names[i]}: identical losses, DM undefined")
    bics = {}
    for src, old, new in ((a, list(a.predictions)[0], name_a), (b, list(b.predictions)[0], name_b)):
        if old in src.bic:
            bics[new] = src.bic[old]
    return ForecastReport(a.horizon, a.origin, a.times, a.actual, {name_a: pa, name_b: pb},
                          {name_a: a.rmse[list(a.predictions)[0]],
                           name_b: b.rmse[list(b.predictions)[0]]},
                          bics, a.names, stat, pval, bh_adjust(pval), flags)
