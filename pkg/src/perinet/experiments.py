"""Experiment stages, reproduction presets and bundle manifests.

A stage turns input files and options into named output texts (CSV or
JSON).  :func:`run_experiment` executes a preset or a list of stages, writes
the outputs into a bundle directory and adds ``manifest.json`` (seed,
parameters, versions, output checksums) and ``timings.json``.  Everything in
the manifest is deterministic, so re-running a configuration reproduces the
bundle byte for byte apart from ``timings.json``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy import stats

from .core import JumpRate, ModelSpec, load_model, model_to_dict
from .core.kernels import GeneralKernel
from .errors import ConfigurationError, ParseError, PerinetError
from .forecast import ForecastReport, compare_reports, rolling_forecast
from .inference import FitOptions, FitResult, Layout, estimation_errors, fit_mle, network_layout
from .io import berlin_network, load_adjacency, load_counts
from .kernelapprox import approximate_kernel, kernel_l1_distance
from .presets import heavy_tail_model, heavy_tail_target, sbm_network, seasonal_network_model, wellspec_model
from .simulate import SimulationConfig, coupling_distance, simulate_coupled, simulate_paths
from .stability import check_global, check_periodic

SCHEMA = 1


def to_json(obj) -> str:
    """Deterministic JSON text (numpy values converted, ``nan`` kept)."""
    def conv(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, (np.bool_,)):
            return bool(o)
        raise TypeError(f"not serialisable: {type(o).__name__}")
    return json.dumps(obj, indent=2, default=conv) + "\n"


def to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


# model files ---------------------------------------------------------------

def load_model_or_fit(path):
    """Read a model JSON or a fit JSON.

    Returns:
        ``(spec, layout, fit_dict)`` where ``layout`` and ``fit_dict`` are
        ``None`` for plain model files.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(data, dict) and "layout" in data and "theta" in data:
        layout = Layout.from_dict(data["layout"])
        return layout.to_model(np.asarray(data["theta"], float)), layout, data
    return load_model(path), None, None


def build_layout(d: int, options: dict, network=None) -> Layout:
    """Layout from plain options (as given on the command line or in configs)."""
    opts = dict(options)
    jr = opts.pop("jump_rate", "identity")
    jump = JumpRate.from_name(jr) if isinstance(jr, str) else JumpRate.from_dict(jr)
    period = float(opts.pop("period", 1))
    period = int(period) if period.is_integer() else period
    if network is None and opts.get("structure") == "network":
        raise ConfigurationError("network structure needs an adjacency file")
    return Layout(d=d, period=period, network=network, jump_rate=jump, **opts)


# stages ----------------------------------------------------------------------

def _series_rows(names, values, fmt) -> list:
    rows = [["t"] + names]
    rows += [[str(t + 1)] + [fmt(v) for v in row] for t, row in enumerate(values)]
    return rows


def stage_simulate(spec: ModelSpec, T: int, seed: int = 0, replications: int = 1,
                   burn_in_periods: int = 0, method: str = "auto", threads: int = 1,
                   couple: ModelSpec | None = None) -> dict:
    """Counts and intensities per replicate, plus JSON summaries.

    With ``couple`` a second model is driven by the same random stream and
    the per-step coupling distance is written as well.
    """
    if method == "auto":
        method = "markov" if getattr(spec.kernel, "is_markov", False) else "direct"
    cfg = SimulationConfig(T, seed, None, burn_in_periods, replications, threads)
    names = [f"node_{i + 1}" for i in range(spec.d)]
    if couple is None:
        outputs = {"": simulate_paths(spec, cfg, method)}
    else:
        if couple.d != spec.d:
            raise ConfigurationError("coupled models must have the same dimension")
        out_a, out_b = simulate_coupled(spec, couple, cfg, method=method)
        outputs = {"": out_a, "_b": out_b}
    files = {}
    for tag, out in outputs.items():
        for r in range(replications):
            suffix = tag + ("" if replications == 1 else f"_r{r}")
            files[f"counts_seed{seed}{suffix}.csv"] = to_csv(
                _series_rows(names, out.counts[r], lambda v: str(int(v))))
            files[f"intensities_seed{seed}{suffix}.csv"] = to_csv(
                _series_rows(names, out.intensities[r], _fmt))
        if replications > 1:
            summary = {"replications": replications, "T": T, "method": method,
                       "mean_count": out.counts.mean(axis=(0, 1)),
                       "mean_intensity": out.intensities.mean(axis=(0, 1)),
                       "var_count": out.counts.reshape(-1, spec.d).var(axis=0)}
            files[f"summary_seed{seed}{tag}.json"] = to_json(summary)
    if couple is not None:
        dist = coupling_distance(outputs[""], outputs["_b"])
        files[f"coupling_seed{seed}.json"] = to_json({"t": np.arange(1, T + 1), **dist})
    return files


def stage_stability(spec: ModelSpec, L: float | None = None, m: int = 1, margin: float = 0.0,
                    n_lags: int | None = None, mode: str = "both") -> dict:
    if mode not in ("global", "periodic", "both"):
        raise ConfigurationError(f"unknown stability mode {mode!r}")
    if mode == "periodic" and not spec.integer_period:
        raise ConfigurationError("the periodic check needs an integer period")
    L = spec.jump_rate.lipschitz if L is None else L
    out = {}
    if mode in ("global", "both"):
        out["global"] = check_global(spec.kernel, L, margin, n_lags, classify=True).to_dict()
    if mode in ("periodic", "both") and spec.integer_period:
        out["periodic"] = check_periodic(spec.kernel, L, m, margin, spec.periodicity).to_dict()
    return {"stability.json": to_json(out)}


def stage_approx(spec: ModelSpec, tau: float, q: int, family: str = "odd",
                 method: str = "simplex", n_lags: int | None = None) -> dict:
    kern, report = approximate_kernel(spec.kernel, tau, q, family, method, n_lags)
    approx = spec.replace(kernel=kern)
    return {"approx_model.json": to_json(model_to_dict(approx)),
            "approx_report.json": to_json(report.to_dict())}


def stage_fit(data, layout: Layout, options: FitOptions | None = None) -> tuple[dict, FitResult]:
    fit = fit_mle(data, layout, options)
    return {"fit.json": to_json(fit.to_dict()),
            "fit_model.json": to_json(model_to_dict(fit.spec))}, fit


def stage_forecast(spec: ModelSpec, data, origin: int, h: int, name: str = "model",
                   layout: Layout | None = None, refit: bool = False, bic_value=None,
                   paths: int = 2000, seed: int = 0, threads: int = 1) -> tuple[dict, ForecastReport]:
    fitter = None
    if refit:
        if layout is None:
            raise ConfigurationError("refitting needs a fit file that records its layout")
        fitter = lambda past: fit_mle(past, layout).spec  # noqa: E731
    roll = rolling_forecast(spec, data, origin, h, fitter, paths, seed, threads)
    report = ForecastReport.from_rolling(name, roll, data.names, bic_value)
    rows = [["t"] + list(report.names)]
    rows += [[str(int(t))] + [_fmt(v) for v in row] for t, row in zip(roll.times, roll.predictions)]
    return {"forecast_report.json": to_json(report.to_dict()),
            "forecast.csv": to_csv(rows)}, report


def stage_compare(report_a: ForecastReport, report_b: ForecastReport,
                  harvey: bool = False) -> tuple[dict, ForecastReport]:
    merged = compare_reports(report_a, report_b, harvey)
    return {"comparison.json": to_json(merged.to_dict()),
            "comparison.csv": to_csv(merged.table())}, merged


# presets ---------------------------------------------------------------------

def _line_fit(x, y) -> dict:
    res = stats.linregress(x, y)
    return {"slope": float(res.slope), "intercept": float(res.intercept),
            "r2": float(res.rvalue**2)}


def preset_fig6(seed: int = 0, threads: int = 1, n_mc: int = 500, horizon: int = 30,
                burn_in_periods: int = 50, periodicity: str = "II", max_lag: int = 60) -> dict:
    """Coupling of an empty-history start with a near-stationary start."""
    spec = seasonal_network_model(periodicity, max_lag=max_lag)
    cfg_a = SimulationConfig(horizon, seed, replications=n_mc, threads=threads)
    cfg_b = SimulationConfig(horizon, seed, burn_in_periods=burn_in_periods,
                             replications=n_mc, threads=threads)
    out_a, out_b = simulate_coupled(spec, spec, cfg_a, cfg_b)
    dist = coupling_distance(out_a, out_b)
    t = np.arange(1, horizon + 1)
    rows = [["t", "mean_abs_diff", "se_abs_diff", "mean_abs_intensity_diff",
             "se_abs_intensity_diff", "log_mean"]]
    log_mean = np.log(dist["intensity"])
    for i in range(horizon):
        rows.append([str(t[i])] + [_fmt(dist[k][i]) for k in ("raw", "raw_se", "intensity",
                                                              "intensity_se")]
                    + [_fmt(log_mean[i])])
    ok = np.isfinite(log_mean)
    fit = _line_fit(t[ok], log_mean[ok]) if ok.sum() >= 2 else {"slope": math.nan,
                                                                "intercept": math.nan, "r2": math.nan}
    fit.update({"n_mc": n_mc, "horizon": horizon, "burn_in_periods": burn_in_periods,
                "periodicity": periodicity, "points": int(ok.sum())})
    return {f"fig6_coupling_seed{seed}.csv": to_csv(rows),
            f"fig6_fit_seed{seed}.json": to_json(fit)}


def _wellspec_replicate(spec, layout, theta_true, r, seed, periods, n_lags):
    cfg = SimulationConfig(periods * int(spec.p), seed)
    data = simulate_paths(spec, cfg, "markov", reps=[r]).series(0)
    fit = fit_mle(data, layout)
    mu, _ = layout.unpack(fit.theta)
    err = estimation_errors(layout, fit.theta, theta_true, n_lags)
    return mu.ravel(), err["curve_l1"], fit.converged, fit.loglik


def preset_wellspec(seed: int = 0, threads: int = 1, replicates: int = 10, periods: int = 200,
                    tau: float = 4.0, q: int = 4, n_lags: int = 50) -> dict:
    """Repeated estimation of the well-specified period-7 network model."""
    net = sbm_network()
    spec = wellspec_model(net, tau=tau)
    layout = network_layout(net, spec.p, q, tau, jump_rate=spec.jump_rate)
    theta_true = layout.from_model(spec)

    def job(r):
        return _wellspec_replicate(spec, layout, theta_true, r, seed, periods, n_lags)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(replicates)))
    else:
        results = [job(r) for r in range(replicates)]
    p = spec.p
    mu_rows = [["replicate", "season", "mu_hat"]]
    k_rows = [["replicate", "season", "l1_alpha", "l1_beta"]]
    mus = np.array([res[0] for res in results])
    la = np.array([res[1]["alpha"] for res in results])
    lb = np.array([res[1]["beta"] for res in results])
    for r in range(replicates):
        for v in range(p):
            mu_rows.append([str(r), str(v + 1), _fmt(mus[r, v])])
            k_rows.append([str(r), str(v + 1), _fmt(la[r, v]), _fmt(lb[r, v])])
    mu_true, _ = layout.unpack(theta_true)
    summary = {
        "replicates": replicates, "periods": periods, "tau": tau, "q": q,
        "mu_true": mu_true.ravel(),
        "mu_mean": mus.mean(axis=0),
        "mu_sd": mus.std(axis=0, ddof=1) if replicates > 1 else np.zeros(p),
        "curve_l1_alpha_mean": la.mean(axis=0),
        "curve_l1_beta_mean": lb.mean(axis=0),
        "curve_l1_mean": float(np.concatenate([la, lb]).mean()),
        "converged": [bool(res[2]) for res in results],
    }
    return {f"wellspec_mu_seed{seed}.csv": to_csv(mu_rows),
            f"wellspec_kernels_seed{seed}.csv": to_csv(k_rows),
            f"wellspec_summary_seed{seed}.json": to_json(summary)}


def preset_kernel_approx(seed: int = 0, threads: int = 1, tau: float = 36.0, qs=(2, 3, 4),
                         q_sim: int = 3, truncation: int = 3, T: int = 120, n_seeds: int = 50,
                         n_lags: int = 2000, method: str = "simplex") -> dict:
    """Heavy-tailed kernel against its exponential approximants and a truncation.

    Seeds ``seed, ..., seed + n_seeds - 1`` drive independent coupled runs.
    """
    spec = heavy_tail_model(n_lags)
    target = heavy_tail_target(n_lags)
    tail = float(target[truncation:].sum())
    err_rows = [["q", "l1_error", "truncation_tail"]]
    approx = {}
    for q in sorted(set(list(qs) + [q_sim])):
        kern, rep = approximate_kernel(spec.kernel, tau, q, "odd", method, n_lags)
        approx[q] = kern
        err_rows.append([str(q), _fmt(rep.errors.max()), _fmt(tail)])
    trunc = GeneralKernel(spec.kernel.table(truncation))
    spec_bar = spec.replace(kernel=approx[q_sim])
    spec_hat = spec.replace(kernel=trunc)
    sim_rows = [["seed", "cum_err_approx", "cum_err_truncated"]]
    wins = 0
    for s in range(seed, seed + n_seeds):
        cfg = SimulationConfig(T, s)
        ya, yb = simulate_coupled(spec, spec_bar, cfg, method="direct")
        _, yc = simulate_coupled(spec, spec_hat, cfg, method="direct")
        e_bar = int(np.abs(ya.counts - yb.counts).sum())
        e_hat = int(np.abs(ya.counts - yc.counts).sum())
        wins += e_bar < e_hat
        sim_rows.append([str(s), str(e_bar), str(e_hat)])
    summary = {"tau": tau, "q_sim": q_sim, "truncation": truncation, "T": T,
               "n_seeds": n_seeds, "truncation_tail": tail,
               "l1_error": {str(q): float(kernel_l1_distance(spec.kernel, k, n_lags).max())
                            for q, k in approx.items()},
               "approx_better_fraction": wins / n_seeds}
    return {"approx_errors.csv": to_csv(err_rows),
            f"approx_coupling_seed{seed}.csv": to_csv(sim_rows),
            f"approx_summary_seed{seed}.json": to_json(summary)}


ROTAVIRUS_PERIOD = 52.18


def rotavirus_layouts(network):
    """Seasonal Markov model of order one and the PNAR(1) benchmark."""
    ours = Layout(d=network.d, period=ROTAVIRUS_PERIOD, channel="exp", q=1, tau=3.0,
                  structure="network", network=network, kernel_basis="trig", mu_basis="trig",
                  harmonics=1, mu_per_node=True)
    pnar = Layout(d=network.d, period=1, channel="lags", q=1, structure="network",
                  network=network, kernel_basis="constant", mu_basis="constant",
                  mu_per_node=True)
    return ours, pnar


def default_rotavirus_path() -> Path:
    env = os.environ.get("PERINET_ROTAVIRUS")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "data" / "rotavirus_berlin.csv"


def preset_rotavirus(seed: int = 0, threads: int = 1, data: str | None = None,
                     adjacency: str | None = None, split: int = 573, h: int = 13) -> dict:
    """Fit both models on weeks ``1..split`` and forecast the rest."""
    path = Path(data) if data else default_rotavirus_path()
    if not path.exists():
        raise ConfigurationError(f"Rotavirus counts not found at {path}; "
                                 "run scripts/fetch_rotavirus.py first")
    series = load_counts(path)
    net = (load_adjacency(adjacency, names=series.names, symmetric=True) if adjacency
           else berlin_network())
    if net.d != series.d:
        raise ConfigurationError("adjacency and counts disagree on the number of districts")
    train = series.window(series.t0, series.t0 + split)
    files, reports, bics = {}, {}, {}
    for name, layout in zip(("ours", "pnar"), rotavirus_layouts(net)):
        out, fit = stage_fit(train, layout)
        files[f"rotavirus_fit_{name}.json"] = out["fit.json"]
        bics[name] = fit.bic()
        _, reports[name] = stage_forecast(fit.spec, series, series.t0 + split - 1, h, name,
                                          bic_value=bics[name], seed=seed, threads=threads)
    out, merged = stage_compare(reports["ours"], reports["pnar"])
    files["rotavirus_comparison.json"] = out["comparison.json"]
    files["rotavirus_table.csv"] = out["comparison.csv"]
    wins = int(np.sum(merged.rmse["ours"] < merged.rmse["pnar"]))
    files["rotavirus_summary.json"] = to_json({
        "split": split, "h": h, "bic": bics, "bic_prefers_ours": bics["ours"] < bics["pnar"],
        "districts_ours_better": wins, "districts": int(series.d)})
    return files


PRESETS = {
    "fig6": preset_fig6,
    "sec5-wellspec": preset_wellspec,
    "kernel-approx": preset_kernel_approx,
    "rotavirus": preset_rotavirus,
}
ALIASES = {"fig7": "kernel-approx", "fig8": "kernel-approx", "wellspec": "sec5-wellspec"}


# orchestration ---------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """What to run and where to write it.

    Attributes:
        experiment: Preset name, or ``"custom"`` to run ``stages``.
        out_dir: Bundle directory.
        seed: Master seed (recorded in file names and the manifest).
        threads: Worker threads for stages that support them.
        params: Keyword arguments of the preset.
        stages: For custom runs, a list of dicts with a ``stage`` key
            (``simulate``, ``stability``, ``approx``, ``fit``, ``forecast``)
            and its options; file options refer to existing paths.
    """

    experiment: str
    out_dir: str
    seed: int = 0
    threads: int = 1
    params: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls(data["experiment"], data["out_dir"], int(data.get("seed", 0)),
                       int(data.get("threads", 1)), dict(data.get("params", {})),
                       list(data.get("stages", [])))
        except KeyError as exc:
            raise ParseError(f"experiment config lacks field {exc}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None


def _custom_stage(stage: dict, seed: int, threads: int) -> dict:
    opts = dict(stage)
    kind = opts.pop("stage", None)
    if kind == "simulate":
        spec = load_model(opts.pop("model"))
        if "couple" in opts:
            opts["couple"] = load_model(opts["couple"])
        return stage_simulate(spec, int(opts.pop("T")), seed=seed, threads=threads, **opts)
    if kind == "stability":
        return stage_stability(load_model(opts.pop("model")), **opts)
    if kind == "approx":
        return stage_approx(load_model(opts.pop("model")), **opts)
    if kind == "fit":
        data = load_counts(opts.pop("data"))
        adj = opts.pop("adjacency", None)
        net = load_adjacency(adj, names=data.names, symmetric=opts.pop("symmetric", True)) if adj else None
        return stage_fit(data, build_layout(data.d, opts, net))[0]
    if kind == "forecast":
        spec, layout, fitd = load_model_or_fit(opts.pop("model"))
        data = load_counts(opts.pop("data"))
        bic_value = None if fitd is None else fitd.get("bic")
        return stage_forecast(spec, data, int(opts.pop("origin")), int(opts.pop("h")),
                              layout=layout, bic_value=bic_value, seed=seed, threads=threads,
                              **opts)[0]
    raise ConfigurationError(f"unknown stage {kind!r}")


def _versions() -> dict:
    try:
        from importlib.metadata import version
        pkg = version("perinet")
    except Exception:  # not installed as a distribution
        pkg = "unknown"
    return {"perinet": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_experiment(config: ExperimentConfig) -> dict:
    """Run a preset or custom stages and write the bundle.

    On failure the files produced so far are kept and the manifest records
    ``status: failed`` with the error, which is then re-raised.

    Returns:
        The manifest dictionary.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = ALIASES.get(config.experiment, config.experiment)
    manifest = {"schema": SCHEMA, "experiment": name, "seed": config.seed,
                "params": config.params, "stages": [], "versions": _versions(),
                "files": {}, "status": "ok"}
    timings = {}
    error = None

    def emit(files: dict):
        for fname, text in files.items():
            (out / fname).write_text(text, encoding="utf-8")
            manifest["files"][fname] = hashlib.sha256(text.encode("utf-8")).hexdigest()

    try:
        if name == "custom":
            for i, stage in enumerate(config.stages):
                label = f"{i}:{stage.get('stage')}"
                manifest["stages"].append(label)
                start = time.perf_counter()
                emit({f"{i:02d}_{k}": v for k, v in
                      _custom_stage(stage, config.seed, config.threads).items()})
                timings[label] = time.perf_counter() - start
        elif name in PRESETS:
            manifest["stages"].append(name)
            start = time.perf_counter()
            emit(PRESETS[name](seed=config.seed, threads=config.threads, **config.params))
            timings[name] = time.perf_counter() - start
        else:
            raise ConfigurationError(f"unknown experiment {config.experiment!r}; "
                                     f"choose from {sorted(PRESETS) + ['custom']}")
    except (PerinetError, TypeError, OSError) as exc:
        error = exc
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
    manifest["files"] = dict(sorted(manifest["files"].items()))
    (out / "manifest.json").write_text(to_json(manifest), encoding="utf-8")
    (out / "timings.json").write_text(to_json(timings), encoding="utf-8")
    if error is not None:
        if isinstance(error, TypeError):
            raise ConfigurationError(f"bad experiment parameters: {error}") from error
        raise error
    return manifest


__all__ = [
    "ExperimentConfig", "run_experiment", "PRESETS", "ALIASES", "load_model_or_fit",
    "build_layout", "stage_simulate", "stage_stability", "stage_approx", "stage_fit",
    "stage_forecast", "stage_compare", "preset_fig6", "preset_wellspec",
    "preset_kernel_approx", "preset_rotavirus", "rotavirus_layouts", "to_json", "to_csv",
]
