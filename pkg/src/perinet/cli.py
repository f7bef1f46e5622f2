"""Command-line interface: ``perinet <verb> [options]``.

Exit codes: 0 on success, 2 for invalid input or configuration, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .core import load_model
from .errors import ConfigurationError, NumericError, ParseError, PerinetError, PreconditionError
from .forecast import ForecastReport
from .io import load_adjacency, load_counts

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def _write(out: Path, files: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
        print(out / name)


def _cmd_simulate(args) -> dict:
    spec = load_model(args.model)
    method = "markov" if args.markov else args.method
    couple = load_model(args.couple) if args.couple else None
    return ex.stage_simulate(spec, args.T, args.seed, args.replications, args.burn_in,
                             method, args.threads, couple)


def _cmd_stability(args) -> dict:
    return ex.stage_stability(load_model(args.model), args.lipschitz, args.m, args.margin,
                              args.n_lags, args.mode)


def _cmd_approx(args) -> dict:
    return ex.stage_approx(load_model(args.model), args.tau, args.q, args.family, args.method,
                           args.n_lags)


_FIT_FLAGS = ("period", "channel", "q", "tau", "family", "kernel_basis", "mu_basis",
              "harmonics", "mu_per_node", "periodicity", "jump_rate")


def _fit_options(args, has_network: bool) -> dict:
    """Layout options: the ``--layout`` file first, explicit flags on top."""
    opts = {}
    if args.layout:
        with open(args.layout, encoding="utf-8") as fh:
            try:
                opts = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{args.layout}: invalid JSON ({exc})") from None
        if not isinstance(opts, dict):
            raise ParseError(f"{args.layout}: expected a JSON object")
        opts.pop("network", None)
        opts.pop("d", None)
    if args.trig is not None:
        opts.update(kernel_basis="trig", mu_basis="trig", harmonics=args.trig)
    for key in _FIT_FLAGS:
        value = getattr(args, key)
        if value is not None:
            opts[key] = value
    if "period" not in opts:
        raise ConfigurationError("give --period or a layout file with a period")
    opts.setdefault("structure", "network" if has_network else "general")
    return opts


def _cmd_fit(args) -> dict:
    data = load_counts(args.data)
    net = None
    if args.adjacency:
        net = load_adjacency(args.adjacency, names=data.names, symmetric=not args.directed)
    layout = ex.build_layout(data.d, _fit_options(args, net is not None), net)
    options = ex.FitOptions(max_iter=args.max_iter, threads=args.threads)
    return ex.stage_fit(data, layout, options)[0]


def _cmd_forecast(args) -> dict:
    spec, layout, fitd = ex.load_model_or_fit(args.model)
    data = load_counts(args.data)
    bic_value = None if fitd is None else fitd.get("bic")
    return ex.stage_forecast(spec, data, args.origin, args.h, args.name, layout, args.refit,
                             bic_value, args.paths, args.seed, args.threads)[0]


def _cmd_compare(args) -> dict:
    a = ForecastReport.load(args.a)
    b = ForecastReport.load(args.b)
    return ex.stage_compare(a, b, args.harvey)[0]


def _cmd_experiment(args):
    if args.config:
        cfg = ex.ExperimentConfig.load(args.config)
        if args.out:
            cfg.out_dir = args.out
    else:
        if not args.name:
            raise ConfigurationError("give a preset name or --config")
        params = {}
        for item in args.param or []:
            key, _, value = item.partition("=")
            params[key.replace("-", "_")] = _parse_value(value)
        cfg = ex.ExperimentConfig(args.name, args.out or f"out/{args.name}", args.seed,
                                  args.threads, params)
    manifest = ex.run_experiment(cfg)
    for name in manifest["files"]:
        print(Path(cfg.out_dir) / name)
    return None


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return [_parse_value(t) for t in text.split(",")]
    return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out", default=None, help="output directory")

    ap = argparse.ArgumentParser(prog="perinet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a model")
    p.add_argument("--model", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--replications", "--reps", type=int, default=1)
    p.add_argument("--burn-in", type=int, default=0, help="burn-in length in periods")
    p.add_argument("--method", choices=["auto", "direct", "markov"], default="auto")
    p.add_argument("--markov", action="store_true", help="same as --method markov")
    p.add_argument("--couple", default=None,
                   help="second model driven by the same random stream")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stability", parents=[common], help="stability diagnostics")
    p.add_argument("--model", required=True)
    p.add_argument("--lipschitz", type=float, default=None,
                   help="Lipschitz constant (default: that of the jump rate)")
    p.add_argument("--mode", choices=["global", "periodic", "both"], default="both")
    p.add_argument("--m", type=int, default=1, help="periods kept in the companion matrices")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--n-lags", type=int, default=None)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("approx", parents=[common], help="exponential kernel approximation")
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--family", choices=["odd", "all"], default="odd")
    p.add_argument("--method", choices=["simplex", "nelder-mead"], default="simplex")
    p.add_argument("--n-lags", type=int, default=None)
    p.set_defaults(func=_cmd_approx)

    p = sub.add_parser("fit", parents=[common], help="maximum-likelihood fit")
    p.add_argument("--data", required=True, help="counts CSV")
    p.add_argument("--adjacency", default=None, help="edge list CSV (network structure)")
    p.add_argument("--directed", action="store_true", help="do not symmetrise the edge list")
    p.add_argument("--layout", default=None,
                   help="layout JSON with the options below (flags override it)")
    p.add_argument("--period", type=float, default=None)
    p.add_argument("--channel", choices=["exp", "lags"], default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--family", choices=["odd", "all"], default=None)
    p.add_argument("--kernel-basis", choices=["season", "trig", "constant"], default=None)
    p.add_argument("--mu-basis", choices=["season", "trig", "constant"], default=None)
    p.add_argument("--harmonics", type=int, default=None)
    p.add_argument("--trig", type=int, default=None, metavar="R",
                   help="trigonometric kernel and baseline bases with R harmonics")
    p.add_argument("--mu-per-node", action="store_const", const=True, default=None)
    p.add_argument("--periodicity", choices=["I", "II"], default=None)
    p.add_argument("--jump-rate", "--psi", dest="jump_rate", default=None,
                   help="identity, softplus or softplus-offset")
    p.add_argument("--max-iter", type=int, default=2000)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("forecast", parents=[common], help="rolling-origin forecasts")
    p.add_argument("--model", required=True, help="model JSON or fit JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--origin", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--refit", action="store_true", help="refit at every anchor (fit JSON only)")
    p.add_argument("--paths", type=int, default=2000, help="Monte Carlo paths (nonlinear rates)")
    p.add_argument("--name", default="model")
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("compare", parents=[common], help="DM tests between two forecast reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--harvey", action="store_true", help="small-sample corrected DM test")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("experiment", parents=[common], help="run a preset or config")
    p.add_argument("name", nargs="?", help=f"preset: {', '.join(sorted(ex.PRESETS))}")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--param", action="append", help="preset parameter KEY=VALUE")
    p.set_defaults(func=_cmd_experiment)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        files = args.func(args)
        if files is not None:
            _write(Path(args.out or "."), files)
    except NumericError as exc:
        print(f"perinet: numerical error: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(f"  diagnostics: {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, PreconditionError, ParseError, PerinetError, FileNotFoundError) as exc:
        print(f"perinet: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
