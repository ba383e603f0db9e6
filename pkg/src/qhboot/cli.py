"""Command-line interface.

Exit codes: 0 success, 1 experiment verdict failed, 2 bad input or config,
3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from qhboot.bootstrap import BootstrapScheme, draw_weights
from qhboot.datagen import AR1, IID
from qhboot.errors import ConfigError, QHBootError
from qhboot.functionals import DistortionFunction, Normal, Uniform, parse_functional
from qhboot.harness import (
    ExperimentConfig,
    limit_law_sample,
    plugin_values,
    process_csv,
    run_consistency,
    run_process_check,
    run_variance_check,
)
from qhboot.metrics import DiscreteMeasure, bl_distance

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class InputError(Exception):
    pass


def read_data(path: str) -> np.ndarray:
    """One decimal per line; blank lines and ``#`` comments are skipped."""
    values = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                try:
                    v = float(text)
                except ValueError:
                    raise InputError(f"{path}:{lineno}: cannot parse {text!r} as a number") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}:{lineno}: non-finite value {text!r}")
                values.append(v)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    if not values:
        raise InputError(f"{path}: no data")
    return np.array(values)


def _emit(args, payload: dict, out=None):
    out = out or sys.stdout
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(payload.keys())
        w.writerow(_fmt(v) for v in payload.values())
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _functional(text):
    try:
        return parse_functional(text)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _scheme(args) -> BootstrapScheme:
    try:
        if args.scheme == "circular":
            if args.block_length is None and args.gamma is None:
                raise InputError("circular scheme needs --block-length or --gamma")
            return BootstrapScheme("circular", gamma=args.gamma, block_length=args.block_length)
        return BootstrapScheme(args.scheme)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_estimate(args) -> int:
    x = read_data(args.data)
    f = _functional(args.functional)
    est = float(plugin_values(f, x)[0])
    _emit(args, {"functional": args.functional, "n": int(x.size), "estimate": est})
    return EXIT_OK


def cmd_bootstrap_ci(args) -> int:
    if args.B < 20:
        raise InputError("B must be at least 20 for percentile intervals")
    if not 0.0 <= args.level < 1.0:
        raise InputError("level must lie in [0, 1)")
    x = read_data(args.data)
    f = _functional(args.functional)
    scheme = _scheme(args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
    try:
        W = draw_weights(scheme, x.size, rng, size=args.B)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    draws = plugin_values(f, x, W)
    tail = (1.0 - args.level) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail])
    payload = {
        "functional": args.functional,
        "n": int(x.size),
        "estimate": float(plugin_values(f, x)[0]),
        "level": args.level,
        "lower": float(lo),
        "upper": float(hi),
        "B": args.B,
        "scheme": scheme.variant,
        "seed": args.seed,
    }
    _emit(args, payload)
    return EXIT_OK


def _load_config(args) -> ExperimentConfig:
    try:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InputError(f"{args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(d, dict):
        raise InputError(f"{args.config}: top level must be an object")
    return ExperimentConfig.from_dict(d, seed=args.seed)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_experiment(args) -> int:
    config = _load_config(args)
    try:
        if args.check == "consistency":
            report = run_consistency(config, threads=args.threads)
            csv_text, summary, ok = report.to_csv(), report.to_json(), report.passed
        elif args.check == "process":
            rep = run_process_check(config, threads=args.threads)
            csv_text = process_csv(rep)
            per_n = {str(n): {k: v for k, v in c.items() if k != "emp_stats"} for n, c in rep["per_n"].items()}
            ok = rep["verdict_decreasing"]
            summary = {"config": rep["config"], "per_n": per_n, "verdicts": {"ks_non_increasing": ok}}
        else:
            rep = run_variance_check(config)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(("b", "draw"))
            w.writerows((i, repr(float(v))) for i, v in enumerate(rep["draws"]))
            csv_text = buf.getvalue()
            summary = {k: v for k, v in rep.items() if k != "draws"}
            summary["config"] = config.to_dict()
            ok = True
    except QHBootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    json_text = json.dumps(summary, indent=2, default=float) + "\n"
    if args.out:
        _write(args.out + ".csv", csv_text)
        _write(args.out + ".json", json_text)
    else:
        sys.stdout.write(csv_text if args.format == "csv" else json_text)
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_bl(args) -> int:
    a = DiscreteMeasure.from_sample(read_data(args.file_a))
    b = DiscreteMeasure.from_sample(read_data(args.file_b))
    _emit(args, {"d_bl": bl_distance(a, b)})
    return EXIT_OK


def cmd_limit(args) -> int:
    f = _functional(args.functional)
    if not isinstance(f, DistortionFunction):
        raise InputError("limit laws are available for distortion functionals only")
    if args.rho is not None:
        model = AR1(args.rho)
    else:
        model = IID(Normal() if args.dist == "normal" else Uniform())
    config = ExperimentConfig(model, f, n_grid=(2,), N_limit=args.samples, m=args.grid, seed=args.seed)
    lim = limit_law_sample(config)
    payload = {"functional": args.functional, "variance": lim.variance, "sample_variance": float(np.var(lim.draws, ddof=1))}
    _emit(args, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qhboot", description="Bootstrap tools for distortion risk functionals.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("estimate", help="plug-in estimate f(F_n)")
    sp.add_argument("data")
    sp.add_argument("--functional", default="identity", help="identity, avar:ALPHA, power:C or variance")
    common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("bootstrap-ci", help="percentile interval of bootstrap estimates")
    sp.add_argument("data")
    sp.add_argument("--functional", default="identity")
    sp.add_argument("--scheme", choices=("efron", "bayesian", "circular"), default="efron")
    sp.add_argument("--block-length", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--B", type=int, default=2000)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--seed", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_bootstrap_ci)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--check", choices=("consistency", "process", "variance"), default="consistency")
    sp.add_argument("--seed", type=int, help="overrides the seed in the config")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
    sp.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format without --out")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("bl", help="bounded Lipschitz distance between two samples")
    sp.add_argument("file_a")
    sp.add_argument("file_b")
    common(sp)
    sp.set_defaults(func=cmd_bl)

    sp = sub.add_parser("limit", help="limit variance of the plug-in error")
    sp.add_argument("--functional", default="identity")
    sp.add_argument("--dist", choices=("normal", "uniform"), default="normal")
    sp.add_argument("--rho", type=float, help="AR(1) coefficient (Gaussian marginal)")
    sp.add_argument("--grid", type=int, default=201)
    sp.add_argument("--samples", type=int, default=5000)
    sp.add_argument("--seed", type=int, default=0, help="seed for the simulated limit sample")
    common(sp)
    sp.set_defaults(func=cmd_limit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QHBootError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
