"""Command line front end: experiment runners plus desk utilities."""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from .harness import (
    EXPERIMENTS,
    AuditFailure,
    ConfigError,
    load_config,
    run_experiment,
)
from .laws import LawFormatError, RawPmf, load_law, standardize
from .rud import TooLarge, levy_estimate, rud_estimate, sequence_count
from .sampling import RngStream
from .vectors import EmptyLambda, OutOfRegime, ZeroScaleEntry, classify, derive_params


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="TOML config file")
    sp.add_argument("--law", help="law file (overrides config)")
    sp.add_argument("--n", type=int, help="matrix or vector dimension")
    sp.add_argument("--samples", type=int, help="number of samples")
    sp.add_argument("--seed", type=int, help="root seed")
    sp.add_argument("--workers", type=int, help="worker processes")
    sp.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singlab",
        description="Singularity census and decomposition experiments for biased discrete random matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(sp)

    sp = sub.add_parser("classify", help="label vectors from a batch file")
    sp.add_argument("--config", help="TOML config file (calibration block)")
    sp.add_argument("--law", help="law file")
    sp.add_argument("--vectors", required=True, help="one vector per line, space-separated")
    sp.add_argument("--out", help="CSV output path (default stdout)")
    sp.add_argument("--exhaustive-r", action="store_true", help="scan every k in the R range")

    sp = sub.add_parser("rud", help="randomized degree of a single vector")
    sp.add_argument("--vector", required=True, help="file with one whitespace-separated vector")
    sp.add_argument("--m", type=int, required=True, help="block length")
    sp.add_argument("--k1", type=float, default=10.0)
    sp.add_argument("--k2", type=float, default=8.0)
    sp.add_argument("--law", help="law file (default: fair +-1 with a zero mode)")
    sp.add_argument("--sequences", type=int, default=16, help="sampled block sequences")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--t-max", type=float, default=64.0)

    sp = sub.add_parser("levy", help="empirical concentration function of scalar samples")
    sp.add_argument("--samples-file", required=True, help="file of numbers, one per line")
    sp.add_argument("--t", type=float, required=True, help="ball radius")
    return parser


def _default_rud_law():
    return standardize(
        RawPmf.from_dict({0: "1/2", 1: "1/4", -1: "1/4"}, name="fair-signed")
    )


def _read_vector(path) -> np.ndarray:
    with open(path) as fh:
        toks = fh.read().split()
    if not toks:
        raise ConfigError(f"vector file {path} is empty")
    try:
        return np.array([float(t) for t in toks])
    except ValueError as exc:
        raise ConfigError(f"vector file {path}: {exc}") from exc


def _cmd_experiment(args) -> int:
    overrides = {
        "experiment": args.command,
        "law": args.law,
        "n": args.n,
        "samples": args.samples,
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
    }
    cfg = load_config(args.config, {k: v for k, v in overrides.items() if v is not None})
    t0 = time.perf_counter()
    report, report_path, census_path = run_experiment(cfg)
    dt = time.perf_counter() - t0
    for e in report["estimates"]:
        print(f"{e['name']} = {e['value']:.6g} +- {e['std_error']:.3g}")
    print(f"report: {report_path}")
    print(f"census: {census_path}")
    print(f"runtime {dt:.1f}s", file=sys.stderr)
    return 0


def _calibration_for(args) -> dict:
    from .harness import DEFAULT_CALIBRATION, _merge, _toml

    cal = dict(DEFAULT_CALIBRATION)
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = _toml.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
        cal = _merge(cal, data.get("calibration"))
        if not args.law:
            args.law = data.get("law")
    return cal


def _cmd_classify(args) -> int:
    cal = _calibration_for(args)
    if not args.law:
        raise ConfigError("classify needs a law file (--law or law= in the config)")
    law = standardize(load_law(args.law))
    with open(args.vectors) as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["index", "class", "j", "k", "witness"])
        params_cache: dict[int, object] = {}
        for i, ln in enumerate(lines):
            x = np.array([float(t) for t in ln.split()])
            n = x.size
            if n not in params_cache:
                params_cache[n] = derive_params(
                    n,
                    law.p,
                    law,
                    r=cal["r"],
                    delta=cal["delta"],
                    rho=cal["rho"],
                    C_tau=cal["C_tau"],
                    C0=cal["C0"],
                )
            try:
                label = classify(x, params_cache[n], exhaustive_r=args.exhaustive_r)
                summary = ";".join(
                    f"{k}={_short(v)}" for k, v in sorted(label.witness.items())
                )
                w.writerow(
                    [
                        i,
                        label.tag(),
                        "" if label.j is None else label.j,
                        "" if label.k is None else label.k,
                        summary,
                    ]
                )
            except ZeroScaleEntry:
                w.writerow([i, "degenerate", "", "", "scale order statistic is zero"])
    finally:
        if args.out:
            out.close()
    return 0


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + " ".join(_short(x) for x in v) + "]"
    return str(v)


def _cmd_rud(args) -> int:
    y = _read_vector(args.vector)
    law = standardize(load_law(args.law)) if args.law else _default_rud_law()
    n, m = y.size, args.m
    try:
        if n <= 8 and sequence_count(n, m) <= 200_000:
            est = rud_estimate(y, law, m, args.k1, args.k2, exhaustive=True, t_max=args.t_max)
        else:
            est = rud_estimate(
                y,
                law,
                m,
                args.k1,
                args.k2,
                args.sequences,
                RngStream(args.seed, ()),
                t_max=args.t_max,
            )
    except (ValueError, TooLarge) as exc:
        raise ConfigError(str(exc)) from exc
    print(f"{est.value:.12g}")
    mode = "exact" if est.exact else f"sampled ({est.sequences_sampled} sequences)"
    print(f"mode={mode} std_error={est.std_error:.3g} capped={est.capped}", file=sys.stderr)
    return 0


def _cmd_levy(args) -> int:
    vals = _read_vector(args.samples_file)
    print(f"{levy_estimate(vals, args.t):.12g}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in EXPERIMENTS:
            return _cmd_experiment(args)
        if args.command == "classify":
            return _cmd_classify(args)
        if args.command == "rud":
            return _cmd_rud(args)
        if args.command == "levy":
            return _cmd_levy(args)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, LawFormatError, OutOfRegime, EmptyLambda) as exc:
        print(f"singlab: {exc}", file=sys.stderr)
        return 2
    except AuditFailure as exc:
        print(f"singlab: audit failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"singlab: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
