"""Experiment harness: seeded task trees, worker pools, reports.

Every experiment maps a config onto a fixed list of tasks, each seeded by
substream(root, task_index) regardless of how many workers execute them,
so report.json and census.csv are byte-identical across worker counts.
Per-sample streams hang off the task stream; child 0 draws the object
under study, child 1 the audit coin, child 2 any auxiliary randomness.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .events import (
    attribute_cause,
    binomial_bounds,
    detect_level_set_pairs,
    detect_zero_lines,
    e_col_holds,
    e_sum_holds,
    in_lemma_regime,
    support_counts,
    theory_leading_order,
)
from .laws import DegenerateLaw, DiscreteLaw, LawFormatError, load_law, standardize
from .linalg import det_screen, exact_rank, spectral_norm_deviation
from .rud import distance_kernel_check, rud_estimate
from .sampling import RngStream, sample_matrix, substream
from .vectors import (
    LambdaSpec,
    OutOfRegime,
    ZeroScaleEntry,
    classify,
    coverage_check,
    derive_params,
    gradual_nonconstant,
    growth_g,
    lambda_member,
    sample_lambda,
)

try:  # 3.11+
    import tomllib as _toml
except ImportError:  # pragma: no cover
    import tomli as _toml


OUT_ENV_VAR = "SINGLAB_OUT"

EXPERIMENTS = (
    "singularity",
    "smin_tail",
    "events",
    "classify_coverage",
    "rud_profile",
    "kernel_profile",
    "lattice_ud",
    "concentration",
    "distance_kernel",
)

DEFAULT_CALIBRATION = {
    "C0": 1.0,
    "C_tau": 3.0,
    "C1_cal": 16.0,
    "C2_cal": 16.0,
    "K1": 10.0,
    "K2": 8.0,
    "r": 0.25,
    "delta": 0.05,
    "rho": 0.25,
    "audit_fraction": 0.01,
    "screen_margin": 1e6,
}

_DISTANCE_DEFAULT_GRID = [
    [s, k, 0.0, 2.0, eps]
    for s in (0.3, 0.7, 1.3, 2.1, 3.7)
    for k in (20, 50)
    for eps in (0.02, 0.05)
]

DEFAULT_PARAMS = {
    "singularity": {},
    "smin_tail": {"t_grid": [0.1, 1.0]},
    "events": {"ecol_m": 3, "ecol_l": 2, "pair_max_n": 64},
    "classify_coverage": {"exhaustive_r": False},
    "rud_profile": {"m": 4, "n_sequences": 16, "t_max": 16.0, "jitter": 0.01},
    "kernel_profile": {"n_sequences": 12, "t_max": 16.0},
    "lattice_ud": {
        "k": 2,
        "m": 4,
        "n_list": [16, 24, 32],
        "C_grid": [1.0, 2.0, 4.0, 8.0],
        "h": 0.5,
        "g_cap": 3.0,
        "d_ref": 50,
        "K1": 0.25,
        "n_sequences": 8,
        "alpha": 0.1,
    },
    "concentration": {
        "binomial_grid": [
            [600, 0.09, 3.0],
            [600, 0.09, 4.0],
            [1000, 0.06, 3.0],
            [1000, 0.06, 4.0],
            [1000, 0.09, 3.0],
            [1000, 0.09, 4.0],
            [2000, 0.03, 3.0],
            [2000, 0.03, 4.0],
            [2000, 0.06, 3.0],
            [2000, 0.06, 4.0],
            [2000, 0.09, 3.0],
            [2000, 0.09, 4.0],
        ],
        "e_sum_n": 200,
        "spectral_n_list": [100, 200, 400],
        "spectral_samples": 50,
    },
    "distance_kernel": {"grid": _DISTANCE_DEFAULT_GRID, "include_exhaustive": True},
}

# chunk sizes are part of the seeding layout, never derived from workers
_CHUNK = {
    "singularity": 2048,
    "smin_tail": 2048,
    "events": 512,
    "classify_coverage": 512,
    "rud_profile": 8,
    "kernel_profile": 16,
    "lattice_ud": 4,
    "concentration": 256,
    "distance_kernel": 1,
}


class ConfigError(ValueError):
    """Bad or missing experiment configuration."""


class AuditFailure(RuntimeError):
    """The float screen declared a sample safe that is exactly singular."""


class DegenerateKernel(RuntimeError):
    """Columns 2..n span less than a hyperplane (kernel dimension > 1)."""


@dataclass
class ExperimentConfig:
    experiment: str
    law_path: str
    n: int
    samples: int
    seed: int
    workers: int
    out_dir: str | None
    params: dict
    calibration: dict
    law: DiscreteLaw | None = None
    zeta: object = None  # raw pmf, distance_kernel only
    law_tag: str = ""


def _merge(base: dict, extra) -> dict:
    out = dict(base)
    if extra:
        out.update(extra)
    return out


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read a TOML config (optional) and apply CLI overrides on top."""
    overrides = overrides or {}
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = _toml.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    def pick(key, default=None):
        ov = overrides.get(key)
        return ov if ov is not None else data.get(key, default)

    experiment = pick("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; expected one of {', '.join(EXPERIMENTS)}"
        )
    law_path = pick("law")
    if not law_path:
        raise ConfigError("no law file given (set law= in the config or pass --law)")
    n = int(pick("n", 0))
    samples = int(pick("samples", 1000))
    seed = int(pick("seed", 0))
    workers = int(pick("workers", 1))
    out_dir = overrides.get("out") or data.get("out")
    params = _merge(DEFAULT_PARAMS[experiment], data.get("params"))
    params = _merge(params, overrides.get("params"))
    calibration = _merge(DEFAULT_CALIBRATION, data.get("calibration"))

    if samples < 1:
        raise ConfigError("samples must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    try:
        raw = load_law(law_path)
    except OSError as exc:
        raise ConfigError(f"cannot read law file {law_path}: {exc.strerror}") from exc
    except LawFormatError as exc:
        raise ConfigError(f"bad law file {law_path}: {exc}") from exc

    law = None
    zeta = None
    if experiment == "distance_kernel":
        zeta = raw
        law_tag = ",".join(f"{v}:{m}" for v, m in raw.atoms)
    else:
        try:
            law = standardize(raw)
        except DegenerateLaw as exc:
            raise ConfigError(f"law file {law_path}: {exc}") from exc
        law_tag = law.law_id

    matrix_exps = ("singularity", "smin_tail", "events", "kernel_profile")
    if experiment in matrix_exps and n < 2:
        raise ConfigError(f"experiment {experiment} needs n >= 2 (got {n})")
    if experiment == "kernel_profile" and n > 40:
        raise ConfigError("kernel_profile is exact-arithmetic only; n must be <= 40")
    if experiment in ("classify_coverage", "rud_profile") and n < 8:
        raise ConfigError(f"experiment {experiment} needs n >= 8 (got {n})")
    if experiment == "events":
        m_j, ell = int(params["ecol_m"]), int(params["ecol_l"])
        if m_j < 1 or ell < 1 or m_j * ell > n:
            raise ConfigError("events needs ecol_m * ecol_l <= n")

    return ExperimentConfig(
        experiment=experiment,
        law_path=str(law_path),
        n=n,
        samples=samples,
        seed=seed,
        workers=workers,
        out_dir=out_dir,
        params=params,
        calibration=calibration,
        law=law,
        zeta=zeta,
        law_tag=law_tag,
    )


def config_echo(cfg: ExperimentConfig) -> dict:
    # workers and out never enter the echo or the hash
    return {
        "experiment": cfg.experiment,
        "law": cfg.law_path,
        "law_tag": cfg.law_tag,
        "n": cfg.n,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "params": _jsonable(cfg.params),
        "calibration": _jsonable(cfg.calibration),
    }


def config_hash(echo: dict) -> str:
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def resolve_out_dir(cfg: ExperimentConfig) -> str:
    if cfg.out_dir:
        return cfg.out_dir
    env = os.environ.get(OUT_ENV_VAR)
    return env if env else "./runs"


# ---------------------------------------------------------------------------
# plumbing

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _shards(total: int, chunk: int) -> list[tuple[int, int]]:
    return [(s, min(chunk, total - s)) for s in range(0, total, chunk)]


def _run_tasks(fn, ctx: dict, n_tasks: int, workers: int) -> list:
    args = [(ctx, t) for t in range(n_tasks)]
    if workers <= 1 or n_tasks <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, n_tasks)) as pool:
        return list(pool.map(fn, args))


def _se(rate: float, n: int) -> float:
    if n <= 0:
        return 0.0
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / n)


def _est(name: str, value: float, std_error: float) -> dict:
    return {"name": name, "value": float(value), "std_error": float(std_error)}


def _thy(name: str, value: float) -> dict:
    return {"name": name, "value": float(value)}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report(cfg: ExperimentConfig, estimates, theory, counts, census_rows):
    """Emit report.json and census.csv; returns (report, report_path, census_path)."""
    out = resolve_out_dir(cfg)
    os.makedirs(out, exist_ok=True)
    echo = config_echo(cfg)
    counts = dict(counts)
    counts["samples"] = len(census_rows)
    report = {
        "config": echo,
        "config_hash": config_hash(echo),
        "experiment": cfg.experiment,
        "estimates": _jsonable(estimates),
        "theory": _jsonable(theory),
        "counts": _jsonable(counts),
        "runtime_s": None,
    }
    report_path = os.path.join(out, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    census_path = os.path.join(out, "census.csv")
    with open(census_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_index", "seed_path", "singular", "cause", "smin"])
        for row in census_rows:
            w.writerow(row)
    return report, report_path, census_path


def _sample_stream(seed: int, task: int, i: int) -> RngStream:
    return substream(substream(RngStream(seed, ()), task), i)


# ---------------------------------------------------------------------------
# singularity census

def _draw_batch(law, n, seed, task, start, size):
    entries = np.empty((size, n, n), dtype=np.int64)
    audit_u = np.empty(size)
    paths = []
    task_stream = substream(RngStream(seed, ()), task)
    for i in range(size):
        ss = substream(task_stream, i)
        sample = sample_matrix(law, n, substream(ss, 0))
        entries[i] = sample.entries
        audit_u[i] = substream(ss, 1).generator().random()
        paths.append(sample.path_str())
    return entries, audit_u, paths


def _task_singularity(args):
    ctx, t = args
    law, n = ctx["law"], ctx["n"]
    start, size = ctx["tasks"][t]
    entries, audit_u, paths = _draw_batch(law, n, ctx["seed"], t, start, size)
    floats = entries.astype(float) / law.denominator
    flagged = det_screen(floats, margin=ctx["screen_margin"])
    audit = (~flagged) & (audit_u < ctx["audit_fraction"])
    zero_col = (entries == 0).all(axis=1).any(axis=1)
    zero_row = (entries == 0).all(axis=2).any(axis=1)
    rows, causes, audit_misses = [], {}, []
    singular = 0
    for i in range(size):
        cause = ""
        is_sing = False
        if flagged[i]:
            is_sing = exact_rank(entries[i]).is_singular
        elif audit[i] and exact_rank(entries[i]).is_singular:
            audit_misses.append(start + i)
            is_sing = True
        if is_sing:
            singular += 1
            cause = attribute_cause(entries[i], law).cause
            causes[cause] = causes.get(cause, 0) + 1
        rows.append((start + i, paths[i], int(is_sing), cause, ""))
    return {
        "rows": rows,
        "singular": singular,
        "causes": causes,
        "flagged": int(flagged.sum()),
        "audited": int(audit.sum()),
        "zero_col": int(zero_col.sum()),
        "zero_row": int(zero_row.sum()),
        "audit_misses": audit_misses,
    }


def _merge_counts(parts, key):
    return sum(p[key] for p in parts)


def run_singularity(cfg: ExperimentConfig):
    tasks = _shards(cfg.samples, _CHUNK["singularity"])
    ctx = {
        "law": cfg.law,
        "n": cfg.n,
        "seed": cfg.seed,
        "tasks": tasks,
        "screen_margin": cfg.calibration["screen_margin"],
        "audit_fraction": cfg.calibration["audit_fraction"],
    }
    parts = _run_tasks(_task_singularity, ctx, len(tasks), cfg.workers)
    misses = [i for p in parts for i in p["audit_misses"]]
    if misses:
        raise AuditFailure(
            f"determinant screen missed exactly singular samples at indices {misses[:20]}"
        )
    total = cfg.samples
    singular = _merge_counts(parts, "singular")
    causes: dict[str, int] = {
        k: 0 for k in ("zero_column", "zero_row", "column_pair", "row_pair", "unexplained")
    }
    for p in parts:
        for k, v in p["causes"].items():
            causes[k] = causes.get(k, 0) + v
    zero_col = _merge_counts(parts, "zero_col")
    zero_row = _merge_counts(parts, "zero_row")
    rate = singular / total
    zc_rate = zero_col / total
    zr_rate = zero_row / total
    p_s, terms = theory_leading_order(cfg.law, cfg.n)
    estimates = [
        _est("singular_rate", rate, _se(rate, total)),
        _est("zero_column_rate", zc_rate, _se(zc_rate, total)),
        _est("zero_row_rate", zr_rate, _se(zr_rate, total)),
    ]
    theory = [_thy("P_singular_leading", p_s)] + [
        _thy(k, v) for k, v in sorted(terms.items())
    ]
    counts = {
        "singular": singular,
        "flagged": _merge_counts(parts, "flagged"),
        "audited": _merge_counts(parts, "audited"),
        "audit_misses": 0,
        "zero_column_present": zero_col,
        "zero_row_present": zero_row,
        "causes": causes,
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# least singular value tail

def _task_smin(args):
    ctx, t = args
    law, n = ctx["law"], ctx["n"]
    start, size = ctx["tasks"][t]
    entries, audit_u, paths = _draw_batch(law, n, ctx["seed"], t, start, size)
    floats = entries.astype(float) / law.denominator
    flagged = det_screen(floats, margin=ctx["screen_margin"])
    audit = (~flagged) & (audit_u < ctx["audit_fraction"])
    sv = np.linalg.svd(floats, compute_uv=False)
    smin = sv[:, -1].copy()
    rows, audit_misses = [], []
    singular = 0
    for i in range(size):
        is_sing = False
        if flagged[i]:
            is_sing = exact_rank(entries[i]).is_singular
        elif audit[i] and exact_rank(entries[i]).is_singular:
            audit_misses.append(start + i)
            is_sing = True
        if is_sing:
            singular += 1
            smin[i] = 0.0
        rows.append((start + i, paths[i], int(is_sing), "", _fmt(smin[i])))
    thr = ctx["threshold"]
    below = [int((smin <= t_ * thr).sum()) for t_ in ctx["t_grid"]]
    return {
        "rows": rows,
        "singular": singular,
        "below": below,
        "flagged": int(flagged.sum()),
        "audited": int(audit.sum()),
        "audit_misses": audit_misses,
    }


def run_smin_tail(cfg: ExperimentConfig):
    t_grid = [float(t) for t in cfg.params["t_grid"]]
    threshold = math.exp(-3.0 * math.log(2.0 * cfg.n) ** 2)
    tasks = _shards(cfg.samples, _CHUNK["smin_tail"])
    ctx = {
        "law": cfg.law,
        "n": cfg.n,
        "seed": cfg.seed,
        "tasks": tasks,
        "screen_margin": cfg.calibration["screen_margin"],
        "audit_fraction": cfg.calibration["audit_fraction"],
        "threshold": threshold,
        "t_grid": t_grid,
    }
    parts = _run_tasks(_task_smin, ctx, len(tasks), cfg.workers)
    misses = [i for p in parts for i in p["audit_misses"]]
    if misses:
        raise AuditFailure(
            f"determinant screen missed exactly singular samples at indices {misses[:20]}"
        )
    total = cfg.samples
    singular = _merge_counts(parts, "singular")
    rate = singular / total
    below = [sum(p["below"][j] for p in parts) for j in range(len(t_grid))]
    p_s, _terms = theory_leading_order(cfg.law, cfg.n)
    estimates = [_est("singular_rate", rate, _se(rate, total))]
    for t_, b in zip(t_grid, below):
        r = b / total
        estimates.append(_est(f"lhs_t={t_:g}", r, _se(r, total)))
    theory = [_thy("threshold", threshold), _thy("P_singular_leading", p_s)]
    counts = {
        "singular": singular,
        "flagged": _merge_counts(parts, "flagged"),
        "audited": _merge_counts(parts, "audited"),
        "below": {f"t={t_:g}": b for t_, b in zip(t_grid, below)},
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# structured events census

def _task_events(args):
    ctx, t = args
    law, n = ctx["law"], ctx["n"]
    start, size = ctx["tasks"][t]
    m_j, ell = ctx["ecol_m"], ctx["ecol_l"]
    lo, hi = ctx["window"]
    task_stream = substream(RngStream(ctx["seed"], ()), t)
    rows = []
    zero_line = esum = ecol = pairs_present = 0
    cols_in_window = 0
    for i in range(size):
        ss = substream(task_stream, i)
        sample = sample_matrix(law, n, substream(ss, 0))
        e = sample.entries
        zc, zr = detect_zero_lines(e)
        zl = bool(zc or zr)
        zero_line += zl
        es = e_sum_holds(e, law)
        esum += es
        gen2 = substream(ss, 2).generator()
        perm = gen2.permutation(n)
        J1 = perm[:m_j].tolist()
        J2 = perm[m_j : m_j * ell].tolist()
        ec = e_col_holds(e, law, J1, J2)
        ecol += ec
        sc = support_counts(e, law)
        cols_in_window += int(((sc >= lo) & (sc <= hi)).sum())
        pp = False
        if ctx["check_pairs"]:
            pp = bool(detect_level_set_pairs(e, law)) or bool(
                detect_level_set_pairs(e.T, law)
            )
            pairs_present += pp
        cause = "zero_line" if zl else ("pair" if pp else "")
        rows.append((start + i, sample.path_str(), 0, cause, ""))
    return {
        "rows": rows,
        "zero_line": zero_line,
        "e_sum": esum,
        "e_col": ecol,
        "pairs": pairs_present,
        "cols_in_window": cols_in_window,
    }


def run_events(cfg: ExperimentConfig):
    n, law = cfg.n, cfg.law
    d_exact = Fraction(str(law.p)) * n
    window = (math.ceil(d_exact / 8), math.floor(8 * d_exact))
    tasks = _shards(cfg.samples, _CHUNK["events"])
    ctx = {
        "law": law,
        "n": n,
        "seed": cfg.seed,
        "tasks": tasks,
        "ecol_m": int(cfg.params["ecol_m"]),
        "ecol_l": int(cfg.params["ecol_l"]),
        "window": window,
        "check_pairs": n <= int(cfg.params["pair_max_n"]),
    }
    parts = _run_tasks(_task_events, ctx, len(tasks), cfg.workers)
    total = cfg.samples
    zl = _merge_counts(parts, "zero_line")
    es = _merge_counts(parts, "e_sum")
    ec = _merge_counts(parts, "e_col")
    pp = _merge_counts(parts, "pairs")
    cw = _merge_counts(parts, "cols_in_window")
    pn = law.p * n
    _, terms = theory_leading_order(law, n)
    col_rate = cw / (total * n)
    estimates = [
        _est("zero_line_rate", zl / total, _se(zl / total, total)),
        _est("e_sum_rate", es / total, _se(es / total, total)),
        _est("e_col_rate", ec / total, _se(ec / total, total)),
        _est("support_window_rate", col_rate, _se(col_rate, total * n)),
        _est("pair_rate", pp / total, _se(pp / total, total)),
    ]
    _t, _u, exact_window, window_bound = binomial_bounds(n, law.p, 3.0)
    theory = [
        _thy("P_zero_line_lower", terms["P_zero_line_lower"]),
        _thy("P_zero_line_upper", terms["P_zero_line_upper"]),
        _thy("e_sum_lower", 1.0 - math.exp(-2.7 * pn)),
        _thy("e_col_lower", 1.0 - math.exp(-2.0 * pn)),
        _thy("support_window_exact", exact_window),
        _thy("support_window_lower", window_bound),
    ]
    counts = {
        "zero_line_present": zl,
        "e_sum_holds": es,
        "e_col_holds": ec,
        "pairs_present": pp,
        "columns_in_window": cw,
        "window": [window[0], window[1]],
        "pairs_checked": ctx["check_pairs"],
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# classifier coverage

def _task_coverage(args):
    ctx, t = args
    start, size = ctx["tasks"][t]
    stream = substream(RngStream(ctx["seed"], ()), t)
    rep = coverage_check(
        ctx["params_obj"],
        size,
        stream,
        exhaustive_r=ctx["exhaustive_r"],
        return_tags=True,
    )
    rows = [
        (start + i, stream.path_str(), 0, tag, "")
        for i, tag in enumerate(rep["tags"])
    ]
    for ce in rep["counterexamples"]:
        ce["trial"] += start
    rep["rows"] = rows
    return rep


def run_classify_coverage(cfg: ExperimentConfig):
    cal = cfg.calibration
    try:
        params_obj = derive_params(
            cfg.n,
            cfg.law.p,
            cfg.law,
            r=cal["r"],
            delta=cal["delta"],
            rho=cal["rho"],
            C_tau=cal["C_tau"],
            C0=cal["C0"],
        )
    except OutOfRegime as exc:
        raise ConfigError(f"(n={cfg.n}, p={cfg.law.p}) is outside the regime: {exc}") from exc
    tasks = _shards(cfg.samples, _CHUNK["classify_coverage"])
    ctx = {
        "seed": cfg.seed,
        "tasks": tasks,
        "params_obj": params_obj,
        "exhaustive_r": bool(cfg.params["exhaustive_r"]),
    }
    parts = _run_tasks(_task_coverage, ctx, len(tasks), cfg.workers)
    degenerate = _merge_counts(parts, "degenerate")
    vn = _merge_counts(parts, "vn")
    remainder = _merge_counts(parts, "remainder")
    covered = _merge_counts(parts, "covered")
    class_counts: dict[str, int] = {}
    gen_counts: dict[str, int] = {}
    for p in parts:
        for k, v in p["class_counts"].items():
            class_counts[k] = class_counts.get(k, 0) + v
        for k, v in p["generator_counts"].items():
            gen_counts[k] = gen_counts.get(k, 0) + v
    counterexamples = [ce for p in parts for ce in p["counterexamples"]][:10]
    frac = covered / remainder if remainder else 1.0
    vn_frac = vn / cfg.samples
    estimates = [
        _est("fraction_covered", frac, _se(frac, remainder)),
        _est("vn_fraction", vn_frac, _se(vn_frac, cfg.samples)),
    ]
    counts = {
        "degenerate": degenerate,
        "vn": vn,
        "remainder": remainder,
        "covered": covered,
        "class_counts": dict(sorted(class_counts.items())),
        "generator_counts": dict(sorted(gen_counts.items())),
        "counterexamples": counterexamples,
        "exhaustive_r": bool(cfg.params["exhaustive_r"]),
        "grid": list(params_obj.n_grid),
        "kappa": params_obj.kappa,
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, [], counts, rows


# ---------------------------------------------------------------------------
# randomized degree on structured vectors

def _task_rud_profile(args):
    ctx, t = args
    law, n = ctx["law"], ctx["n"]
    start, size = ctx["tasks"][t]
    rho, jitter = ctx["rho"], ctx["jitter"]
    task_stream = substream(RngStream(ctx["seed"], ()), t)
    rows, values, errors = [], [], []
    violations = capped = 0
    for i in range(size):
        ss = substream(task_stream, i)
        gen = substream(ss, 0).generator()
        q = n // 2
        v = np.concatenate([np.full(q, 1.0 + rho), np.full(n - q, 1.0 - rho)])
        v += jitter * gen.uniform(-1.0, 1.0, n)
        v = v[gen.permutation(n)]
        member, _w = gradual_nonconstant(v, 50.0, ctx["r"], ctx["delta"], rho)
        if not member:
            violations += 1
        est = rud_estimate(
            v,
            law,
            ctx["m"],
            ctx["K1"],
            ctx["K2"],
            ctx["n_sequences"],
            substream(ss, 1),
            t_max=ctx["t_max"],
        )
        values.append(est.value)
        errors.append(est.std_error)
        capped += est.capped
        rows.append((start + i, ss.path_str(), 0, "vn", ""))
    return {
        "rows": rows,
        "values": values,
        "errors": errors,
        "violations": violations,
        "capped": capped,
    }


def run_rud_profile(cfg: ExperimentConfig):
    cal = cfg.calibration
    m = int(cfg.params["m"])
    tasks = _shards(cfg.samples, _CHUNK["rud_profile"])
    ctx = {
        "law": cfg.law,
        "n": cfg.n,
        "seed": cfg.seed,
        "tasks": tasks,
        "m": m,
        "K1": cal["K1"],
        "K2": cal["K2"],
        "rho": cal["rho"],
        "r": cal["r"],
        "delta": cal["delta"],
        "jitter": float(cfg.params["jitter"]),
        "n_sequences": int(cfg.params["n_sequences"]),
        "t_max": float(cfg.params["t_max"]),
    }
    parts = _run_tasks(_task_rud_profile, ctx, len(tasks), cfg.workers)
    values = [v for p in parts for v in p["values"]]
    errors = [e for p in parts for e in p["errors"]]
    violations = _merge_counts(parts, "violations")
    const_stream = substream(substream(RngStream(cfg.seed, ()), len(tasks)), 0)
    const = rud_estimate(
        np.ones(cfg.n),
        cfg.law,
        m,
        cal["K1"],
        cal["K2"],
        ctx["n_sequences"],
        const_stream,
        t_max=ctx["t_max"],
    )
    arr = np.array(values)
    sqrt_m = math.sqrt(m)
    below = int(sum(v < sqrt_m - 3.0 * e for v, e in zip(values, errors)))
    estimates = [
        _est("ud_min", float(arr.min()), 0.0),
        _est("ud_mean", float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0),
        _est("ud_median", float(np.quantile(arr, 0.5)), 0.0),
        _est("ud_constant", const.value, const.std_error),
    ]
    theory = [_thy("sqrt_m", sqrt_m), _thy("ud_floor", cal["K1"] / 2.0)]
    counts = {
        "m": m,
        "below_threshold": below,
        "vn_violations": violations,
        "capped": _merge_counts(parts, "capped"),
        "ud_values": [round(v, 9) for v in values],
        "ud_std_errors": [round(e, 9) for e in errors],
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# kernel vector profile (exact arithmetic)

def kernel_vector(entries) -> tuple[list[Fraction], bool]:
    """Exact normal vector to the span of columns 2..n.

    Solves B^T x = 0 over the rationals for B = entries[:, 1:].  Returns
    the lexicographically first kernel basis vector (first free variable
    set to 1, later ones to 0) and a flag set when the kernel dimension
    exceeds 1.
    """
    e = np.asarray(entries)
    n = e.shape[0]
    rows = [[Fraction(int(e[i, j])) for i in range(n)] for j in range(1, n)]
    nrows, ncols = len(rows), n
    pivots: list[tuple[int, int]] = []
    rank = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, nrows) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = rows[rank][col]
        rows[rank] = [v / inv for v in rows[rank]]
        for r in range(nrows):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        pivots.append((rank, col))
        rank += 1
        if rank == nrows:
            break
    pivot_cols = {c for _, c in pivots}
    free = [c for c in range(ncols) if c not in pivot_cols]
    if not free:
        raise DegenerateKernel("columns 2..n have full column rank n; no kernel vector")
    f0 = free[0]
    x = [Fraction(0)] * ncols
    x[f0] = Fraction(1)
    for r, c in pivots:
        x[c] = -rows[r][f0]
    return x, len(free) > 1


def _task_kernel(args):
    ctx, t = args
    law, n = ctx["law"], ctx["n"]
    start, size = ctx["tasks"][t]
    task_stream = substream(RngStream(ctx["seed"], ()), t)
    rows, values = [], {m: [] for m in ctx["m_values"]}
    degenerate = capped = 0
    class_counts: dict[str, int] = {}
    for i in range(size):
        ss = substream(task_stream, i)
        sample = sample_matrix(law, n, substream(ss, 0))
        x, degen = kernel_vector(sample.entries)
        degenerate += degen
        xf = np.array([float(v) for v in x])
        try:
            tag = classify(xf, ctx["params_obj"]).tag()
        except ZeroScaleEntry:
            tag = "degenerate_scale"
        class_counts[tag] = class_counts.get(tag, 0) + 1
        norm = math.sqrt(float(xf @ xf))
        y = xf / norm
        for j, m in enumerate(ctx["m_values"]):
            est = rud_estimate(
                y,
                law,
                m,
                ctx["K1"],
                ctx["K2"],
                ctx["n_sequences"],
                substream(ss, 2 + j),
                t_max=ctx["t_max"],
            )
            values[m].append(est.value)
            capped += est.capped
        rows.append((start + i, sample.path_str(), int(degen), tag, ""))
    return {
        "rows": rows,
        "values": values,
        "degenerate": degenerate,
        "capped": capped,
        "class_counts": class_counts,
    }


def run_kernel_profile(cfg: ExperimentConfig):
    cal = cfg.calibration
    n, law = cfg.n, cfg.law
    pn = law.p * n
    m_lo = max(1, math.ceil(pn / 8.0))
    m_hi = max(1, min(math.floor(8.0 * pn), n // 2))
    m_values = sorted({min(m_lo, n // 2) or 1, m_hi})
    m_values = [m for m in m_values if m >= 1]
    params_obj = derive_params(
        n,
        law.p,
        law,
        r=cal["r"],
        delta=cal["delta"],
        rho=cal["rho"],
        C_tau=cal["C_tau"],
        C0=cal["C0"],
        clamp=True,
    )
    tasks = _shards(cfg.samples, _CHUNK["kernel_profile"])
    ctx = {
        "law": law,
        "n": n,
        "seed": cfg.seed,
        "tasks": tasks,
        "m_values": m_values,
        "params_obj": params_obj,
        "K1": cal["K1"],
        "K2": cal["K2"],
        "n_sequences": int(cfg.params["n_sequences"]),
        "t_max": float(cfg.params["t_max"]),
    }
    parts = _run_tasks(_task_kernel, ctx, len(tasks), cfg.workers)
    degenerate = _merge_counts(parts, "degenerate")
    class_counts: dict[str, int] = {}
    for p in parts:
        for k, v in p["class_counts"].items():
            class_counts[k] = class_counts.get(k, 0) + v
    const_root = substream(RngStream(cfg.seed, ()), len(tasks))
    y0 = np.ones(n) / math.sqrt(n)
    estimates, theory = [], []
    for j, m in enumerate(m_values):
        vals = np.array([v for p in parts for v in p["values"][m]])
        const = rud_estimate(
            y0,
            law,
            m,
            cal["K1"],
            cal["K2"],
            ctx["n_sequences"],
            substream(const_root, j),
            t_max=ctx["t_max"],
        )
        med = float(np.quantile(vals, 0.5))
        estimates.append(_est(f"ud_median_m={m}", med, 0.0))
        estimates.append(_est(f"ud_constant_m={m}", const.value, const.std_error))
        factor = med / const.value if const.value > 0 else math.inf
        estimates.append(_est(f"median_factor_m={m}", factor, 0.0))
        theory.append(_thy(f"sqrt_m_m={m}", math.sqrt(m)))
    counts = {
        "degenerate_kernels": degenerate,
        "capped": _merge_counts(parts, "capped"),
        "class_counts": dict(sorted(class_counts.items())),
        "m_values": m_values,
        "clamped_params": params_obj.clamped,
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# degree decay over lattice vectors

class _CappedGrowth:
    """Picklable envelope min(g(t, d), cap)."""

    def __init__(self, d: float, cap: float):
        self.d = d
        self.cap = cap

    def __call__(self, t: float) -> float:
        return min(float(growth_g(t, self.d)), self.cap)


def _lattice_spec(n: int, ctx: dict) -> LambdaSpec:
    q = max(1, math.ceil(ctx["delta"] * n))
    return LambdaSpec(
        k=ctx["k"],
        g=_CappedGrowth(ctx["d_ref"], ctx["g_cap"]),
        Q1=tuple(range(q)),
        Q2=tuple(range(n - q, n)),
        rho=ctx["rho"],
        sigma=tuple(range(n)),
        h=ctx["h"],
    )


def _task_lattice(args):
    ctx, t = args
    start, size = ctx["tasks"][t]
    draws = ctx["draws"]
    task_stream = substream(RngStream(ctx["seed"], ()), t)
    rows, recs = [], []
    membership_failures = capped = 0
    for i in range(size):
        u = start + i
        n = ctx["n_list"][u // draws]
        ss = substream(task_stream, i)
        spec = _lattice_spec(n, ctx)
        x = sample_lambda(spec, substream(ss, 0))
        if not lambda_member(spec, x):
            membership_failures += 1
        est = rud_estimate(
            x,
            ctx["law"],
            ctx["m"],
            ctx["K1"],
            ctx["K2"],
            ctx["n_sequences"],
            substream(ss, 1),
            t_max=ctx["t_max"],
            alpha=ctx["alpha"],
        )
        recs.append((n, est.value))
        capped += est.capped
        rows.append((u, ss.path_str(), 0, f"n={n}", ""))
    return {
        "rows": rows,
        "recs": recs,
        "membership_failures": membership_failures,
        "capped": capped,
    }


def run_lattice_ud(cfg: ExperimentConfig):
    prm, cal = cfg.params, cfg.calibration
    n_list = [int(v) for v in prm["n_list"]]
    C_grid = [float(c) for c in prm["C_grid"]]
    k, m = int(prm["k"]), int(prm["m"])
    draws = cfg.samples
    units = draws * len(n_list)
    thresholds = {c: k * math.sqrt(m) / c for c in C_grid}
    tasks = _shards(units, _CHUNK["lattice_ud"])
    ctx = {
        "law": cfg.law,
        "seed": cfg.seed,
        "tasks": tasks,
        "n_list": n_list,
        "draws": draws,
        "k": k,
        "m": m,
        "h": float(prm["h"]),
        "g_cap": float(prm["g_cap"]),
        "d_ref": float(prm["d_ref"]),
        "K1": float(prm["K1"]),
        "K2": cal["K2"],
        "rho": cal["rho"],
        "delta": cal["delta"],
        "n_sequences": int(prm["n_sequences"]),
        "t_max": 1.3 * max(thresholds.values()),
        "alpha": float(prm["alpha"]),
    }
    parts = _run_tasks(_task_lattice, ctx, len(tasks), cfg.workers)
    membership_failures = _merge_counts(parts, "membership_failures")
    recs = [r for p in parts for r in p["recs"]]
    by_n: dict[int, list[float]] = {n: [] for n in n_list}
    for n, v in recs:
        by_n[n].append(v)
    estimates, theory, hits = [], [], {}
    for n in n_list:
        vals = np.array(by_n[n])
        estimates.append(_est(f"ud_median_n={n}", float(np.quantile(vals, 0.5)), 0.0))
        for c in C_grid:
            frac = float((vals <= thresholds[c]).mean())
            estimates.append(_est(f"frac_n={n}_C={c:g}", frac, _se(frac, vals.size)))
            hits[f"n={n}_C={c:g}"] = int((vals <= thresholds[c]).sum())
    for c in C_grid:
        theory.append(_thy(f"threshold_C={c:g}", thresholds[c]))
    counts = {
        "draws_per_n": draws,
        "k": k,
        "m": m,
        "hits": hits,
        "capped": _merge_counts(parts, "capped"),
        "membership_failures": membership_failures,
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# concentration diagnostics

def _task_concentration(args):
    ctx, t = args
    law = ctx["law"]
    start, size = ctx["tasks"][t]
    e_total = ctx["e_samples"]
    sp_each = ctx["spectral_samples"]
    task_stream = substream(RngStream(ctx["seed"], ()), t)
    rows, ratios = [], []
    esum = 0
    for i in range(size):
        u = start + i
        ss = substream(task_stream, i)
        if u < e_total:
            n = ctx["e_sum_n"]
            sample = sample_matrix(law, n, substream(ss, 0))
            ok = e_sum_holds(sample.entries, law)
            esum += ok
            rows.append((u, sample.path_str(), 0, "e_sum", ""))
        else:
            v = u - e_total
            n = ctx["spectral_n_list"][v // sp_each]
            sample = sample_matrix(law, n, substream(ss, 0))
            ratio = spectral_norm_deviation(sample, law) / math.sqrt(law.p * n)
            ratios.append((n, ratio))
            rows.append((u, sample.path_str(), 0, f"spectral_n={n}", _fmt(ratio)))
    return {"rows": rows, "e_sum": esum, "ratios": ratios}


def run_concentration(cfg: ExperimentConfig):
    prm = cfg.params
    law = cfg.law
    grid = [(int(g[0]), float(g[1]), float(g[2])) for g in prm["binomial_grid"]]
    table, tail_viol, window_viol = [], 0, 0
    for bn, bp, btau in grid:
        exact_tail, upper, exact_window, lower = binomial_bounds(bn, bp, btau)
        tail_ok = exact_tail <= upper
        window_ok = exact_window >= lower
        tail_viol += not tail_ok
        window_viol += not window_ok
        table.append(
            {
                "n": bn,
                "p": bp,
                "tau": btau,
                "exact_tail": exact_tail,
                "tail_bound": upper,
                "exact_window": exact_window,
                "window_bound": lower,
                "in_regime": in_lemma_regime(bn, bp, btau),
                "tail_ok": tail_ok,
                "window_ok": window_ok,
            }
        )
    e_sum_n = int(prm["e_sum_n"])
    sp_list = [int(v) for v in prm["spectral_n_list"]]
    sp_each = int(prm["spectral_samples"])
    units = cfg.samples + len(sp_list) * sp_each
    tasks = _shards(units, _CHUNK["concentration"])
    ctx = {
        "law": law,
        "seed": cfg.seed,
        "tasks": tasks,
        "e_samples": cfg.samples,
        "e_sum_n": e_sum_n,
        "spectral_n_list": sp_list,
        "spectral_samples": sp_each,
    }
    parts = _run_tasks(_task_concentration, ctx, len(tasks), cfg.workers)
    esum = _merge_counts(parts, "e_sum")
    ratios: dict[int, list[float]] = {n: [] for n in sp_list}
    for p in parts:
        for n, v in p["ratios"]:
            ratios[n].append(v)
    rate = esum / cfg.samples
    estimates = [_est("e_sum_rate", rate, _se(rate, cfg.samples))]
    for n in sp_list:
        vals = np.array(ratios[n])
        estimates.append(_est(f"spectral_median_n={n}", float(np.quantile(vals, 0.5)), 0.0))
        estimates.append(_est(f"spectral_q99_n={n}", float(np.quantile(vals, 0.99)), 0.0))
    theory = [_thy("e_sum_lower", 1.0 - math.exp(-2.7 * law.p * e_sum_n))]
    counts = {
        "binomial_table": table,
        "tail_violations": tail_viol,
        "window_violations": window_viol,
        "e_sum_holds": esum,
        "e_sum_samples": cfg.samples,
        "spectral_samples_per_n": sp_each,
    }
    rows = [r for p in parts for r in p["rows"]]
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------
# distance kernel grid

def _task_distance(args):
    ctx, t = args
    pt = ctx["points"][t]
    stream = substream(RngStream(ctx["seed"], ()), t)
    emp, bound = distance_kernel_check(
        ctx["zeta"],
        pt["s"],
        pt["k"],
        pt["h1"],
        pt["h2"],
        pt["eps"],
        ctx["trials"],
        stream,
        exhaustive=pt["exhaustive"],
    )
    total = (
        math.floor(pt["k"] * pt["h2"] + 1e-9) - math.ceil(pt["k"] * pt["h1"] - 1e-9) + 1
        if pt["exhaustive"]
        else ctx["trials"]
    )
    return {
        "point": dict(pt, empirical=emp, bound=bound, matches=round(emp * total), total=total),
        "path": stream.path_str(),
    }


def run_distance_kernel(cfg: ExperimentConfig):
    points = []
    if cfg.params["include_exhaustive"]:
        points.append(
            {"s": 0.5, "k": 100, "h1": 0.0, "h2": 2.0, "eps": 0.01, "exhaustive": True}
        )
    for g in cfg.params["grid"]:
        s, k, h1, h2, eps = float(g[0]), int(g[1]), float(g[2]), float(g[3]), float(g[4])
        points.append({"s": s, "k": k, "h1": h1, "h2": h2, "eps": eps, "exhaustive": False})
    ctx = {"zeta": cfg.zeta, "seed": cfg.seed, "points": points, "trials": cfg.samples}
    parts = _run_tasks(_task_distance, ctx, len(points), cfg.workers)
    estimates, theory, out_points, rows = [], [], [], []
    fitted = 0.0
    for t, p in enumerate(parts):
        pt = p["point"]
        tag = f"s={pt['s']:g}_k={pt['k']}_eps={pt['eps']:g}"
        ntrials = pt["total"]
        se = 0.0 if pt["exhaustive"] else _se(pt["empirical"], ntrials)
        estimates.append(_est(f"emp_{tag}", pt["empirical"], se))
        theory.append(_thy(f"bound_{tag}", pt["bound"]))
        if math.isfinite(pt["bound"]) and pt["bound"] > 0:
            fitted = max(fitted, pt["empirical"] / pt["bound"])
        out_points.append(pt)
        rows.append((t, p["path"], 0, tag, ""))
    estimates.append(_est("fitted_C", fitted, 0.0))
    counts = {"points": out_points, "trials_per_point": cfg.samples}
    return estimates, theory, counts, rows


# ---------------------------------------------------------------------------

RUNNERS = {
    "singularity": run_singularity,
    "smin_tail": run_smin_tail,
    "events": run_events,
    "classify_coverage": run_classify_coverage,
    "rud_profile": run_rud_profile,
    "kernel_profile": run_kernel_profile,
    "lattice_ud": run_lattice_ud,
    "concentration": run_concentration,
    "distance_kernel": run_distance_kernel,
}


def run_experiment(cfg: ExperimentConfig):
    """Run one experiment end to end; returns (report, report_path, census_path)."""
    estimates, theory, counts, rows = RUNNERS[cfg.experiment](cfg)
    return write_report(cfg, estimates, theory, counts, rows)
