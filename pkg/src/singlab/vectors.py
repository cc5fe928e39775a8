"""Sphere decomposition into structured and unstructured vectors.

A unit-scale vector (largest entries pinned so the floor(r*n)-th order
statistic is 1) is routed through an exclusion chain: steep classes T0,
T1j, T2, T3 keyed to a derived index grid, then spread classes R1/R2 over
a window of cut ranks, then the gradual-nonconstant class Vn bounded by
the growth envelope g.  Everything downstream (lattice sampling, norm
ratio checks, the coverage experiment) hangs off the same parameter
object.

All logarithms here are natural.  Rank indices in the mathematics are
1-based (x*_1 is the largest magnitude); arrays are 0-based and the code
converts at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .laws import support_constants

__all__ = [
    "DecompositionParams",
    "EmptyLambda",
    "LambdaSpec",
    "OutOfRegime",
    "Rearrangement",
    "VectorLabel",
    "ZeroScaleEntry",
    "classify",
    "coverage_check",
    "derive_params",
    "gradual_nonconstant",
    "growth_g",
    "lambda_member",
    "rearrange",
    "sample_lambda",
    "steep_norm_ratio_check",
]


class OutOfRegime(ValueError):
    """The (n, p) point does not support the parameter derivation."""


class ZeroScaleEntry(ValueError):
    """x*_{floor(r n)} = 0, so the vector cannot be brought to unit scale."""


class EmptyLambda(ValueError):
    """The requested lattice set has an empty coordinate box."""


@dataclass(frozen=True)
class DecompositionParams:
    n: int
    p: float
    d: float
    r: float
    delta: float
    rho: float
    l0: int
    s0: int
    n_grid: tuple[int, ...]
    kappa: float
    C1: float
    C2: float | None
    C_tau: float
    C0: float
    gamma: float
    clamped: bool = False


@dataclass(frozen=True)
class Rearrangement:
    """Nonincreasing rearrangement; perm is 0-based, |x[perm[j]]| = sorted_abs[j]."""

    sorted_abs: np.ndarray
    perm: np.ndarray


@dataclass(frozen=True)
class VectorLabel:
    kind: str  # one of Vn T0 T1 T2 T3 R1 R2 Unclassified
    j: int | None = None
    k: int | None = None
    witness: dict = field(default_factory=dict)

    def tag(self) -> str:
        if self.kind == "T1":
            return f"T1_{self.j}"
        return self.kind


@dataclass(frozen=True)
class LambdaSpec:
    """Lattice set spec: (1/k)-grid vectors under the envelope and Q1/Q2 cuts.

    sigma maps rank position (0-based) to coordinate index: the coordinate
    sigma[i] carries the rank-(i+1) envelope bound g(n/(i+1)).  Q1 and Q2
    are coordinate index sets.
    """

    k: int
    g: Callable[[float], float]
    Q1: tuple[int, ...]
    Q2: tuple[int, ...]
    rho: float
    sigma: tuple[int, ...]
    h: float


def derive_params(
    n: int,
    p: float,
    law,
    r: float = 0.25,
    delta: float = 0.05,
    rho: float = 0.25,
    C_tau: float = 3.0,
    C0: float = 1.0,
    *,
    clamp: bool = False,
) -> DecompositionParams:
    """Index grid and constants for the decomposition at density p.

    l0 = floor(d / (4 ln(1/p))), s0 the least exponent with l0^s0 > 1/(64p),
    grid n_0=2, n_j = 3 l0^(j-1), then the three tail anchors; kappa =
    ln(gamma d)/ln(l0).  Raises OutOfRegime when l0 < 2, when 1/(64p) < 1
    (no valid s0), or when the grid ordering fails.  With clamp=True the
    offending quantities are pushed to their boundary values instead and
    the result is flagged; only desk-scale diagnostics should use that.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError("n must be an integer >= 2")
    n = int(n)
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if not 0.0 < r < 0.5:
        raise ValueError("r must be in (0, 1/2)")
    if not 0.0 < delta < r / 3.0:
        raise ValueError("delta must be in (0, r/3)")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0, 1)")
    if C_tau <= 0.0 or C0 <= 0.0:
        raise ValueError("C_tau and C0 must be positive")

    consts = support_constants(law)
    d = p * n
    l0 = math.floor(d / (4.0 * math.log(1.0 / p)))
    inv = 1.0 / (64.0 * p)
    clamped = False
    if l0 < 2:
        if not clamp:
            raise OutOfRegime(f"l0 = {l0} < 2 at n={n}, p={p}")
        l0 = 2
        clamped = True
    if inv < 1.0:
        if not clamp:
            raise OutOfRegime(f"1/(64p) = {inv:.4g} < 1 at p={p}: s0 undefined")
        inv = 1.0
        clamped = True
    s0 = 1
    while l0**s0 <= inv:
        s0 += 1
    grid = [2]
    for j in range(1, s0 + 1):
        grid.append(3 * l0 ** (j - 1))
    cand = math.floor(inv)
    grid.append(cand if cand >= 1.5 * grid[s0] else grid[s0])
    grid.append(math.floor(math.sqrt(n / p)))
    grid.append(math.floor(r * n))
    ordered = grid[0] < grid[1] and all(
        grid[i] <= grid[i + 1] for i in range(1, len(grid) - 1)
    ) and grid[-1] <= n
    if not ordered:
        if not clamp:
            raise OutOfRegime(f"index grid ordering fails: {grid} (n={n}, p={p})")
        # pull interior anchors down to the fixed scale rank floor(r n)
        clamped = True
        grid[-1] = min(grid[-1], n)
        for i in range(len(grid) - 2, 0, -1):
            grid[i] = min(grid[i], grid[i + 1])
        if not (grid[0] < grid[1] and grid[-1] >= 1):
            raise OutOfRegime(f"grid unsalvageable at n={n}, p={p}: {grid}")
    kappa = math.log(consts.gamma * d) / math.log(l0)
    return DecompositionParams(
        n=n,
        p=p,
        d=d,
        r=r,
        delta=delta,
        rho=rho,
        l0=l0,
        s0=s0,
        n_grid=tuple(grid),
        kappa=kappa,
        C1=consts.C1,
        C2=consts.C2,
        C_tau=C_tau,
        C0=C0,
        gamma=consts.gamma,
        clamped=clamped,
    )


def rearrange(x) -> Rearrangement:
    x = np.asarray(x, dtype=float)
    # stable sort on -|x| breaks magnitude ties by lowest original index
    perm = np.argsort(-np.abs(x), kind="stable")
    return Rearrangement(sorted_abs=np.abs(x)[perm], perm=perm)


def growth_g(t, d: float):
    """Envelope (2t)^(3/2) for t < 64 d, exp(ln^2(2t)) from t = 64 d on."""
    if d <= 0:
        raise ValueError("d must be positive")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 1.0):
        raise ValueError("g is defined for t >= 1")
    out = np.where(
        arr < 64.0 * d,
        (2.0 * arr) ** 1.5,
        np.exp(np.log(2.0 * arr) ** 2),
    )
    if np.isscalar(t) or getattr(t, "ndim", 1) == 0:
        return float(out)
    return out


@lru_cache(maxsize=32)
def _g_over_ranks(n: int, d: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=float)
    vals = growth_g(n / ranks, d)
    vals.flags.writeable = False
    return vals


def _vn_witness(y: np.ndarray, ys: np.ndarray, params: DecompositionParams):
    """Gradual + nonconstant test on a unit-scale vector.

    Greedy witness: Q1 = coordinates of the ceil(delta n) largest signed
    values, Q2 = the smallest; sound but incomplete, which is the right
    direction for the coverage experiment.
    """
    n = params.n
    g_ranks = _g_over_ranks(n, params.d)
    gradual = bool(np.all(ys <= g_ranks))
    q = math.ceil(params.delta * n)
    order = np.argsort(y, kind="stable")
    q2 = order[:q]
    q1 = order[-q:]
    sep = float(y[q1].min() - y[q2].max())
    nonconstant = sep >= params.rho
    wit = {"gradual": gradual, "nonconstant": nonconstant, "separation": sep}
    if gradual and nonconstant:
        wit["Q1"] = tuple(int(i) for i in np.sort(q1))
        wit["Q2"] = tuple(int(i) for i in np.sort(q2))
        return True, wit
    if not gradual:
        bad = int(np.argmax(ys > g_ranks))
        wit["gradual_violation_rank"] = bad + 1
    return False, wit


def gradual_nonconstant(x, d: float, r: float, delta: float, rho: float):
    """Standalone Vn membership test, usable outside the derived regime.

    Renormalizes so x*_{floor(r n)} = 1 (ZeroScaleEntry when that order
    statistic vanishes) and returns (is_member, witness).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    m_ix = math.floor(r * n)
    if m_ix < 1:
        raise ValueError("floor(r n) must be >= 1")
    ys = np.sort(np.abs(x))[::-1]
    scale = ys[m_ix - 1]
    if scale == 0.0:
        raise ZeroScaleEntry(f"order statistic {m_ix} is zero")
    y = x / scale
    ys = ys / scale
    fake = DecompositionParams(
        n=n, p=0.5, d=d, r=r, delta=delta, rho=rho, l0=2, s0=1,
        n_grid=(2, 3, 3, 3, m_ix), kappa=1.0, C1=1.0, C2=None,
        C_tau=3.0, C0=1.0, gamma=1.0,
    )
    return _vn_witness(y, ys, fake)


def _r_scan_ks(klo: int, khi: int, exhaustive: bool) -> np.ndarray:
    if exhaustive:
        return np.arange(klo, khi + 1, dtype=int)
    ks = []
    k = klo
    while k <= khi:
        ks.append(k)
        k = max(k + 1, math.ceil(k * 1.1))
    return np.asarray(ks, dtype=int)


def classify(x, params: DecompositionParams, *, exhaustive_r: bool = False) -> VectorLabel:
    """Route a vector through the exclusion chain T -> R -> Vn.

    The steep tests are ratio comparisons, hence scale free, and run
    before normalization; R and Vn need unit scale and raise
    ZeroScaleEntry when x*_{floor(r n)} = 0.
    """
    x = np.asarray(x, dtype=float)
    n = params.n
    if x.size != n:
        raise ValueError(f"vector length {x.size} != params.n = {n}")
    rr = rearrange(x)
    xs = rr.sorted_abs
    grid = params.n_grid
    s0 = params.s0

    if xs[0] >= params.C1 * n * xs[1]:
        return VectorLabel("T0", witness={"lhs": float(xs[0]), "rhs": float(params.C1 * n * xs[1])})
    if params.C2 is not None:
        n1 = grid[1]
        if xs[1] >= params.C2 * n * xs[n1 - 1]:
            return VectorLabel(
                "T1", j=1,
                witness={"lhs": float(xs[1]), "rhs": float(params.C2 * n * xs[n1 - 1])},
            )
    for j in range(2, s0 + 2):
        lo, hi = grid[j - 1], grid[j]
        if xs[lo - 1] >= params.gamma * params.d * xs[hi - 1]:
            return VectorLabel(
                "T1", j=j,
                witness={"anchors": (lo, hi), "lhs": float(xs[lo - 1]),
                         "rhs": float(params.gamma * params.d * xs[hi - 1])},
            )
    thr = params.C_tau * math.sqrt(params.d)
    lo, hi = grid[s0 + 1], grid[s0 + 2]
    if xs[lo - 1] >= thr * xs[hi - 1]:
        return VectorLabel("T2", witness={"anchors": (lo, hi), "lhs": float(xs[lo - 1]),
                                          "rhs": float(thr * xs[hi - 1])})
    lo, hi = grid[s0 + 2], grid[s0 + 3]
    if xs[lo - 1] >= thr * xs[hi - 1]:
        return VectorLabel("T3", witness={"anchors": (lo, hi), "lhs": float(xs[lo - 1]),
                                          "rhs": float(thr * xs[hi - 1])})

    m_ix = grid[s0 + 3]
    scale = xs[m_ix - 1]
    if scale == 0.0:
        raise ZeroScaleEntry(f"order statistic {m_ix} is zero")
    y = x / scale
    ys = xs / scale

    # spread classes over the cut-rank window (n_{s0+1}, n / ln^2 d]
    klo = grid[s0 + 1] + 1
    khi = math.floor(n / math.log(params.d) ** 2) if params.d > 1.0 else 0
    ac_ok = False
    lam = 0.0
    need = n - m_ix
    cnt_pos = int(np.count_nonzero(np.abs(y - 1.0) <= params.rho))
    cnt_neg = int(np.count_nonzero(np.abs(y + 1.0) <= params.rho))
    if cnt_pos >= need:
        ac_ok, lam = True, 1.0
    elif cnt_neg >= need:
        ac_ok, lam = True, -1.0
    if khi >= klo:
        ks = _r_scan_ks(klo, khi, exhaustive_r)
        suf = np.concatenate([np.cumsum((ys**2)[::-1])[::-1], [0.0]])
        tail2 = np.sqrt(suf[ks - 1])
        tailinf = ys[ks - 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(tailinf > 0.0, tail2 / tailinf, 0.0)
        spread = ratio >= params.C0 / math.sqrt(params.p)
        sd = math.sqrt(params.d)
        r1 = (
            ac_ok
            & spread
            & (tail2 >= math.sqrt(n / 2.0))
            & (tail2 <= params.C_tau * sd * math.sqrt(n))
        )
        r2 = (
            spread
            & (tail2 >= 2.0 * math.sqrt(n) / params.r)
            & (tail2 <= params.C_tau * params.d * math.sqrt(n))
        )
        hit = np.nonzero(r1 | r2)[0]
        if hit.size:
            i = int(hit[0])
            k = int(ks[i])
            wit = {"tail2": float(tail2[i]), "tailinf": float(tailinf[i]),
                   "ratio": float(ratio[i])}
            if r1[i]:
                wit["lam"] = lam
                return VectorLabel("R1", k=k, witness=wit)
            return VectorLabel("R2", k=k, witness=wit)

    is_vn, wit = _vn_witness(y, ys, params)
    if is_vn:
        return VectorLabel("Vn", witness=wit)
    wit["ac"] = ac_ok
    return VectorLabel("Unclassified", witness=wit)


# ---------------------------------------------------------------------------
# norm ratio bounds for the steep family

def steep_norm_ratio_check(
    x,
    label: VectorLabel,
    params: DecompositionParams,
    *,
    c1_cal: float = 16.0,
    c2_cal: float = 16.0,
) -> bool:
    """||x||_2 / x*_anchor against the class bound C n^2 d^m / (64 p)^kappa.

    Anchor rank and exponent by class: T0 and T1j use m=2 (anchors 1 and
    n_{j-1}), T2 uses m=3 at n_{s0+1}, T3 m=3.5 at n_{s0+2}, anything else
    is treated as the complement with m=4 at n_{s0+3}.  The calibration
    constants default to the fitted values used by the harness.
    """
    x = np.asarray(x, dtype=float)
    xs = np.sort(np.abs(x))[::-1]
    n, d = params.n, params.d
    grid = params.n_grid
    s0 = params.s0
    denom = (64.0 * params.p) ** params.kappa
    base = n * n / denom
    if label.kind == "T0":
        anchor, bound = 1, c1_cal * base * d * d
    elif label.kind == "T1":
        anchor, bound = grid[label.j - 1], c1_cal * base * d * d
    elif label.kind == "T2":
        anchor, bound = grid[s0 + 1], c2_cal * base * d**3
    elif label.kind == "T3":
        anchor, bound = grid[s0 + 2], c2_cal * params.C_tau * base * d**3.5
    else:
        anchor, bound = grid[s0 + 3], c2_cal * params.C_tau**2 * base * d**4
    pin = xs[anchor - 1]
    norm = float(np.linalg.norm(x))
    if pin == 0.0:
        return norm == 0.0
    return norm / pin <= bound


# ---------------------------------------------------------------------------
# lattice sampling

def _lambda_boxes(spec: LambdaSpec) -> list[tuple[int, int]]:
    n = len(spec.sigma)
    q1 = frozenset(spec.Q1)
    q2 = frozenset(spec.Q2)
    boxes: list[tuple[int, int] | None] = [None] * n
    for pos in range(n):
        c = spec.sigma[pos]
        B = float(spec.g(n / (pos + 1)))
        lo, hi = -B, B
        if c in q1:
            if spec.h + 2.0 > B:
                raise EmptyLambda(f"Q1 coordinate {c}: h + 2 > envelope {B:.4g}")
            lo = spec.h
        if c in q2:
            if -B > spec.h - spec.rho - 2.0:
                raise EmptyLambda(f"Q2 coordinate {c}: envelope too tight below h - rho")
            hi = spec.h - spec.rho
        jlo = math.ceil(spec.k * lo - 1e-9)
        jhi = math.floor(spec.k * hi + 1e-9)
        if jlo > jhi:
            raise EmptyLambda(f"coordinate {c}: empty grid box [{lo:.4g}, {hi:.4g}]")
        boxes[c] = (jlo, jhi)
    return boxes  # type: ignore[return-value]


def lambda_member(spec: LambdaSpec, x) -> bool:
    x = np.asarray(x, dtype=float)
    boxes = _lambda_boxes(spec)
    for c, (jlo, jhi) in enumerate(boxes):
        j = round(spec.k * x[c])
        if abs(spec.k * x[c] - j) > 1e-9:
            return False
        if not jlo <= j <= jhi:
            return False
    return True


def sample_lambda(spec: LambdaSpec, stream) -> np.ndarray:
    """Uniform draw from the lattice set; the boxes factorize by coordinate."""
    boxes = _lambda_boxes(spec)
    gen = stream.generator()
    n = len(boxes)
    out = np.empty(n, dtype=float)
    for c, (jlo, jhi) in enumerate(boxes):
        out[c] = gen.integers(jlo, jhi + 1) / spec.k
    if not lambda_member(spec, out):
        raise AssertionError("sampled vector failed the membership re-check")
    return out


# ---------------------------------------------------------------------------
# coverage experiment core

def _gen_steep(gen, n: int) -> np.ndarray:
    if gen.random() < 0.3:
        x = gen.standard_normal(n) * 1e-3
        x[gen.integers(n)] = float(n) * n
        return x
    beta = gen.uniform(0.05, 0.5)
    mags = np.exp(-beta * np.arange(n, dtype=float))
    signs = gen.choice([-1.0, 1.0], size=n)
    return gen.permutation(mags * signs)


def _gen_pareto(gen, n: int) -> np.ndarray:
    alpha = gen.uniform(0.3, 3.0)
    u = gen.random(n)
    u = np.clip(u, 1e-12, None)
    mags = u ** (-1.0 / alpha)
    signs = gen.choice([-1.0, 1.0], size=n)
    return mags * signs


def _gen_lattice(gen, n: int) -> np.ndarray:
    return gen.integers(-3, 4, size=n).astype(float)


def _gen_near_constant(gen, n: int) -> np.ndarray:
    s = -1.0 if gen.random() < 0.5 else 1.0
    return s * (1.0 + 0.075 * gen.standard_normal(n))


def _gen_gaussian(gen, n: int) -> np.ndarray:
    return gen.standard_normal(n)


def _gen_bimodal(gen, n: int) -> np.ndarray:
    half = n // 2
    if gen.random() < 0.5:
        a = 2.0 + 0.2 * gen.standard_normal(half)
        b = -1.0 + 0.2 * gen.standard_normal(n - half)
    else:
        # heavy plateau: a thick shelf of large entries over a unit bulk
        m = max(1, n // 5)
        a = gen.uniform(15.0, 25.0, size=m) * gen.choice([-1.0, 1.0], size=m)
        b = gen.choice([-1.0, 1.0], size=n - m) * gen.uniform(0.8, 1.2, size=n - m)
        a = np.concatenate([a, b])[:n]
        return gen.permutation(a)
    return gen.permutation(np.concatenate([a, b]))


_GENERATORS = (
    ("steep", _gen_steep),
    ("pareto", _gen_pareto),
    ("lattice", _gen_lattice),
    ("near_constant", _gen_near_constant),
    ("gaussian", _gen_gaussian),
    ("bimodal", _gen_bimodal),
)


def coverage_check(
    params: DecompositionParams,
    trials: int,
    stream,
    *,
    exhaustive_r: bool = False,
    max_counterexamples: int = 10,
    return_tags: bool = False,
) -> dict:
    """Sample unit-scale vectors, drop Vn members, and report how much of
    the remainder lands in R or T.

    The generators deliberately mix heavy tails, lattice values, and
    adversarial near-constant profiles; vectors whose scale order
    statistic vanishes are counted as degenerate and excluded.
    """
    gen = stream.generator()
    n = params.n
    class_counts: dict[str, int] = {}
    gen_counts: dict[str, int] = {}
    degenerate = 0
    vn = 0
    covered = 0
    remainder = 0
    counterexamples: list[dict] = []
    tags: list[str] = []
    for t in range(trials):
        name, fn = _GENERATORS[t % len(_GENERATORS)]
        x = fn(gen, n)
        gen_counts[name] = gen_counts.get(name, 0) + 1
        try:
            label = classify(x, params, exhaustive_r=exhaustive_r)
        except ZeroScaleEntry:
            degenerate += 1
            if return_tags:
                tags.append("degenerate")
            continue
        tag = label.tag()
        if return_tags:
            tags.append(tag)
        class_counts[tag] = class_counts.get(tag, 0) + 1
        if label.kind == "Vn":
            vn += 1
            continue
        remainder += 1
        if label.kind in ("T0", "T1", "T2", "T3", "R1", "R2"):
            covered += 1
        elif len(counterexamples) < max_counterexamples:
            counterexamples.append(
                {"trial": t, "generator": name, "witness": dict(label.witness)}
            )
    return {
        "trials": trials,
        "degenerate": degenerate,
        "vn": vn,
        "remainder": remainder,
        "covered": covered,
        "fraction_covered": covered / remainder if remainder else 1.0,
        "class_counts": dict(sorted(class_counts.items())),
        "generator_counts": dict(sorted(gen_counts.items())),
        "counterexamples": counterexamples,
        "exhaustive_r": exhaustive_r,
        "tags": tags if return_tags else None,
    }
