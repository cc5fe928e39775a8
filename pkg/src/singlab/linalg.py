"""Exact and floating linear algebra.

Singularity of a sampled matrix is decided exactly over the integers by
fraction-free (Bareiss) elimination; everything floating (singular values,
spectral norms, least-squares distances) sits on top of LAPACK through
numpy.  The two routes are kept separate on purpose: the float side only
screens and estimates, the integer side certifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonFinite",
    "RankResult",
    "SvEstimate",
    "column_distance",
    "det_screen",
    "e_norm",
    "exact_rank",
    "smallest_singular_value",
    "spectral_norm_deviation",
]

INT64_MAX = 2**63 - 1


class NonFinite(ValueError):
    """NaN or Inf in a matrix handed to a floating operation."""


@dataclass(frozen=True)
class RankResult:
    rank: int
    is_singular: bool
    pivot_log: tuple[tuple[int, int], ...]
    overflow_promotions: int


@dataclass(frozen=True)
class SvEstimate:
    value: float
    relative_error_bound: float
    certified_positive: bool


def _as_int_rows(matrix) -> list[list[int]]:
    entries = getattr(matrix, "entries", matrix)
    if isinstance(entries, np.ndarray):
        return [[int(v) for v in row] for row in entries]
    return [[int(v) for v in row] for row in entries]


def exact_rank(matrix) -> RankResult:
    """Rank over the rationals by fraction-free elimination.

    Full pivoting on magnitude with ties broken at the lowest (row, col) in
    scan order; pivot_log records original index pairs.  All arithmetic is
    Python integers, so intermediates promote to big integers silently;
    overflow_promotions counts how many exceeded the int64 range.
    """
    a = _as_int_rows(matrix)
    n = len(a)
    m = len(a[0]) if n else 0
    row_ix = list(range(n))
    col_ix = list(range(m))
    pivots: list[tuple[int, int]] = []
    overflow = 0
    prev = 1
    rank = 0
    for k in range(min(n, m)):
        best = None
        best_abs = 0
        for i in range(k, n):
            ai = a[i]
            for j in range(k, m):
                v = ai[j]
                if v:
                    av = -v if v < 0 else v
                    if av > best_abs:
                        best_abs = av
                        best = (i, j)
        if best is None:
            break
        bi, bj = best
        if bi != k:
            a[k], a[bi] = a[bi], a[k]
            row_ix[k], row_ix[bi] = row_ix[bi], row_ix[k]
        if bj != k:
            for row in a:
                row[k], row[bj] = row[bj], row[k]
            col_ix[k], col_ix[bj] = col_ix[bj], col_ix[k]
        pivots.append((row_ix[k], col_ix[k]))
        pk = a[k][k]
        row_k = a[k]
        for i in range(k + 1, n):
            row_i = a[i]
            aik = row_i[k]
            for j in range(k + 1, m):
                v = (row_i[j] * pk - aik * row_k[j]) // prev
                row_i[j] = v
                if v > INT64_MAX or v < -INT64_MAX:
                    overflow += 1
            row_i[k] = 0
        prev = pk
        rank += 1
    return RankResult(
        rank=rank,
        is_singular=rank < min(n, m),
        pivot_log=tuple(pivots),
        overflow_promotions=overflow,
    )


def smallest_singular_value(matrix) -> SvEstimate:
    A = np.asarray(matrix, dtype=float)
    if not np.isfinite(A).all():
        raise NonFinite("matrix has NaN or Inf entries")
    s = np.linalg.svd(A, compute_uv=False)
    smax = float(s[0])
    smin = float(s[-1])
    if smax == 0.0:
        return SvEstimate(value=0.0, relative_error_bound=0.0, certified_positive=False)
    # standard backward-error bound for LAPACK svd: absolute error O(n eps smax)
    abs_err = 10.0 * max(A.shape) * np.finfo(float).eps * smax
    rel = abs_err / smin if smin > 0 else math.inf
    certified = smin >= 1e-12 * smax and smin > abs_err
    return SvEstimate(value=smin, relative_error_bound=rel, certified_positive=certified)


def spectral_norm_deviation(sample, law) -> float:
    """||M - EM||_2 with EM the constant matrix of mean entries."""
    A = sample.entries.astype(float) / law.denominator
    return float(np.linalg.norm(A - law.mean_entry(), 2))


def column_distance(matrix, i: int) -> float:
    """Euclidean distance from column i to the span of the other columns."""
    A = np.asarray(matrix, dtype=float)
    if A.shape[1] < 2:
        raise ValueError("need at least two columns")
    c = A[:, i]
    B = np.delete(A, i, axis=1)
    x, *_ = np.linalg.lstsq(B, c, rcond=None)
    return float(np.linalg.norm(c - B @ x))


def e_norm(x, p: float) -> float:
    """Weighted norm sqrt(||x_orth||^2 + p n ||x_par||^2).

    x_par is the component along the normalized all-ones direction, x_orth
    the orthogonal complement; the along-ones part carries weight p n.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 1:
        raise ValueError("empty vector")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    s = float(x.sum())
    par2 = s * s / x.size
    orth2 = max(float(x @ x) - par2, 0.0)
    return math.sqrt(orth2 + p * s * s)


def det_screen(batch: np.ndarray, margin: float = 1e6) -> np.ndarray:
    """Flag members of a stack of integer matrices that need exact confirmation.

    True means the float determinant cannot certify nonsingularity: |det| in
    logs falls below the Hadamard row bound by at least log(margin * n * eps),
    or the float determinant is exactly zero.  A nonsingular integer matrix
    has |det| >= 1, so with generous margin every exactly singular matrix is
    flagged; flagged candidates are confirmed by exact_rank and a random
    audit fraction of the rest is re-checked as a hard guard.
    """
    A = np.asarray(batch, dtype=float)
    if A.ndim == 2:
        A = A[None]
    n = A.shape[-1]
    sign, logabs = np.linalg.slogdet(A)
    row2 = np.einsum("bij,bij->bi", A, A)
    with np.errstate(divide="ignore"):
        hadamard = 0.5 * np.sum(np.log(row2), axis=1)
    cut = math.log(margin * n * np.finfo(float).eps)
    flagged = (sign == 0) | ~np.isfinite(hadamard) | (logabs <= hadamard + cut)
    return flagged
