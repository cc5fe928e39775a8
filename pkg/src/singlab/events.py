"""Structured-event detectors and the closed-form probabilities they feed.

A singular sample is attributed to the first matching cause in the order
zero column, zero row, level-set column pair, level-set row pair,
unexplained.  Level-set pairs are only attributed when the two lines are
actually linearly dependent (exact rank of the 2-line submatrix <= 1):
matching row partitions alone bound the event from above but do not force
singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .laws import DiscreteLaw, collision_probability, support_constants, zero_mass
from .linalg import exact_rank

__all__ = [
    "LevelSetPair",
    "StructuredFindings",
    "attribute_cause",
    "binomial_bounds",
    "detect_level_set_pairs",
    "detect_zero_lines",
    "e_col_holds",
    "e_sum_holds",
    "in_lemma_regime",
    "incidence_set",
    "support_counts",
    "theory_leading_order",
]


def _entries_of(M) -> np.ndarray:
    e = getattr(M, "entries", M)
    return np.asarray(e)


def detect_zero_lines(M) -> tuple[list[int], list[int]]:
    """Indices of all-zero columns and all-zero rows (exact integer scan)."""
    e = _entries_of(M)
    zero = e == 0
    cols = [int(j) for j in np.nonzero(zero.all(axis=0))[0]]
    rows = [int(i) for i in np.nonzero(zero.all(axis=1))[0]]
    return cols, rows


@dataclass(frozen=True)
class LevelSetPair:
    j1: int
    j2: int
    variant: str  # "A": full partitions match under a value bijection moving b
    #               "B": b-sets equal and the residual non-b partitions match
    sigma: tuple[tuple[str, str], ...]
    dependent: bool


def _partition(col: np.ndarray) -> dict[int, frozenset]:
    out: dict[int, frozenset] = {}
    for v in np.unique(col):
        out[int(v)] = frozenset(np.nonzero(col == v)[0].tolist())
    return out


def _variant_a(part1: dict, part2: dict, b_scaled: int, values: list[int]):
    """Full set systems equal, with the value bijection forced to move the
    b-class of the first column off b (or free to, when that class is empty)."""
    sets1 = set(part1.values())
    sets2 = set(part2.values())
    if sets1 != sets2:
        return None
    by_set2 = {s: v for v, s in part2.items()}
    sigma = {}
    for v, s in part1.items():
        sigma[v] = by_set2[s]
    if b_scaled in sigma:
        if sigma[b_scaled] == b_scaled:
            return None
    else:
        # b absent from column 1: need a non-b value absent from column 2
        absent2 = [v for v in values if v not in part2 and v != b_scaled]
        if not absent2:
            return None
        sigma[b_scaled] = absent2[0]
    return tuple(sorted((str(a), str(b)) for a, b in sigma.items()))


def _variant_b(col1: np.ndarray, col2: np.ndarray, b_scaled: int):
    """Equal b-sets and matching residual partitions after deleting them."""
    b1 = col1 == b_scaled
    b2 = col2 == b_scaled
    if not np.array_equal(b1, b2):
        return None
    keep = ~b1
    if not keep.any():
        return None
    p1 = _partition(col1[keep])
    p2 = _partition(col2[keep])
    if set(p1.values()) != set(p2.values()):
        return None
    by_set2 = {s: v for v, s in p2.items()}
    sigma = {v: by_set2[s] for v, s in p1.items()}
    return tuple(sorted((str(a), str(b)) for a, b in sigma.items()))


def detect_level_set_pairs(M, law: DiscreteLaw) -> list[LevelSetPair]:
    """Column pairs whose row partitions by entry value coincide.

    Variant A matches the full partitions under a bijection sending the
    mode class somewhere else; variant B deletes the (shared) mode rows
    first, which is what catches identical columns.  Each reported pair
    carries a `dependent` flag from an exact rank check of the two
    columns; only dependent pairs certify singularity.
    """
    e = _entries_of(M)
    n_rows, n_cols = e.shape
    b_scaled = law.scaled_mode()
    values = [b_scaled] + law.scaled_values()
    parts = [_partition(e[:, j]) for j in range(n_cols)]
    # cheap signature: multiset of class sizes must agree before any matching
    sigs = [tuple(sorted(len(s) for s in parts[j].values())) for j in range(n_cols)]
    out: list[LevelSetPair] = []
    for j1 in range(n_cols):
        for j2 in range(j1 + 1, n_cols):
            if sigs[j1] != sigs[j2]:
                continue
            found = None
            sigma = _variant_a(parts[j1], parts[j2], b_scaled, values)
            if sigma is not None:
                found = ("A", j1, j2, sigma)
            else:
                sigma = _variant_a(parts[j2], parts[j1], b_scaled, values)
                if sigma is not None:
                    found = ("A", j2, j1, sigma)
                else:
                    sigma = _variant_b(e[:, j1], e[:, j2], b_scaled)
                    if sigma is not None:
                        found = ("B", j1, j2, sigma)
            if found is None:
                continue
            variant, a, b, sig = found
            sub = e[:, [a, b]]
            dep = exact_rank(sub).rank <= 1
            out.append(LevelSetPair(j1=a, j2=b, variant=variant, sigma=sig, dependent=dep))
    return out


@dataclass(frozen=True)
class StructuredFindings:
    zero_columns: tuple[int, ...]
    zero_rows: tuple[int, ...]
    col_pairs: tuple[LevelSetPair, ...]
    row_pairs: tuple[LevelSetPair, ...]
    cause: str
    explained: bool


def attribute_cause(M, law: DiscreteLaw) -> StructuredFindings:
    """Attribution chain for an exactly singular matrix."""
    e = _entries_of(M)
    cols, rows = detect_zero_lines(e)
    col_pairs: tuple[LevelSetPair, ...] = ()
    row_pairs: tuple[LevelSetPair, ...] = ()
    if cols:
        cause = "zero_column"
    elif rows:
        cause = "zero_row"
    else:
        col_pairs = tuple(detect_level_set_pairs(e, law))
        if any(p.dependent for p in col_pairs):
            cause = "column_pair"
        else:
            row_pairs = tuple(detect_level_set_pairs(e.T, law))
            if any(p.dependent for p in row_pairs):
                cause = "row_pair"
            else:
                cause = "unexplained"
    return StructuredFindings(
        zero_columns=tuple(cols),
        zero_rows=tuple(rows),
        col_pairs=col_pairs,
        row_pairs=row_pairs,
        cause=cause,
        explained=cause != "unexplained",
    )


# ---------------------------------------------------------------------------
# closed forms

def theory_leading_order(law: DiscreteLaw, n: int) -> tuple[float, dict]:
    """Leading-order singularity probability 2n q0^n + n^2 qc^n plus the
    exact zero-line inclusion-exclusion values and Bonferroni bounds."""
    if n < 1:
        raise ValueError("n must be >= 1")
    q0 = zero_mass(law)
    qc = collision_probability(law)
    term_zero = 2.0 * n * q0**n
    term_collision = float(n) * n * qc**n
    p_s = term_zero + term_collision
    p_zero_col = 1.0 - (1.0 - q0**n) ** n
    lower = max(
        2.0 * n * q0**n
        - n * (n - 1.0) * q0 ** (2 * n)
        - float(n) * n * q0 ** (2 * n - 1),
        0.0,
    )
    upper = min(2.0 * p_zero_col, 1.0)
    terms = {
        "q0": q0,
        "qc": qc,
        "term_zero": term_zero,
        "term_collision": term_collision,
        "P_zero_column": p_zero_col,
        "P_zero_row": p_zero_col,
        "P_zero_line_lower": lower,
        "P_zero_line_upper": upper,
    }
    return p_s, terms


def _binom_sum(n: int, k_lo: int, k_hi: int, p: float) -> float:
    """Exact P(k_lo <= Bin(n, p) <= k_hi) via integer arithmetic.

    p is taken at its decimal face value (Fraction(str(p))), which keeps
    the common denominator small enough for n in the thousands."""
    k_lo = max(k_lo, 0)
    k_hi = min(k_hi, n)
    if k_lo > k_hi:
        return 0.0
    frac = Fraction(str(p))
    num, den = frac.numerator, frac.denominator
    cnum = den - num
    total = 0
    for k in range(k_lo, k_hi + 1):
        total += math.comb(n, k) * num**k * cnum ** (n - k)
    return float(Fraction(total, den**n))


def in_lemma_regime(n: int, p: float, tau: float) -> bool:
    return 50.0 / n < p < 0.1 and tau > math.e


def binomial_bounds(n: int, p: float, tau: float) -> tuple[float, float, float, float]:
    """(exact_tail, upper_bound, exact_window, window_bound).

    exact_tail = P(Bin(n,p) > (tau+1) p n) against exp(-tau ln(tau/e) p n);
    exact_window = P(pn/8 <= Bin <= 8pn) against the lower bound
    1 - (1-p)^(n/2).  Their regime is in_lemma_regime; out of regime the
    numbers are still exact, just not guaranteed ordered."""
    d_exact = Fraction(str(p)) * n  # cut indices must not suffer float drift
    k0 = math.floor((Fraction(str(tau)) + 1) * d_exact) + 1
    exact_tail = _binom_sum(n, k0, n, p)
    upper_bound = math.exp(-tau * math.log(tau / math.e) * p * n)
    exact_window = _binom_sum(
        n, math.ceil(d_exact / 8), math.floor(8 * d_exact), p
    )
    window_bound = 1.0 - (1.0 - p) ** (n / 2.0)
    return exact_tail, upper_bound, exact_window, window_bound


# ---------------------------------------------------------------------------
# concentration event detectors

def e_sum_holds(M, law: DiscreteLaw) -> bool:
    """All column pairs have l1-close noise parts: ||D_i - D_j||_1 <= C p n
    with D the delta*xi component in normalized units and C = 10 max|a|."""
    e = _entries_of(M).astype(float)
    consts = support_constants(law)
    scale = float(law.denominator) * float(law.scale) if law.scale else 1.0
    D = (e - float(law.scaled_mode())) / scale
    n = e.shape[0]
    bound = consts.C_sum * law.p * n
    for i in range(D.shape[1] - 1):
        diffs = np.abs(D[:, i + 1 :] - D[:, i : i + 1]).sum(axis=0)
        if np.any(diffs > bound):
            return False
    return True


def support_counts(M, law: DiscreteLaw) -> np.ndarray:
    """Per-column count of non-mode entries."""
    e = _entries_of(M)
    return np.count_nonzero(e != law.scaled_mode(), axis=0)


def e_col_holds(M, law: DiscreteLaw, J1, J2) -> bool:
    """Two witness rows over J1 u J2: one entirely at the mode, the other
    with exactly one non-mode entry, inside J1.

    Any non-mode atom has |xi| >= min|a_i| automatically, so the magnitude
    condition needs no extra check for a discrete law."""
    J1 = np.asarray(sorted(J1), dtype=int)
    J2 = np.asarray(sorted(J2), dtype=int)
    if J1.size == 0:
        raise ValueError("J1 must be nonempty")
    if np.intersect1d(J1, J2).size:
        raise ValueError("J1 and J2 must be disjoint")
    e = _entries_of(M)
    hot1 = e[:, J1] != law.scaled_mode()
    hot2 = (e[:, J2] != law.scaled_mode()) if J2.size else np.zeros((e.shape[0], 0), bool)
    n1 = hot1.sum(axis=1)
    n2 = hot2.sum(axis=1)
    all_mode = (n1 == 0) & (n2 == 0)
    single = (n1 == 1) & (n2 == 0)
    return bool(all_mode.any() and single.any())


def incidence_set(M0_mask, M, J) -> list[int]:
    """Rows of the top-half mask whose support meets J in exactly one index.

    The |xi| >= min|a_i| condition is automatic on the discrete support,
    so the mask determines the set; M is accepted for interface symmetry."""
    mask = np.asarray(M0_mask, dtype=bool)
    J = np.asarray(sorted(set(int(j) for j in J)), dtype=int)
    if J.size == 0:
        return []
    hits = mask[:, J].sum(axis=1)
    return [int(i) for i in np.nonzero(hits == 1)[0]]
