"""Anti-concentration machinery: smooth cutoff, the randomized
unstructured degree, Levy concentration, and the small-ball cross-checks.

The degree of a weight vector y is sup{t > 0 : F(t) <= K1} where F
averages, over random sequences of m disjoint blocks of size floor(n/m),
the integral over [-t, t] of the product of cutoff-smoothed block means
of the entry characteristic function.  The integrand is even, so F(t) =
2*integral over [0, t], and F is continuous, strictly increasing, and
bounded by 2t; the sup is found by doubling plus bisection with the
integral extended incrementally (never recomputed from zero).

Quadrature is composite Simpson with the step tied to the integrand's
Lipschitz constant 2*pi*sqrt(m)*E|xi|*max|y| (product rule over m factors,
each cutoff being 1-Lipschitz), so halving the step is a no-op at the
tolerances used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .laws import RawPmf, cf_grid

__all__ = [
    "CutoffFn",
    "RudEstimate",
    "SandwichViolation",
    "TooLarge",
    "all_sequences",
    "distance_kernel_check",
    "levy_estimate",
    "make_cutoff",
    "rud_estimate",
    "rud_exact",
    "small_ball_check",
]


class SandwichViolation(RuntimeError):
    """Constructed cutoff escaped its required envelope (construction bug)."""


class TooLarge(ValueError):
    """Exact sequence enumeration exceeds the configured budget."""


# ---------------------------------------------------------------------------
# smooth cutoff

@dataclass(frozen=True)
class CutoffFn:
    """psi: constant 1/K2 below 1/(2 K2), identity above 1/K2, quintic
    Hermite blend between (value/slope/curvature matched at both knots)."""

    K2: float
    w: float
    coeffs: tuple[float, float, float]

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        w = self.w
        u = np.clip((arr - w) / w, 0.0, 1.0)
        c3, c4, c5 = self.coeffs
        q = u**3 * (c3 + u * (c4 + u * c5))
        mid = 2.0 * w + w * q
        out = np.where(arr <= w, 2.0 * w, np.where(arr >= 2.0 * w, arr, mid))
        if np.isscalar(t) or getattr(t, "ndim", 1) == 0:
            return float(out)
        return out


def make_cutoff(K2: float) -> CutoffFn:
    """Build and numerically certify the cutoff for K2 >= 2.

    The blend polynomial q(u) = -4u^3 + 7u^4 - 3u^5 has q(0)=q'(0)=q''(0)=0
    and q(1)=0, q'(1)=1, q''(1)=0, giving a C^2 junction with both outer
    branches; the sandwich t <= psi(t) <= 1/K2 on the blend interval is
    re-verified on a dense grid rather than trusted.
    """
    if K2 < 2.0:
        raise ValueError("K2 must be >= 2")
    psi = CutoffFn(K2=float(K2), w=1.0 / (2.0 * K2), coeffs=(-4.0, 7.0, -3.0))
    w = psi.w
    tol = 1e-12
    ts = np.linspace(0.0, 1.0, 10_001)
    vals = psi(ts)
    left = ts <= w
    if not np.allclose(vals[left], 1.0 / K2, rtol=0.0, atol=tol):
        raise SandwichViolation("left plateau broken")
    right = ts >= 2.0 * w
    if not np.allclose(vals[right], ts[right], rtol=0.0, atol=tol):
        raise SandwichViolation("identity branch broken")
    mid = ~left & ~right
    if np.any(vals[mid] > 1.0 / K2 + tol) or np.any(vals[mid] < ts[mid] - tol):
        raise SandwichViolation("blend escaped the sandwich")
    if np.any(vals > 1.0 + tol) or abs(psi(1.0) - 1.0) > tol:
        raise SandwichViolation("sup over [0,1] is not 1")
    return psi


# ---------------------------------------------------------------------------
# sequence enumeration / sampling

def sequence_count(n: int, m: int) -> int:
    q = n // m
    total = 1
    left = n
    for _ in range(m):
        total *= math.comb(left, q)
        left -= q
    return total


def all_sequences(n: int, m: int, budget: int = 200_000) -> np.ndarray:
    """Every ordered sequence of m disjoint floor(n/m)-subsets of range(n),
    lexicographic, as an (N, m, q) index array."""
    if m < 1 or m > n:
        raise ValueError("need 1 <= m <= n")
    q = n // m
    count = sequence_count(n, m)
    if count > budget:
        raise TooLarge(f"{count} sequences exceeds budget {budget}")
    out = []

    def rec(avail: tuple[int, ...], acc: list[tuple[int, ...]]):
        if len(acc) == m:
            out.append(acc.copy())
            return
        for block in combinations(avail, q):
            rest = tuple(v for v in avail if v not in block)
            acc.append(block)
            rec(rest, acc)
            acc.pop()

    rec(tuple(range(n)), [])
    return np.asarray(out, dtype=np.intp)


def _sample_sequences(n: int, m: int, count: int, gen) -> np.ndarray:
    q = n // m
    out = np.empty((count, m, q), dtype=np.intp)
    for i in range(count):
        perm = gen.permutation(n)
        out[i] = perm[: m * q].reshape(m, q)
    return out


# ---------------------------------------------------------------------------
# the F curve

class _FCurve:
    """Per-sequence cumulative integrals of the block-product integrand,
    extended incrementally from committed checkpoints."""

    def __init__(self, y, law, m: int, psi: CutoffFn, blocks: np.ndarray, alpha: float):
        self.y = np.asarray(y, dtype=float)
        self.law = law
        self.m = m
        self.psi = psi
        self.blocks = blocks
        S = blocks.shape[0]
        lip = 2.0 * math.pi * math.sqrt(m) * law.abs_mean_xi() * float(
            np.max(np.abs(self.y)) if self.y.size else 0.0
        )
        self.step = min(alpha / lip, 0.25) if lip > 0.0 else 0.25
        self._flat = blocks.reshape(-1)
        self._ts = [0.0]
        self._ints = [np.zeros(S)]

    def integrand(self, s_vals: np.ndarray) -> np.ndarray:
        """(S, npts) matrix of per-sequence products."""
        y = self.y
        S, m, q = self.blocks.shape
        npts = s_vals.size
        out = np.empty((S, npts))
        slab = max(16, 4_000_000 // max(1, y.size + S * m * q))
        rt = math.sqrt(m)
        for a in range(0, npts, slab):
            sl = s_vals[a : a + slab]
            U = np.outer(sl, y) / rt
            Phi = cf_grid(self.law, U)
            G = Phi[:, self._flat].reshape(sl.size, S, m, q)
            A = np.abs(G.mean(axis=3))
            out[:, a : a + sl.size] = np.prod(self.psi(A), axis=2).T
        return out

    def _integral_between(self, a: float, b: float) -> np.ndarray:
        if b <= a:
            return np.zeros(self.blocks.shape[0])
        nsub = max(2, math.ceil((b - a) / self.step))
        nsub += nsub % 2
        grid = np.linspace(a, b, nsub + 1)
        wts = np.full(nsub + 1, 2.0)
        wts[1::2] = 4.0
        wts[0] = wts[-1] = 1.0
        wts *= (b - a) / nsub / 3.0
        return self.integrand(grid) @ wts

    def F_at(self, t: float) -> float:
        import bisect

        i = bisect.bisect_right(self._ts, t) - 1
        t0, I0 = self._ts[i], self._ints[i]
        if t > t0:
            I = I0 + self._integral_between(t0, t)
            j = bisect.bisect_left(self._ts, t)
            if j < len(self._ts) and self._ts[j] == t:
                pass
            else:
                self._ts.insert(j, t)
                self._ints.insert(j, I)
        else:
            I = I0
        return 2.0 * float(I.mean())

    def ints_at(self, t: float) -> np.ndarray:
        i = self._ts.index(t)
        return self._ints[i]

    def curve(self) -> tuple[tuple[float, float], ...]:
        return tuple(
            (t, 2.0 * float(I.mean())) for t, I in zip(self._ts, self._ints)
        )


@dataclass(frozen=True)
class RudEstimate:
    value: float
    K1: float
    K2: float
    m: int
    integral_curve: tuple[tuple[float, float], ...]
    sequences_sampled: int
    std_error: float
    capped: bool = False
    exact: bool = False


def _sup_search(curve: _FCurve, K1: float, t_max: float, rel_tol: float = 1e-6):
    lo = 0.0
    t = min(1.0, t_max)
    hi = None
    while True:
        if curve.F_at(t) <= K1:
            lo = t
            if t >= t_max:
                return t_max, True
            t = min(2.0 * t, t_max)
        else:
            hi = t
            break
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if curve.F_at(mid) <= K1:
            lo = mid
        else:
            hi = mid
    if lo > 0.0:
        curve.F_at(lo)  # ensure a committed checkpoint at the reported value
    return lo, False


def _run_engine(y, law, m, K1, K2, blocks, *, t_max, alpha, exact):
    if K1 <= 0.0:
        raise ValueError("K1 must be positive")
    psi = make_cutoff(K2)
    curve = _FCurve(y, law, m, psi, blocks, alpha)
    value, capped = _sup_search(curve, K1, t_max)
    S = blocks.shape[0]
    if exact or S < 2 or value == 0.0:
        se = 0.0
    else:
        per_seq = 2.0 * curve.ints_at(value)
        se_F = float(np.std(per_seq, ddof=1)) / math.sqrt(S)
        deriv = 2.0 * float(curve.integrand(np.asarray([value])).mean())
        se = se_F / deriv if deriv > 0.0 else 0.0
    return RudEstimate(
        value=float(value),
        K1=float(K1),
        K2=float(K2),
        m=int(m),
        integral_curve=curve.curve(),
        sequences_sampled=S,
        std_error=se,
        capped=capped,
        exact=exact,
    )


def _check_m(n: int, m: int, *, half: bool = False):
    # degree computations only need q = n // m >= 1; the m <= n/2 regime
    # matters for the comparison bound, so only small_ball enforces it
    hi = n // 2 if half else n
    if m < 1 or m > hi:
        limit = "n/2" if half else "n"
        raise ValueError(f"need 1 <= m <= {limit}, got m={m}, n={n}")


def rud_exact(y, law, m: int, K1: float = 10.0, K2: float = 8.0, *,
              budget: int = 200_000, t_max: float = 64.0, alpha: float = 0.05) -> RudEstimate:
    """Exact averaged degree by full sequence enumeration; n <= 8 only."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n > 8:
        raise TooLarge(f"exact enumeration limited to n <= 8, got n={n}")
    _check_m(n, m)
    blocks = all_sequences(n, m, budget=budget)
    return _run_engine(y, law, m, K1, K2, blocks, t_max=t_max, alpha=alpha, exact=True)


def rud_estimate(y, law, m: int, K1: float = 10.0, K2: float = 8.0,
                 n_sequences: int = 16, stream=None, *, exhaustive: bool = False,
                 budget: int = 200_000, t_max: float = 64.0, alpha: float = 0.05) -> RudEstimate:
    """Monte Carlo degree over sampled block sequences.

    exhaustive=True enumerates every sequence instead (identical to
    rud_exact when that is feasible); otherwise a stream is required.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    _check_m(n, m)
    if exhaustive:
        blocks = all_sequences(n, m, budget=budget)
        return _run_engine(y, law, m, K1, K2, blocks, t_max=t_max, alpha=alpha, exact=True)
    if stream is None:
        raise ValueError("stream required unless exhaustive")
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    gen = stream.generator()
    blocks = _sample_sequences(n, m, n_sequences, gen)
    return _run_engine(y, law, m, K1, K2, blocks, t_max=t_max, alpha=alpha, exact=False)


# ---------------------------------------------------------------------------
# Levy concentration

def levy_estimate(samples, t: float) -> float:
    """Empirical concentration: the largest fraction of samples inside a
    closed ball of radius t, maximized over candidate centers.

    Scalars use the exact sliding-window maximum over sorted values; in
    higher dimension the candidate centers are the sample points
    themselves, an under-approximation of the true sup.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one sample")
    if t < 0.0:
        raise ValueError("radius must be nonnegative")
    if arr.ndim == 1:
        s = np.sort(arr)
        hi = np.searchsorted(s, s + 2.0 * t, side="right")
        counts = hi - np.arange(s.size)
        return float(counts.max()) / s.size
    N = arr.shape[0]
    best = 0
    chunk = max(1, 2_000_000 // max(1, N))
    t2 = t * t
    for a in range(0, N, chunk):
        d2 = ((arr[a : a + chunk, None, :] - arr[None, :, :]) ** 2).sum(axis=2)
        best = max(best, int((d2 <= t2 + 1e-18).sum(axis=1).max()))
    return best / N


# ---------------------------------------------------------------------------
# small-ball and distance-kernel cross-checks

def small_ball_check(v, law, m: int, tau: float, stream, *, draws: int = 2000,
                     ud: float | None = None, K1: float = 10.0, K2: float = 8.0,
                     n_sequences: int = 12) -> tuple[float, float]:
    """Concentration of sum(v_i Y_i) at radius sqrt(m)*tau versus the
    degree-based scale tau + 1/UD.

    Y_i = X_i xi_i + b with X a uniform m-ones mask; the constant b*sum(v)
    shifts every draw equally and cannot change the concentration, but is
    kept for fidelity.  The caller fits the constant between the two
    returned numbers.
    """
    from .sampling import sample_support_indices, substream

    v = np.asarray(v, dtype=float)
    n = v.size
    _check_m(n, m, half=True)
    gen = substream(stream, 0).generator()
    keys = gen.random((draws, n))
    masks = np.argpartition(keys, m - 1, axis=1)[:, :m]
    idx = sample_support_indices(law, (draws, m), gen)
    support = np.asarray(law.support_floats())
    sums = (v[masks] * support[idx]).sum(axis=1) + float(law.b) * float(v.sum())
    lhs = levy_estimate(sums, math.sqrt(m) * tau)
    if ud is None:
        est = rud_estimate(v, law, m, K1, K2, n_sequences, substream(stream, 1))
        ud = est.value
    if ud <= 0.0:
        return lhs, math.inf
    return lhs, tau + 1.0 / ud


def _zeta_atoms(law_zeta) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(law_zeta, RawPmf):
        pairs = [(float(v), float(mass)) for v, mass in law_zeta.atoms]
    elif isinstance(law_zeta, dict):
        pairs = [(float(v), float(mass)) for v, mass in sorted(law_zeta.items())]
    else:
        pairs = [(float(v), float(mass)) for v, mass in law_zeta]
    vals = np.asarray([v for v, _ in pairs])
    mass = np.asarray([w for _, w in pairs])
    if vals.size == 0 or abs(mass.sum() - 1.0) > 1e-9 or np.any(mass <= 0.0):
        raise ValueError("zeta must be a finite pmf with positive masses summing to 1")
    return vals, mass


def distance_kernel_check(law_zeta, s: float, k: int, h1: float, h2: float,
                          epsilon: float, trials: int, stream, *,
                          exhaustive: bool = False) -> tuple[float, float]:
    """P_X(E_zeta dist(zeta*s*X, Z) <= eps) for X uniform on the (1/k)-grid
    of [h1, h2], against the kernel bound max(1/(kh), eps/(sh), eps, s/k).

    The expectation over zeta is exact (finite support); X is either
    exhaustively enumerated or sampled."""
    if h2 <= h1:
        raise ValueError("need h2 > h1")
    if k < 1:
        raise ValueError("need k >= 1")
    vals, mass = _zeta_atoms(law_zeta)
    jlo = math.ceil(k * h1 - 1e-9)
    jhi = math.floor(k * h2 + 1e-9)
    if jlo > jhi:
        raise ValueError("empty grid: no (1/k)-lattice point in [h1, h2]")
    if exhaustive:
        xs = np.arange(jlo, jhi + 1, dtype=float) / k
    else:
        gen = stream.generator()
        xs = gen.integers(jlo, jhi + 1, size=trials).astype(float) / k
    T = np.outer(vals * s, xs)
    dist = np.abs(T - np.round(T))
    e = mass @ dist
    # boundary cases like dist(0.7*1.5, Z) == eps must count as inside;
    # the grid spacing dwarfs this guard, so no outside point sneaks in
    empirical = float(np.count_nonzero(e <= epsilon + 1e-12)) / e.size
    h = h2 - h1
    if s != 0.0:
        f_bound = max(1.0 / (k * h), epsilon / (abs(s) * h), epsilon, abs(s) / k)
    else:
        f_bound = math.inf
    return empirical, f_bound
