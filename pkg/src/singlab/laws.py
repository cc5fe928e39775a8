"""Biased discrete entry laws.

A law places mass 1 - p on a single mode value b and the remaining mass p
on finitely many off-mode atoms.  Writing an entry as eta = delta * xi + b
with delta ~ Bernoulli(p) and xi supported on {a_1, ..., a_L}, the off-mode
atoms are rescaled so that max |a_i| = 1.  Atom values are exact rationals
throughout so that sampled matrices can be scaled to integer entries.
"""

from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "AmbiguousMode",
    "DegenerateLaw",
    "DiscreteLaw",
    "LawFormatError",
    "RawPmf",
    "SupportConstants",
    "characteristic_function",
    "cf_grid",
    "collision_probability",
    "load_law",
    "parse_law",
    "standardize",
    "support_constants",
    "zero_mass",
]

MASS_TOL = 1e-12


class DegenerateLaw(ValueError):
    """Pmf concentrated on a single atom: p = 0, nothing to standardize."""


class AmbiguousMode(ValueError):
    """Reserved for mode-mass ties.

    standardize() breaks ties toward the smallest value instead of raising,
    so the library itself never throws this; it stays importable for callers
    that want stricter behaviour.
    """


class LawFormatError(ValueError):
    """Malformed law file or pmf."""


def _as_mass(value) -> Fraction:
    # floats go through their decimal repr so "0.15" means 3/20, not the
    # nearest binary fraction
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class RawPmf:
    """A finite pmf with exact rational atom values, prior to standardization."""

    atoms: tuple[tuple[Fraction, Fraction], ...]
    name: str | None = None

    def __post_init__(self):
        if not self.atoms:
            raise LawFormatError("pmf has no atoms")
        values = [v for v, _ in self.atoms]
        if len(set(values)) != len(values):
            raise LawFormatError("duplicate atom values")
        if any(m <= 0 for _, m in self.atoms):
            raise LawFormatError("atom masses must be positive")
        total = sum((m for _, m in self.atoms), Fraction(0))
        if abs(float(total) - 1.0) > MASS_TOL:
            raise LawFormatError(f"masses sum to {float(total)!r}, expected 1")

    @classmethod
    def from_dict(cls, mapping, name: str | None = None) -> "RawPmf":
        atoms = tuple(sorted((Fraction(v), _as_mass(m)) for v, m in mapping.items()))
        return cls(atoms, name)


@dataclass(frozen=True)
class DiscreteLaw:
    """Standardized biased law eta = delta * xi + b.

    support holds the normalized xi atoms (max |a_i| = 1, all nonzero);
    scale is the factor undoing the normalization, so the raw off-mode
    values are scale * a_i + b.  denominator is the lcm of the raw atom
    denominators, used to store sampled entries as integers.
    """

    b: Fraction
    p: float
    support: tuple[Fraction, ...]
    masses: tuple[float, ...]
    scale: Fraction
    denominator: int
    name: str | None = None

    @property
    def raw_values(self) -> tuple[Fraction, ...]:
        return tuple(self.scale * a + self.b for a in self.support)

    @property
    def law_id(self) -> str:
        return _law_id(self)

    def scaled_mode(self) -> int:
        v = self.b * self.denominator
        assert v.denominator == 1
        return int(v)

    def scaled_values(self) -> list[int]:
        out = []
        for v in self.raw_values:
            s = v * self.denominator
            assert s.denominator == 1
            out.append(int(s))
        return out

    def support_floats(self) -> np.ndarray:
        return np.array([float(a) for a in self.support])

    def mean_xi(self) -> float:
        return float(sum(m * float(a) for a, m in zip(self.support, self.masses)))

    def abs_mean_xi(self) -> float:
        return float(sum(m * abs(float(a)) for a, m in zip(self.support, self.masses)))

    def mean_entry(self) -> float:
        """E eta = b + p * scale * E xi."""
        return float(self.b) + self.p * float(self.scale) * self.mean_xi()

    def raw_pmf(self) -> RawPmf:
        atoms = [(self.b, Fraction(str(1.0 - self.p)))]
        atoms += [
            (v, Fraction(str(self.p)) * Fraction(str(m)))
            for v, m in zip(self.raw_values, self.masses)
        ]
        return RawPmf(tuple(sorted(atoms)), name=self.name)

    @classmethod
    def point_mass(cls, b) -> "DiscreteLaw":
        # p -> 0 limit: every entry equals b; the dummy unit atom keeps the
        # xi marginal well formed but is drawn with probability zero
        b = Fraction(b)
        return cls(
            b=b,
            p=0.0,
            support=(Fraction(1),),
            masses=(1.0,),
            scale=Fraction(1),
            denominator=b.denominator,
            name=None,
        )


@lru_cache(maxsize=64)
def _law_id(law: DiscreteLaw) -> str:
    if law.name:
        return law.name
    key = ";".join(
        f"{v}:{m!r}" for v, m in zip(law.raw_values, law.masses)
    ) + f";b={law.b};p={law.p!r}"
    return "law-" + hashlib.sha1(key.encode()).hexdigest()[:8]


def standardize(raw: RawPmf) -> DiscreteLaw:
    """Split a raw pmf into mode b, sparsity p and the normalized xi support.

    The mode is the atom of largest mass; ties break toward the smallest
    value so the result is deterministic.
    """
    if len(raw.atoms) < 2:
        raise DegenerateLaw("pmf has a single atom; p would be 0")
    mode_value, mode_mass = min(raw.atoms, key=lambda a: (-a[1], a[0]))
    p = Fraction(1) - mode_mass
    residual = [(v - mode_value, m) for v, m in raw.atoms if v != mode_value]
    scale = max(abs(v) for v, _ in residual)
    support = tuple(v / scale for v, _ in residual)
    masses = tuple(float(m / p) for _, m in residual)
    den = math.lcm(
        mode_value.denominator, *(int((scale * a + mode_value).denominator) for a in support)
    )
    return DiscreteLaw(
        b=mode_value,
        p=float(p),
        support=support,
        masses=masses,
        scale=scale,
        denominator=den,
        name=raw.name,
    )


def collision_probability(law: DiscreteLaw) -> float:
    """P(eta' = eta) for two independent copies: (1-p)^2 + p^2 sum p_i^2."""
    return (1.0 - law.p) ** 2 + law.p**2 * sum(m * m for m in law.masses)


def zero_mass(law: DiscreteLaw) -> float:
    """P(eta = 0)."""
    if law.b == 0:
        return 1.0 - law.p
    for a, m in zip(law.support, law.masses):
        if law.scale * a + law.b == 0:
            return law.p * m
    return 0.0


@dataclass(frozen=True)
class SupportConstants:
    """Derived constants of a standardized law.

    a and a_bar live on the normalized xi support; a_prime and a_dprime on
    the raw atoms of eta.  a_bar is +inf when xi has a single atom, and C2
    is None when it is undefined (b = 0, or a_bar infinite); the steep test
    that consumes C2 is skipped in those cases.
    """

    a: float
    a_bar: float
    a_prime: float
    a_dprime: float
    C1: float
    C2: float | None
    gamma: float
    C_sum: float
    bias_zero: bool


def support_constants(law: DiscreteLaw) -> SupportConstants:
    supp = [float(a) for a in law.support]
    a = min(abs(v) for v in supp)
    if len(supp) >= 2:
        a_bar = min(
            abs(supp[i] - supp[j]) for i in range(len(supp)) for j in range(i + 1, len(supp))
        )
    else:
        a_bar = math.inf
    eta_atoms = [float(v) for v in law.raw_values] + [float(law.b)]
    nonzero = [abs(v) for v in eta_atoms if v != 0.0]
    a_prime = min(nonzero) if nonzero else math.inf
    a_dprime = max(abs(v) for v in eta_atoms)
    C_sum = 10.0 * max(abs(v) for v in supp)
    C1 = a_prime / (2.0 * a_dprime)
    bias_zero = law.b == 0
    if bias_zero or math.isinf(a_bar):
        C2 = None
    else:
        bb = abs(float(law.b))
        C2 = 2.0 * a_dprime * (bb + a_dprime) / (bb * a_bar)
    if math.isinf(a_bar):
        gamma = 2.0 * C_sum / a
    else:
        gamma = min(2.0 * C_sum / a, 2.0 * C_sum / a_bar)
    return SupportConstants(
        a=a,
        a_bar=a_bar,
        a_prime=a_prime,
        a_dprime=a_dprime,
        C1=C1,
        C2=C2,
        gamma=gamma,
        C_sum=C_sum,
        bias_zero=bias_zero,
    )


def characteristic_function(law: DiscreteLaw, u: float) -> complex:
    """phi_xi(u) = sum_j p_j exp(2 pi i a_j u)."""
    return sum(
        m * cmath.exp(2j * math.pi * float(a) * u) for a, m in zip(law.support, law.masses)
    )


def cf_grid(law: DiscreteLaw, u) -> np.ndarray:
    """Vectorized phi_xi over an array of frequencies."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape, dtype=complex)
    for a, m in zip(law.support, law.masses):
        out += m * np.exp(2j * np.pi * float(a) * u)
    return out


def parse_law(text: str, source: str = "<law>") -> RawPmf:
    """Parse the law file format: 'num/den : mass' lines, optional name line.

    Blank lines and '#' comments are ignored.  Masses may be decimals or
    fractions; values must be exact rationals.
    """
    name = None
    atoms = []
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("name:"):
            name = line[5:].strip() or None
            continue
        if ":" not in line:
            raise LawFormatError(f"{source}:{lineno}: expected 'value : mass', got {line!r}")
        vtext, mtext = line.split(":", 1)
        try:
            value = Fraction(vtext.strip())
            mass = Fraction(mtext.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise LawFormatError(f"{source}:{lineno}: {exc}") from None
        atoms.append((value, mass))
    if not atoms:
        raise LawFormatError(f"{source}: no atoms found")
    try:
        return RawPmf(tuple(sorted(atoms)), name=name)
    except LawFormatError as exc:
        raise LawFormatError(f"{source}: {exc}") from None


def load_law(path) -> RawPmf:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise LawFormatError(f"cannot read law file {path}: {exc.strerror}") from None
    return parse_law(text, source=str(path))
