"""Seeded sampling of matrices and scalar draws.

A stream is identified by (root_seed, path).  Draws come from Philox, a
counter-based generator, keyed through SeedSequence spawn keys, so every
stream is a pure function of its identity: results never depend on which
worker consumed the stream or in what order streams were created.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .laws import DiscreteLaw

__all__ = [
    "MatrixSample",
    "RngStream",
    "read_matrix",
    "sample_entries",
    "sample_matrix",
    "sample_support_indices",
    "substream",
    "to_float",
    "write_matrix",
]


def _path_str(path: tuple[int, ...]) -> str:
    return "/".join(str(i) for i in path) if path else "-"


@dataclass(frozen=True)
class RngStream:
    root_seed: int
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def path_str(self) -> str:
        return _path_str(self.path)


def substream(stream: RngStream, task_index: int) -> RngStream:
    return RngStream(stream.root_seed, stream.path + (int(task_index),))


@dataclass(frozen=True)
class MatrixSample:
    """One n x n realization, entries integer-scaled by law.denominator."""

    n: int
    entries: np.ndarray
    delta_mask: np.ndarray | None
    seed: int
    path: tuple[int, ...]
    law_id: str

    def path_str(self) -> str:
        return _path_str(self.path)


@lru_cache(maxsize=16)
def _entry_tables(law: DiscreteLaw):
    probs = np.array([1.0 - law.p] + [law.p * m for m in law.masses])
    cumulative = np.cumsum(probs)
    cumulative[-1] = 1.0  # guard against fp drift in the last bin
    values = np.array([law.scaled_mode()] + law.scaled_values(), dtype=np.int64)
    return cumulative, values


def sample_entries(law: DiscreteLaw, shape, gen: np.random.Generator):
    """I.i.d. integer-scaled entries plus the Bernoulli mask, one uniform each."""
    cumulative, values = _entry_tables(law)
    u = gen.random(shape)
    idx = np.searchsorted(cumulative, u, side="right")
    idx = np.minimum(idx, len(values) - 1)
    return values[idx], idx > 0


def sample_support_indices(law: DiscreteLaw, shape, gen: np.random.Generator) -> np.ndarray:
    """Indices into law.support drawn from the conditional xi masses."""
    cumulative = np.cumsum(law.masses)
    cumulative[-1] = 1.0
    idx = np.searchsorted(cumulative, gen.random(shape), side="right")
    return np.minimum(idx, len(law.masses) - 1)


def sample_matrix(law: DiscreteLaw, n: int, stream: RngStream) -> MatrixSample:
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = stream.generator()
    entries, mask = sample_entries(law, (n, n), gen)
    return MatrixSample(
        n=n,
        entries=entries,
        delta_mask=mask,
        seed=stream.root_seed,
        path=stream.path,
        law_id=law.law_id,
    )


def to_float(sample: MatrixSample, law: DiscreteLaw) -> np.ndarray:
    """Raw-valued float matrix (undo the integer scaling)."""
    return sample.entries.astype(float) / law.denominator


def write_matrix(sample: MatrixSample, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# n={sample.n} seed={sample.seed} path={sample.path_str()} "
            f"law={sample.law_id}\n"
        )
        for row in sample.entries:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_matrix(path, law: DiscreteLaw | None = None) -> MatrixSample:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing matrix header line")
    fields = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    n = int(fields["n"])
    seed = int(fields["seed"])
    path_tok = fields.get("path", "-")
    spath = tuple(int(t) for t in path_tok.split("/")) if path_tok != "-" else ()
    entries = np.array(
        [[int(tok) for tok in line.split()] for line in lines[1 : n + 1]], dtype=np.int64
    )
    if entries.shape != (n, n):
        raise ValueError(f"{path}: expected {n}x{n} entries, got {entries.shape}")
    mask = entries != law.scaled_mode() if law is not None else None
    return MatrixSample(
        n=n,
        entries=entries,
        delta_mask=mask,
        seed=seed,
        path=spath,
        law_id=fields.get("law", ""),
    )
