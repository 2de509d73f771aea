"""Generative model: source database, repetition pattern, row shuffle,
noisy repeated view, and seed rows, with ground truth kept for scoring.

The attacker-visible view stores its columns flat; run boundaries and the
row permutation live only in the GroundTruth record.  A single 64-bit
master seed expands into named substreams so that every artifact of a
trial is reproducible within this implementation.

All returned objects are immutable after construction and safe to share
across threads; generation itself draws from the caller's Generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import MemoryCapExceeded, ValidationError
from .probability import Channel, Pmf

DEFAULT_ENTRY_CAP = 2_000_000_000
_NOISE_BLOCK_ENTRIES = 8_000_000


class Substreams(NamedTuple):
    """Named independent generators derived from one master seed."""

    database: np.random.Generator
    pattern: np.random.Generator
    labeling: np.random.Generator
    noise: np.random.Generator
    seeds: np.random.Generator


def substreams(master_seed: int) -> Substreams:
    children = np.random.SeedSequence(master_seed).spawn(5)
    return Substreams(*(np.random.default_rng(c) for c in children))


def trial_seed_sequence(master_seed: int, *indices: int) -> np.random.SeedSequence:
    """Deterministic per-trial entropy keyed by (master seed, index...)."""
    return np.random.SeedSequence(entropy=[master_seed, *indices])


@dataclass(frozen=True)
class UnlabeledDatabase:
    entries: np.ndarray  # m x n, small ints

    def __post_init__(self) -> None:
        if self.entries.ndim != 2:
            raise ValidationError("database entries must be a 2-d matrix")
        self.entries.flags.writeable = False

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return int(self.entries.shape[1])


@dataclass(frozen=True)
class RepetitionPattern:
    counts: np.ndarray  # length n, nonnegative

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 1 or np.any(arr < 0):
            raise ValidationError("pattern counts must be a 1-d nonnegative vector")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total_columns(self) -> int:
        return int(self.counts.sum())

    @property
    def deleted_indices(self) -> np.ndarray:
        return np.flatnonzero(self.counts == 0)


@dataclass(frozen=True)
class Labeling:
    """Row permutation theta: source row i corresponds to shuffled row theta[i]."""

    perm: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.perm, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1 or np.any(np.bincount(arr, minlength=arr.size) != 1):
            raise ValidationError("labeling must be a permutation of 0..m-1")
        arr.flags.writeable = False
        object.__setattr__(self, "perm", arr)
        inv = np.empty_like(arr)
        inv[arr] = np.arange(arr.size)
        inv.flags.writeable = False
        object.__setattr__(self, "_inverse", inv)

    @property
    def m(self) -> int:
        return int(self.perm.shape[0])

    @property
    def inverse(self) -> np.ndarray:
        return self._inverse  # type: ignore[attr-defined]


@dataclass(frozen=True)
class LabeledDatabase:
    """The shuffled noisy repeated view, stored flat with no run markers."""

    entries: np.ndarray  # m x K

    def __post_init__(self) -> None:
        if self.entries.ndim != 2:
            raise ValidationError("database entries must be a 2-d matrix")
        self.entries.flags.writeable = False

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def total_columns(self) -> int:
        return int(self.entries.shape[1])


@dataclass(frozen=True)
class SeedBatch:
    """Aligned row pairs sharing the main pair's repetition pattern."""

    g1: np.ndarray  # B x n
    g2: np.ndarray  # B x K

    def __post_init__(self) -> None:
        if self.g1.shape[0] != self.g2.shape[0]:
            raise ValidationError("seed halves must have the same row count")
        self.g1.flags.writeable = False
        self.g2.flags.writeable = False

    @property
    def size(self) -> int:
        return int(self.g1.shape[0])


@dataclass(frozen=True)
class GroundTruth:
    pattern: RepetitionPattern
    labeling: Labeling


def _check_entry_budget(rows: int, cols: int, cap: int) -> None:
    if rows < 0 or cols < 0:
        raise ValidationError("matrix dimensions must be nonnegative")
    if rows * cols > cap:
        raise MemoryCapExceeded(
            f"{rows} x {cols} entries exceed the configured cap of {cap}"
        )


def _sample_symbols(p: Pmf, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Inverse-cdf sampling; one uniform draw per entry, uint8 output."""
    if p.size > 256:
        raise ValidationError("alphabets above 256 symbols are not supported")
    if np.all(p.probs == p.probs[0]):
        return rng.integers(0, p.size, size=shape, dtype=np.uint8)
    cdf = np.cumsum(p.probs)
    cdf[-1] = 1.0
    u = rng.random(shape)
    return np.searchsorted(cdf, u, side="right").astype(np.uint8)


def generate_unlabeled(
    m: int, n: int, p_x: Pmf, rng: np.random.Generator, entry_cap: int = DEFAULT_ENTRY_CAP
) -> UnlabeledDatabase:
    """m x n matrix of i.i.d. source symbols."""
    if m < 1 or n < 1:
        raise ValidationError("database dimensions must be positive")
    _check_entry_budget(m, n, entry_cap)
    return UnlabeledDatabase(_sample_symbols(p_x, (m, n), rng))


def sample_pattern(n: int, p_s: Pmf, rng: np.random.Generator) -> RepetitionPattern:
    """n i.i.d. repetition counts from p_s, supported on 0..s_max."""
    if n < 1:
        raise ValidationError("pattern length must be positive")
    cdf = np.cumsum(p_s.probs)
    cdf[-1] = 1.0
    counts = np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)
    return RepetitionPattern(counts)


def sample_labeling(m: int, rng: np.random.Generator) -> Labeling:
    if m < 1:
        raise ValidationError("row count must be positive")
    return Labeling(rng.permutation(m))


def _noisy_repeat(
    source: np.ndarray,
    pattern: RepetitionPattern,
    ch: Channel,
    rng: np.random.Generator,
) -> np.ndarray:
    """Repeat columns per the pattern, pass every entry through the channel.

    Rows are processed in fixed-size blocks so peak memory stays bounded;
    the block order is part of the reproducibility contract.
    """
    m = source.shape[0]
    k_total = pattern.total_columns
    out = np.empty((m, k_total), dtype=np.uint8)
    if k_total == 0 or m == 0:
        return out
    col_of = np.repeat(np.arange(pattern.n), pattern.counts)
    cdf = np.cumsum(ch.rows, axis=1)
    cdf[:, -1] = 1.0
    block = max(1, _NOISE_BLOCK_ENTRIES // k_total)
    for lo in range(0, m, block):
        hi = min(m, lo + block)
        x_rep = source[lo:hi][:, col_of]
        u = rng.random(x_rep.shape)
        # per-row inverse cdf: y = #{c < k-1 : cdf[x][c] <= u}, the
        # searchsorted answer without masked scatter passes
        y = np.zeros(x_rep.shape, dtype=np.uint8)
        for c in range(ch.size - 1):
            y += u >= cdf[:, c][x_rep]
        out[lo:hi] = y
    return out


def apply_repetition_noise(
    d1: UnlabeledDatabase,
    pattern: RepetitionPattern,
    labeling: Labeling,
    ch: Channel,
    rng: np.random.Generator,
) -> LabeledDatabase:
    """Produce the shuffled noisy repeated view of d1.

    Row i of the output derives from row inverse(i) of d1; column j of d1
    contributes counts[j] output columns, each entry independently noised.
    Deleted columns contribute nothing, so the output is m x sum(counts).
    """
    if pattern.n != d1.n or labeling.m != d1.m:
        raise ValidationError("pattern/labeling dimensions inconsistent with database")
    source = d1.entries[labeling.inverse]
    return LabeledDatabase(_noisy_repeat(source, pattern, ch, rng))


def generate_seeds(
    b: int,
    n: int,
    p_x: Pmf,
    pattern: RepetitionPattern,
    ch: Channel,
    rng: np.random.Generator,
) -> SeedBatch:
    """B fresh aligned row pairs through the same pattern and channel."""
    if b < 0:
        raise ValidationError("seed count must be nonnegative")
    if pattern.n != n:
        raise ValidationError("pattern length inconsistent with column count")
    if b == 0:
        return SeedBatch(
            np.empty((0, n), dtype=np.uint8),
            np.empty((0, pattern.total_columns), dtype=np.uint8),
        )
    g1 = _sample_symbols(p_x, (b, n), rng)
    g2 = _noisy_repeat(g1, pattern, ch, rng)
    return SeedBatch(g1, g2)
