"""Repetition-pattern recovery from the attacker's view.

Stage 1 groups consecutive columns of the shuffled view into replica runs
by thresholding their Hamming distances.  Stage 2 locates deleted columns
by an exhaustive minimum-Hamming search over candidate deletion sets,
comparing remapped seed rows against the source-side seeds.  The two
stages combine into a per-column count estimate.

Inputs are immutable; the candidate-set scan reduces to a minimum and can
be parallelized as long as ties keep comparing (distance, set) pairs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityMismatch, RunMismatch, SearchCapExceeded, ValidationError
from .model import LabeledDatabase, RepetitionPattern
from .probability import SymbolMap

DEFAULT_SEARCH_CAP = 10_000_000
_COMBO_CHUNK = 32_768


@dataclass(frozen=True)
class RunStructure:
    """Maximal detected replica groups as half-open column intervals."""

    runs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        pos = 0
        for start, stop in self.runs:
            if start != pos or stop <= start:
                raise ValidationError("runs must be contiguous, ordered and nonempty")
            pos = stop

    @property
    def k_tilde(self) -> int:
        return len(self.runs)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(stop - start for start, stop in self.runs)

    @property
    def first_columns(self) -> tuple[int, ...]:
        return tuple(start for start, _ in self.runs)


@dataclass(frozen=True)
class DeletionEstimate:
    """Sorted estimated deleted source-column indices plus the achieved distance."""

    indices: tuple[int, ...]
    min_distance: int = 0

    def __post_init__(self) -> None:
        if list(self.indices) != sorted(set(self.indices)):
            raise ValidationError("deletion indices must be sorted and unique")


@dataclass(frozen=True)
class PatternEstimate:
    counts: np.ndarray

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


def consecutive_hamming(d2: LabeledDatabase) -> np.ndarray:
    """Hamming distance between each adjacent column pair of the view."""
    e = d2.entries
    if e.shape[1] <= 1:
        return np.zeros(0, dtype=np.int64)
    return (e[:, 1:] != e[:, :-1]).sum(axis=0).astype(np.int64)


def detect_replicas(d2: LabeledDatabase, tau: float) -> RunStructure:
    """Merge adjacent columns whose distance is strictly below m * tau.

    Ties at exactly m * tau split; a lone column is its own run and an
    empty view yields an empty structure.
    """
    if not 0.0 < tau < 1.0:
        raise ValidationError("tau must lie strictly inside (0, 1)")
    k = d2.total_columns
    if k == 0:
        return RunStructure(())
    cut = d2.m * tau
    dists = consecutive_hamming(d2)
    runs: list[tuple[int, int]] = []
    start = 0
    for j, d in enumerate(dists):
        if not d < cut:
            runs.append((start, j + 1))
            start = j + 1
    runs.append((start, k))
    return RunStructure(tuple(runs))


def true_runs(pattern: RepetitionPattern) -> RunStructure:
    """Ground-truth run structure implied by a repetition pattern."""
    runs = []
    pos = 0
    for c in pattern.counts:
        if c > 0:
            runs.append((pos, pos + int(c)))
            pos += int(c)
    return RunStructure(tuple(runs))


def collapse_runs(mat: np.ndarray, runs: RunStructure) -> np.ndarray:
    """Keep the first column of each run, preserving run order."""
    if mat.ndim != 2:
        raise ValidationError("expected a 2-d matrix")
    if runs.k_tilde and (runs.runs[-1][1] != mat.shape[1]):
        raise ValidationError("run structure inconsistent with column count")
    return mat[:, list(runs.first_columns)]


def _deletion_candidate_count(n: int, d: int) -> int:
    return math.comb(n, d)


def detect_deletions(
    g1: np.ndarray,
    g2_collapsed: np.ndarray,
    sigma: SymbolMap,
    search_cap: int = DEFAULT_SEARCH_CAP,
) -> DeletionEstimate:
    """Exhaustive minimum-Hamming deletion search over the seed rows.

    The remapping is applied to the collapsed noisy side, then every
    deletion set of the forced size is scored by the total mismatch count
    between the surviving source columns and the noisy columns, position
    by position.  The first set achieving the minimum in lexicographic
    order wins.  Zero seed rows make every distance zero, so the
    lexicographically smallest set is returned.
    """
    if g1.ndim != 2 or g2_collapsed.ndim != 2:
        raise ValidationError("seed matrices must be 2-d")
    if g1.shape[0] != g2_collapsed.shape[0]:
        raise ValidationError("seed halves must have equal row counts")
    n = g1.shape[1]
    k_tilde = g2_collapsed.shape[1]
    if k_tilde > n:
        raise RunMismatch(f"{k_tilde} runs exceed the {n} source columns")
    d = n - k_tilde
    if d == 0:
        return DeletionEstimate((), int((g1 != sigma.apply(g2_collapsed)).sum()))
    n_candidates = _deletion_candidate_count(n, d)
    if n_candidates > search_cap:
        raise SearchCapExceeded(
            f"C({n},{d}) = {n_candidates} candidate deletion sets exceed cap {search_cap}"
        )
    g2s = sigma.apply(g2_collapsed)
    # mismatch[a, j]: rows where source column a differs from noisy column j
    mismatch = (g1[:, :, None] != g2s[:, None, :]).sum(axis=0).astype(np.int64)

    best_dist: int | None = None
    best_set: tuple[int, ...] = ()
    combos = itertools.combinations(range(n), d)
    positions = np.arange(k_tilde)
    while True:
        chunk = list(itertools.islice(combos, _COMBO_CHUNK))
        if not chunk:
            break
        dels = np.asarray(chunk, dtype=np.int64)
        keep_mask = np.ones((len(chunk), n), dtype=bool)
        np.put_along_axis(keep_mask, dels, False, axis=1)
        kept = np.nonzero(keep_mask)[1].reshape(len(chunk), k_tilde)
        dists = mismatch[kept, positions].sum(axis=1)
        idx = int(np.argmin(dists))
        if best_dist is None or dists[idx] < best_dist:
            best_dist = int(dists[idx])
            best_set = tuple(int(v) for v in chunk[idx])
    assert best_dist is not None
    return DeletionEstimate(best_set, best_dist)


def assemble_pattern(runs: RunStructure, dels: DeletionEstimate, n: int) -> PatternEstimate:
    """Interleave run lengths and deletions into per-column count estimates."""
    if runs.k_tilde + len(dels.indices) != n:
        raise ArityMismatch(
            f"{runs.k_tilde} runs + {len(dels.indices)} deletions != {n} columns"
        )
    deleted = set(dels.indices)
    counts = np.zeros(n, dtype=np.int64)
    lengths = iter(runs.lengths)
    for j in range(n):
        if j not in deleted:
            counts[j] = next(lengths)
    return PatternEstimate(counts)


def diagnostics(
    hamming: np.ndarray,
    tau: float,
    runs: RunStructure,
    dels: DeletionEstimate | None,
) -> dict:
    """JSON-ready dump of one detection pass (0-based indices)."""
    return {
        "hamming": [int(h) for h in hamming],
        "tau": tau,
        "runs": [[int(a), int(b)] for a, b in runs.runs],
        "deletionSet": [int(i) for i in dels.indices] if dels is not None else [],
        "minDistance": int(dels.min_distance) if dels is not None else 0,
    }
