"""Row matching: segment the shuffled view by the estimated per-column
counts (erasure cells where a column was deleted), then match each of its
rows to the unique source row that is jointly typical with it under the
(symbol, read-tuple, count) law.

Typicality is the weak, entropy-based flavor: the three empirical
per-column log-probability averages (source side, observed side, joint)
must each lie within epsilon of the corresponding entropy; any zero
probability factor rejects outright.  A likelihood argmax decoder is
included as a diagnostic baseline; it is not part of the standard
pipeline.

Row scans are pure and parallelize over matched rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import PatternEstimate
from .errors import ArityMismatch, ValidationError
from .model import GroundTruth, LabeledDatabase, UnlabeledDatabase
from .probability import Channel, Pmf, entropy, repeat_mutual_information, _tuple_laws

LOG_ZERO = -1.0e18
_SCAN_BLOCK_ROWS = 131_072

OUTCOME_CORRECT = "matched-correct"
OUTCOME_WRONG = "matched-wrong"
OUTCOME_AMBIGUOUS = "ambiguous"
OUTCOME_NONE = "none"


def _safe_log2(values: np.ndarray) -> np.ndarray:
    out = np.full(values.shape, LOG_ZERO)
    pos = values > 0
    out[pos] = np.log2(values[pos])
    return out


def _count_log_table(p_s: Pmf, max_count: int) -> np.ndarray:
    """log2 p_s lookup covering counts up to max_count; counts beyond the
    support carry zero mass (a misdetected run longer than s_max)."""
    table = np.full(max(max_count + 1, p_s.size), LOG_ZERO)
    table[: p_s.size] = _safe_log2(p_s.probs)
    return table


@dataclass(frozen=True)
class MarkedDatabase:
    """The shuffled view segmented into per-source-column cells.

    Cell (i, j) is the length counts[j] slice of row i; a zero count marks
    an erasure.  Concatenating the non-erased cells of a row reproduces
    the flat row exactly, by construction.
    """

    entries: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])

    def is_erased(self, j: int) -> bool:
        return self.counts[j] == 0

    def cell(self, i: int, j: int) -> np.ndarray:
        off = int(self.offsets[j])
        return self.entries[i, off : off + int(self.counts[j])]

    def row_cells(self, i: int) -> list[np.ndarray]:
        return [self.cell(i, j) for j in range(self.n)]


def build_marked(d2: LabeledDatabase, s_hat: PatternEstimate) -> MarkedDatabase:
    """Segment the flat view by the count estimate."""
    if s_hat.total_columns != d2.total_columns:
        raise ArityMismatch(
            f"counts sum to {s_hat.total_columns} but the view has {d2.total_columns} columns"
        )
    counts = s_hat.counts
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    offsets.flags.writeable = False
    return MarkedDatabase(entries=d2.entries, counts=counts, offsets=offsets)


@dataclass(frozen=True)
class TripleLaw:
    """Precomputed law of one (source symbol, read tuple, count) column."""

    p_x: Pmf
    ch: Channel
    p_s: Pmf
    h_source: float
    h_observed: float
    h_joint: float

    @staticmethod
    def from_components(p_x: Pmf, ch: Channel, p_s: Pmf) -> "TripleLaw":
        h_x = entropy(p_x)
        h_s = entropy(p_s)
        h_y_given_x = float(
            sum(
                p_x[x] * entropy(Pmf(ch.rows[x]))
                for x in range(ch.size)
                if p_x[x] > 0
            )
        )
        mean_s = float(sum(s * p_s[s] for s in range(p_s.size)))
        h_tuple = 0.0
        for s in range(p_s.size):
            if p_s[s] <= 0 or s == 0:
                continue
            _, marg = _tuple_laws(p_x, ch, s)
            nz = marg[marg > 0]
            h_tuple += p_s[s] * float(-(nz * np.log2(nz)).sum())
        return TripleLaw(
            p_x=p_x,
            ch=ch,
            p_s=p_s,
            h_source=h_x,
            h_observed=h_s + h_tuple,
            h_joint=h_x + h_s + mean_s * h_y_given_x,
        )

    @property
    def mutual_information(self) -> float:
        return float(
            sum(
                self.p_s[s] * repeat_mutual_information(self.p_x, self.ch, s)
                for s in range(self.p_s.size)
                if self.p_s[s] > 0
            )
        )


@dataclass(frozen=True)
class TypicalityParams:
    """Acceptance window and the distribution it is measured against."""

    epsilon: float
    law: TripleLaw

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")

    @staticmethod
    def from_components(
        p_x: Pmf, ch: Channel, p_s: Pmf, epsilon: float | None = None
    ) -> "TypicalityParams":
        law = TripleLaw.from_components(p_x, ch, p_s)
        if epsilon is None:
            epsilon = 0.1 * law.h_joint
        return TypicalityParams(epsilon=epsilon, law=law)


def triple_log_prob(x: int, cell, s: int, p_x: Pmf, ch: Channel, p_s: Pmf) -> float:
    """log2 of the joint mass of one (symbol, cell, count) triple.

    Returns -inf when any factor vanishes.  An erased cell (s = 0) carries
    only the count and source factors; the erasure marker itself has no
    alphabet mass.
    """
    cell = np.asarray(cell, dtype=np.int64).reshape(-1)
    if cell.shape[0] != s:
        raise ValidationError(f"cell length {cell.shape[0]} inconsistent with count {s}")
    total = 0.0
    p_count = p_s[s] if s < p_s.size else 0.0
    for p in (p_count, p_x[x]):
        if p <= 0:
            return float("-inf")
        total += math.log2(p)
    for y in cell:
        p = float(ch.rows[x, y])
        if p <= 0:
            return float("-inf")
        total += math.log2(p)
    return total


def observed_log_prob(cell, s: int, p_x: Pmf, ch: Channel, p_s: Pmf) -> float:
    """log2 of the observed-side mass of one (cell, count) pair."""
    cell = np.asarray(cell, dtype=np.int64).reshape(-1)
    if cell.shape[0] != s:
        raise ValidationError(f"cell length {cell.shape[0]} inconsistent with count {s}")
    p_count = p_s[s] if s < p_s.size else 0.0
    if p_count <= 0:
        return float("-inf")
    total = math.log2(p_count)
    if s > 0:
        mass = 0.0
        for x in range(p_x.size):
            px = p_x[x]
            if px <= 0:
                continue
            mass += px * float(np.prod(ch.rows[x, cell]))
        if mass <= 0:
            return float("-inf")
        total += math.log2(mass)
    return total


def is_jointly_typical(
    x_row: np.ndarray,
    y_row: np.ndarray,
    s_hat: np.ndarray,
    params: TypicalityParams,
) -> bool:
    """Weak joint typicality of one (source row, segmented row) pair.

    y_row is the flat observed row; s_hat gives the per-column cell
    lengths.  All three empirical averages must fall within epsilon of
    their entropies; any zero-probability factor fails immediately.
    """
    law = params.law
    n = len(s_hat)
    if len(x_row) != n:
        raise ValidationError("source row arity inconsistent with the count estimate")
    sum_src = 0.0
    sum_obs = 0.0
    sum_joint = 0.0
    off = 0
    for j in range(n):
        s = int(s_hat[j])
        cell = y_row[off : off + s]
        off += s
        lp_joint = triple_log_prob(int(x_row[j]), cell, s, law.p_x, law.ch, law.p_s)
        lp_obs = observed_log_prob(cell, s, law.p_x, law.ch, law.p_s)
        px = law.p_x[int(x_row[j])]
        if not math.isfinite(lp_joint) or not math.isfinite(lp_obs) or px <= 0:
            return False
        sum_src += math.log2(px)
        sum_obs += lp_obs
        sum_joint += lp_joint
    eps = params.epsilon
    return (
        abs(-sum_src / n - law.h_source) < eps
        and abs(-sum_obs / n - law.h_observed) < eps
        and abs(-sum_joint / n - law.h_joint) < eps
    )


@dataclass(frozen=True)
class MatchReport:
    """Outcome of matching a set of shuffled rows against the source rows.

    assignment maps a matched shuffled-row index to its unique typical
    source-row index.  error_rate is filled by evaluate() and is the
    fraction of evaluated rows that did not end up matched-correct.
    """

    matched_rows: tuple[int, ...]
    outcomes: tuple[str, ...]
    assignment: dict[int, int]
    error_rate: float | None = None


def _observed_side_stats(
    marked: MarkedDatabase, rows: np.ndarray, law: TripleLaw
) -> tuple[np.ndarray, float, np.ndarray]:
    """Per-row observed-side empirical average, the count-term constant,
    and per-symbol cell count matrices for the scoring matmul."""
    n = marked.n
    counts = marked.counts
    y = marked.entries[rows]
    lp_s = _count_log_table(law.p_s, int(counts.max()) if counts.size else 0)
    s_const = float(lp_s[counts].sum())
    obs = np.full(len(rows), s_const)
    for j in range(n):
        s = int(counts[j])
        if s == 0:
            continue
        off = int(marked.offsets[j])
        cell = y[:, off : off + s]
        cond = np.ones((law.p_x.size, len(rows)))
        for l in range(s):
            cond *= law.ch.rows[:, cell[:, l]]
        mass = law.p_x.probs @ cond
        obs += _safe_log2(mass)
    # symbol counts per (row, source column) for the joint-score matmul
    k = law.p_x.size
    col_of = np.repeat(np.arange(n), counts)
    seg = np.zeros((marked.entries.shape[1], n))
    if col_of.size:
        seg[np.arange(col_of.size), col_of] = 1.0
    cnt = np.stack([(y == sym).astype(float) @ seg for sym in range(k)])
    return obs, s_const, cnt


def _match_rows_against_source(
    d1: UnlabeledDatabase,
    marked: MarkedDatabase,
    params: TypicalityParams,
    rows: np.ndarray,
    stop_when_saturated: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Scan every source row for each requested shuffled row.

    Returns (accept counts, unique candidate index or -1) per row.  When
    stop_when_saturated is set the scan ends once every row has at least
    two accepted candidates, which cannot change any outcome.
    """
    law = params.law
    eps = params.epsilon
    n = marked.n
    n_rows = len(rows)
    lp_x = _safe_log2(law.p_x.probs)
    lp_ch = _safe_log2(law.ch.rows)

    obs, s_const, cnt = _observed_side_stats(marked, rows, law)
    obs_ok = np.abs(-obs / n - law.h_observed) < eps

    counts = np.zeros(n_rows, dtype=np.int64)
    unique_idx = np.full(n_rows, -1, dtype=np.int64)
    x_all = d1.entries
    for lo in range(0, d1.m, _SCAN_BLOCK_ROWS):
        hi = min(d1.m, lo + _SCAN_BLOCK_ROWS)
        x_blk = x_all[lo:hi]
        src_terms = lp_x[x_blk].sum(axis=1)
        src_ok = np.abs(-src_terms / n - law.h_source) < eps
        joint = np.zeros((n_rows, hi - lo))
        for sym in range(law.p_x.size):
            joint += cnt[sym] @ lp_ch[x_blk, sym].T
        joint += s_const + src_terms[None, :]
        ok = (
            obs_ok[:, None]
            & src_ok[None, :]
            & (np.abs(-joint / n - law.h_joint) < eps)
        )
        blk_counts = ok.sum(axis=1)
        first = np.argmax(ok, axis=1)
        newly = (counts == 0) & (blk_counts > 0)
        unique_idx[newly] = lo + first[newly]
        counts += blk_counts
        if stop_when_saturated and counts.min() >= 2:
            break
    unique_idx[counts != 1] = -1
    return counts, unique_idx


def match_all(
    d1: UnlabeledDatabase,
    marked: MarkedDatabase,
    params: TypicalityParams,
    match_rows: np.ndarray | None = None,
) -> MatchReport:
    """Match shuffled rows to source rows by unique joint typicality.

    A row is matched when exactly one source row is typical with it,
    ambiguous when several are, and unmatched when none is.  match_rows
    restricts the scan to a subset of shuffled rows (the per-row outcome
    law is unchanged; this is the uniformly-drawn-row error estimator).
    """
    if d1.n != marked.n:
        raise ValidationError("source and marked views disagree on column count")
    if match_rows is None:
        rows = np.arange(marked.m)
    else:
        rows = np.asarray(match_rows, dtype=np.int64)
    counts, unique_idx = _match_rows_against_source(
        d1, marked, params, rows, stop_when_saturated=True
    )
    outcomes = []
    assignment: dict[int, int] = {}
    for pos, row in enumerate(rows):
        if counts[pos] == 0:
            outcomes.append(OUTCOME_NONE)
        elif counts[pos] > 1:
            outcomes.append(OUTCOME_AMBIGUOUS)
        else:
            outcomes.append("matched")
            assignment[int(row)] = int(unique_idx[pos])
    return MatchReport(
        matched_rows=tuple(int(r) for r in rows),
        outcomes=tuple(outcomes),
        assignment=assignment,
    )


def evaluate(report: MatchReport, truth: GroundTruth) -> MatchReport:
    """Score a report against the hidden row permutation.

    A matched row is correct when its assigned source row maps to it under
    the true labeling.  error_rate is the fraction of evaluated rows not
    matched-correct, the uniformly-drawn-row estimator.
    """
    theta = truth.labeling.perm
    outcomes = []
    for row, outcome in zip(report.matched_rows, report.outcomes):
        if outcome in (OUTCOME_NONE, OUTCOME_AMBIGUOUS):
            outcomes.append(outcome)
        else:
            src = report.assignment[row]
            outcomes.append(OUTCOME_CORRECT if theta[src] == row else OUTCOME_WRONG)
    wrong = sum(1 for o in outcomes if o != OUTCOME_CORRECT)
    return MatchReport(
        matched_rows=report.matched_rows,
        outcomes=tuple(outcomes),
        assignment=dict(report.assignment),
        error_rate=wrong / len(outcomes) if outcomes else 0.0,
    )


def ml_match_all(
    d1: UnlabeledDatabase,
    marked: MarkedDatabase,
    params: TypicalityParams,
    match_rows: np.ndarray | None = None,
) -> MatchReport:
    """Diagnostic likelihood decoder: argmax of the summed triple log mass.

    Baseline only; the standard pipeline uses the typicality rule above,
    which this deliberately does not reproduce (no uniqueness test).
    """
    law = params.law
    if match_rows is None:
        rows = np.arange(marked.m)
    else:
        rows = np.asarray(match_rows, dtype=np.int64)
    lp_x = _safe_log2(law.p_x.probs)
    lp_ch = _safe_log2(law.ch.rows)
    _, s_const, cnt = _observed_side_stats(marked, rows, law)
    best = np.full(len(rows), -np.inf)
    best_idx = np.zeros(len(rows), dtype=np.int64)
    for lo in range(0, d1.m, _SCAN_BLOCK_ROWS):
        hi = min(d1.m, lo + _SCAN_BLOCK_ROWS)
        x_blk = d1.entries[lo:hi]
        scores = np.zeros((len(rows), hi - lo))
        for sym in range(law.p_x.size):
            scores += cnt[sym] @ lp_ch[x_blk, sym].T
        scores += s_const + lp_x[x_blk].sum(axis=1)[None, :]
        blk_best = scores.max(axis=1)
        improved = blk_best > best
        best_idx[improved] = lo + np.argmax(scores, axis=1)[improved]
        best[improved] = blk_best[improved]
    assignment = {int(r): int(i) for r, i in zip(rows, best_idx)}
    return MatchReport(
        matched_rows=tuple(int(r) for r in rows),
        outcomes=tuple("matched" for _ in rows),
        assignment=assignment,
    )


def report_to_json(report: MatchReport) -> dict:
    return {
        "assignment": {str(k): int(v) for k, v in sorted(report.assignment.items())},
        "outcomes": list(report.outcomes),
        "errorRate": report.error_rate,
    }
