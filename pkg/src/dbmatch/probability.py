"""Exact finite-alphabet probability engine.

Distributions, channels, entropies, the matching-capacity value and every
derived scalar the pipeline needs (disagreement rates p0/p1, remapped
agreement rates q0/q1, detection thresholds, seed-size and error-bound
formulas).  Symbols are dense 0-based integers.  All logarithms are base 2,
so every returned quantity is in bits.

Everything here is a pure function of immutable inputs and safe to call
concurrently; nothing holds mutable state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlphabetTooLarge,
    CapacityCapExceeded,
    DegenerateGap,
    IndependentDatabases,
    ValidationError,
)

PMF_TOL = 1e-12
IDENTITY_TOL = 1e-10

DEFAULT_SIGMA_CAP = 8
DEFAULT_SMAX_CAP = 4


def _as_prob_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(f"{name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} contains negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > PMF_TOL:
        raise ValidationError(f"{name} sums to {total!r}, expected 1 within {PMF_TOL}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over symbols 0..k-1."""

    probs: np.ndarray

    def __init__(self, probs) -> None:
        object.__setattr__(self, "probs", _as_prob_vector(probs, "pmf"))

    @property
    def size(self) -> int:
        return int(self.probs.shape[0])

    def __getitem__(self, symbol: int) -> float:
        return float(self.probs[symbol])

    @staticmethod
    def uniform(k: int) -> "Pmf":
        if k < 1:
            raise ValidationError("alphabet size must be >= 1")
        return Pmf(np.full(k, 1.0 / k))

    @staticmethod
    def point_mass(k: int, symbol: int) -> "Pmf":
        v = np.zeros(k)
        v[symbol] = 1.0
        return Pmf(v)


@dataclass(frozen=True)
class Channel:
    """Conditional law rows[x][y] = P(Y=y | X=x) on a shared alphabet."""

    rows: np.ndarray

    def __init__(self, rows) -> None:
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValidationError("channel must be a square matrix")
        for x in range(arr.shape[0]):
            _as_prob_vector(arr[x], f"channel row {x}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "rows", arr)

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])

    def output_marginal(self, p_x: Pmf) -> Pmf:
        if p_x.size != self.size:
            raise ValidationError("alphabet size mismatch between source and channel")
        return Pmf(p_x.probs @ self.rows)

    @staticmethod
    def identity(k: int) -> "Channel":
        return Channel(np.eye(k))

    @staticmethod
    def symmetric(k: int, crossover: float) -> "Channel":
        """Uniform-crossover channel: stay with 1-crossover, else spread evenly."""
        if not 0.0 <= crossover <= 1.0:
            raise ValidationError("crossover must lie in [0, 1]")
        if k == 1:
            return Channel(np.eye(1))
        off = crossover / (k - 1)
        rows = np.full((k, k), off)
        np.fill_diagonal(rows, 1.0 - crossover)
        return Channel(rows)


@dataclass(frozen=True)
class SymbolMap:
    """Bijective relabeling of the alphabet; map[y] is the new symbol for y."""

    map: np.ndarray

    def __init__(self, mapping) -> None:
        arr = np.asarray(mapping, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("symbol map must be a 1-d vector")
        if sorted(arr.tolist()) != list(range(arr.size)):
            raise ValidationError("symbol map must be a permutation of 0..k-1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "map", arr)

    @property
    def size(self) -> int:
        return int(self.map.shape[0])

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(self.size)
        return inv

    def apply(self, symbols: np.ndarray) -> np.ndarray:
        return self.map[symbols]

    @staticmethod
    def identity(k: int) -> "SymbolMap":
        return SymbolMap(np.arange(k))


@dataclass(frozen=True)
class Scalars:
    """Derived scalar bundle consumed by the detection stages."""

    p0: float
    p1: float
    sigma: SymbolMap
    q0: float
    q1: float
    tau: float
    q: float = field(init=False)

    def __post_init__(self) -> None:
        gap = self.q0 - self.q1
        object.__setattr__(self, "q", math.exp(-0.5 * gap * gap))


def entropy(p: Pmf) -> float:
    """Shannon entropy in bits; 0*log(0) terms contribute nothing."""
    probs = p.probs
    nz = probs[probs > 0]
    return float(-(nz * np.log2(nz)).sum())


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"binary entropy argument {x!r} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x))


def bernoulli_kl(a: float, b: float) -> float:
    """D(Bernoulli(a) || Bernoulli(b)) in bits, +inf when absolutely singular."""
    if not 0.0 <= a <= 1.0 or not 0.0 <= b <= 1.0:
        raise ValidationError("bernoulli_kl arguments must lie in [0, 1]")
    if (b == 0.0 and a > 0.0) or (b == 1.0 and a < 1.0):
        return float("inf")
    total = 0.0
    if a > 0.0:
        total += a * math.log2(a / b)
    if a < 1.0:
        total += (1.0 - a) * math.log2((1.0 - a) / (1.0 - b))
    return total


def compute_p0_p1(p_x: Pmf, ch: Channel) -> tuple[float, float]:
    """Disagreement probabilities of two noisy reads.

    p0 compares reads of independent source symbols, p1 compares two reads
    of the same symbol.  p0 >= p1 always, with equality exactly when the
    noisy view is independent of the source.
    """
    if p_x.size != ch.size:
        raise ValidationError("alphabet size mismatch")
    p_y = p_x.probs @ ch.rows
    weighted = p_x.probs[:, None] * ch.rows
    p0 = float((weighted * (1.0 - p_y[None, :])).sum())
    p1 = float((weighted * (1.0 - ch.rows)).sum())
    if p0 < p1 - PMF_TOL:
        raise AssertionError(f"p0={p0} < p1={p1}; broken channel arithmetic")
    return p0, p1


def psi_profile(p_x: Pmf, ch: Channel) -> np.ndarray:
    """Per-output-symbol squared deviation of the rows from the marginal.

    Nonnegative, and its sum equals p0 - p1; used as a cross-check identity.
    """
    p_y = p_x.probs @ ch.rows
    dev = ch.rows - p_y[None, :]
    return np.asarray((p_x.probs[:, None] * dev * dev).sum(axis=0))


def compute_q0_q1(p_x: Pmf, ch: Channel, sigma: SymbolMap) -> tuple[float, float]:
    """Remapped disagreement rates.

    q1 = P(sigma(Y) != X) for a correlated source/read pair, q0 the same
    for an independent pair.  Deletion detection needs q0 > q1.
    """
    if not (p_x.size == ch.size == sigma.size):
        raise ValidationError("alphabet size mismatch")
    inv = sigma.inverse
    # agreement prob of sigma(Y) with symbol t is P(Y = inv[t])
    agree_cond = ch.rows[:, inv]            # [x1, t] = P(sigma(Y)=t | X=x1)
    q0 = 1.0 - float(p_x.probs @ agree_cond @ p_x.probs)
    q1 = 1.0 - float((p_x.probs * agree_cond[np.arange(ch.size), np.arange(ch.size)]).sum())
    return q0, q1


def find_best_sigma(p_x: Pmf, ch: Channel, cap: int = DEFAULT_SIGMA_CAP) -> SymbolMap:
    """Exhaustively pick the remapping maximizing the agreement gap q0 - q1.

    Ties go to the lexicographically smallest permutation.  Raises
    IndependentDatabases when no remapping separates correlated from
    independent pairs (gap <= PMF_TOL for all of them), which happens
    exactly when the joint law factorizes.
    """
    k = p_x.size
    if k != ch.size:
        raise ValidationError("alphabet size mismatch")
    if k > cap:
        raise AlphabetTooLarge(f"alphabet size {k} exceeds permutation-search cap {cap}")
    best_gap = -math.inf
    best: tuple[int, ...] | None = None
    for perm in itertools.permutations(range(k)):
        sigma = SymbolMap(perm)
        q0, q1 = compute_q0_q1(p_x, ch, sigma)
        gap = q0 - q1
        if gap > best_gap + PMF_TOL:
            best_gap, best = gap, perm
    if best is None or best_gap <= PMF_TOL:
        raise IndependentDatabases(
            "no symbol remapping separates correlated pairs; matching capacity is zero"
        )
    return SymbolMap(best)


def recommend_threshold(p0: float, p1: float, override: float | None = None) -> float:
    """Replica-detection threshold, the midpoint of (p1, p0) by default."""
    if p0 - p1 <= PMF_TOL:
        raise DegenerateGap(f"p0={p0} and p1={p1} leave no threshold window")
    if override is None:
        return 0.5 * (p0 + p1)
    if not p1 < override < p0:
        raise ValidationError(f"threshold override {override} outside ({p1}, {p0})")
    return float(override)


def recommend_seed_size(n: int, k_hat_over_n: float, q0: float, q1: float) -> int:
    """Seed rows sufficient for reliable deletion detection, ceil(2nH_b/gap^2 log2 e)."""
    if n < 0:
        raise ValidationError("n must be nonnegative")
    gap = q0 - q1
    if gap <= PMF_TOL:
        raise DegenerateGap("q0 - q1 gap is degenerate; seeds cannot localize deletions")
    h = binary_entropy(k_hat_over_n)
    if h == 0.0:
        return 0
    return math.ceil(2.0 * n * h / (gap * gap * math.log2(math.e)))


def replica_error_bounds(m: int, tau: float, p0: float, p1: float, k_cols: int) -> float:
    """Union bound on total replica-detection failure over K-1 column pairs."""
    if not p1 < tau < p0:
        raise ValidationError(f"tau={tau} outside ({p1}, {p0})")
    if k_cols <= 1:
        return 0.0
    miss = 2.0 ** (-m * bernoulli_kl(tau, p0))
    split = 2.0 ** (-m * bernoulli_kl(1.0 - tau, 1.0 - p1))
    return (k_cols - 1) * (miss + split)


def pipeline_scalars(
    p_x: Pmf,
    ch: Channel,
    tau_override: float | None = None,
    sigma_cap: int = DEFAULT_SIGMA_CAP,
) -> Scalars:
    """Bundle of every scalar the two detection stages consume."""
    p0, p1 = compute_p0_p1(p_x, ch)
    sigma = find_best_sigma(p_x, ch, cap=sigma_cap)
    q0, q1 = compute_q0_q1(p_x, ch, sigma)
    tau = recommend_threshold(p0, p1, override=tau_override)
    return Scalars(p0=p0, p1=p1, sigma=sigma, q0=q0, q1=q1, tau=tau)


# --- repeated-observation laws -------------------------------------------

def _tuple_laws(p_x: Pmf, ch: Channel, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint and marginal laws of an s-fold independent read.

    Returns (joint, marginal): joint[x, t] = p_x(x) * prod_l ch[x, y_l] and
    marginal[t] = sum_x joint[x, t], with t ranging over the k^s tuples in
    lexicographic order.  s = 0 yields the single empty tuple.
    """
    k = p_x.size
    cond = np.ones((k, 1))
    for _ in range(s):
        cond = (cond[:, :, None] * ch.rows[:, None, :]).reshape(k, -1)
    joint = p_x.probs[:, None] * cond
    return joint, joint.sum(axis=0)


def _mutual_information_from_joint(joint: np.ndarray) -> float:
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mask = joint > 0
    ratio = joint[mask] / (np.outer(px, py)[mask])
    return float((joint[mask] * np.log2(ratio)).sum())


def repeat_mutual_information(p_x: Pmf, ch: Channel, s: int) -> float:
    """I(X; Y^s) for an s-fold memoryless read of the same symbol."""
    if s == 0:
        return 0.0
    joint, _ = _tuple_laws(p_x, ch, s)
    return _mutual_information_from_joint(joint)


def _check_caps(p_x: Pmf, ch: Channel, p_s: Pmf, s_max_cap: int) -> None:
    if p_x.size != ch.size:
        raise ValidationError("alphabet size mismatch")
    s_max = p_s.size - 1
    if s_max > s_max_cap:
        raise CapacityCapExceeded(
            f"s_max={s_max} exceeds enumeration cap {s_max_cap}"
        )


def capacity(p_x: Pmf, p_s: Pmf, ch: Channel, s_max_cap: int = DEFAULT_SMAX_CAP) -> float:
    """Matching capacity in bits per column.

    Computed as sum_s p_s(s) * I(X; Y^s); the repetition count is drawn
    independently of the source, so conditioning on it decomposes the
    mutual information of the pair (read tuple, count) against the symbol.
    """
    _check_caps(p_x, ch, p_s, s_max_cap)
    return float(
        sum(
            p_s[s] * repeat_mutual_information(p_x, ch, s)
            for s in range(p_s.size)
            if p_s[s] > 0
        )
    )


def capacity_direct(p_x: Pmf, p_s: Pmf, ch: Channel, s_max_cap: int = DEFAULT_SMAX_CAP) -> float:
    """Cross-check oracle: the same capacity from the flattened joint law.

    Materializes p(x, (s, y^s)) over the mixed-length tuple alphabet and
    evaluates the mutual information directly, sharing no code path with
    the per-count decomposition above.
    """
    _check_caps(p_x, ch, p_s, s_max_cap)
    blocks = []
    for s in range(p_s.size):
        joint_s, _ = _tuple_laws(p_x, ch, s)
        blocks.append(p_s[s] * joint_s)
    joint = np.concatenate(blocks, axis=1)
    return _mutual_information_from_joint(joint)


def capacity_per_count(
    p_x: Pmf, p_s: Pmf, ch: Channel, s_max_cap: int = DEFAULT_SMAX_CAP
) -> dict[int, float]:
    """The per-count terms p_s(s) * I(X;Y^s) keyed by repetition count."""
    _check_caps(p_x, ch, p_s, s_max_cap)
    return {
        s: p_s[s] * repeat_mutual_information(p_x, ch, s)
        for s in range(p_s.size)
    }
