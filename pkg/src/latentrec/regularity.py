"""Exact (s, eta)-regularity checks for sign matrices.

A matrix is column regular when, for every choice of ``s`` columns and every
sign pattern on them, the number of rows showing that pattern is within a
factor ``1 +- eta`` of ``m / 2**s``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .rng import MISC_STREAM, substream

DEFAULT_CAP = 5_000_000


class CombinatorialBlowup(RuntimeError):
    pass


@dataclass(frozen=True)
class Witness:
    cols: tuple[int, ...]
    pattern: tuple[int, ...]
    count: int
    deviation: float


def _as_sign_matrix(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("sign matrix must be two-dimensional")
    if not np.all(np.abs(A) == 1):
        raise ValueError("entries must be +1 or -1")
    return A.astype(np.int8, copy=False)


def lambda_count(A, cols, pattern) -> int:
    A = _as_sign_matrix(A)
    cols = tuple(int(c) for c in cols)
    pattern = tuple(int(p) for p in pattern)
    if len(cols) != len(pattern):
        raise ValueError("cols and pattern lengths differ")
    if len(set(cols)) != len(cols):
        raise ValueError("column indices must be distinct")
    if any(c < 0 or c >= A.shape[1] for c in cols):
        raise IndexError("column index out of range")
    if any(p not in (-1, 1) for p in pattern):
        raise ValueError("pattern entries must be +1 or -1")
    if not cols:
        return A.shape[0]
    return int(np.all(A[:, cols] == np.asarray(pattern, np.int8), axis=1).sum())


def _pattern_of(code: int, s: int) -> tuple[int, ...]:
    return tuple(1 if (code >> (s - 1 - k)) & 1 else -1 for k in range(s))


def is_column_regular(A, s: int, eta: float, cap: int = DEFAULT_CAP) -> tuple[bool, Witness | None]:
    """Exhaustive check over unordered column tuples.

    Returns ``(regular, witness)`` where the witness is the tuple/pattern with
    the largest deviation from the mean count.
    """
    A = _as_sign_matrix(A)
    m, n = A.shape
    if not 0 <= s <= n:
        raise ValueError("need 0 <= s <= n")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if s == 0:
        return True, None
    if math.comb(n, s) * 2**s > cap:
        raise CombinatorialBlowup(f"C({n},{s})*2^{s} exceeds cap {cap}")
    bits = (A > 0).astype(np.int64)
    mean = m / 2**s
    worst = None
    weights = 1 << np.arange(s - 1, -1, -1)
    for cols in itertools.combinations(range(n), s):
        codes = bits[:, cols] @ weights
        counts = np.bincount(codes, minlength=2**s)
        dev = np.abs(counts - mean)
        k = int(np.argmax(dev))
        if worst is None or dev[k] > worst.deviation:
            worst = Witness(cols, _pattern_of(k, s), int(counts[k]), float(dev[k]))
    return worst.deviation <= eta * mean, worst


def is_row_regular(A, s: int, eta: float, cap: int = DEFAULT_CAP) -> tuple[bool, Witness | None]:
    return is_column_regular(np.asarray(A).T, s, eta, cap)


def regularity_prob_bound(m: int, n: int, s: int, eta: float) -> float:
    val = 1.0 - 2.0 * (2 * n) ** s * math.exp(-(eta**2 / 3.0) * m / 2**s)
    return min(1.0, max(0.0, val))


def wilson_interval(successes: int, trials: int, z: float = 1.959964) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class RegularityEstimate:
    rate: float
    ci_low: float
    ci_high: float
    bound: float
    trials: int
    regular: int

    @property
    def consistent(self) -> bool:
        """Empirical rate is not significantly below the analytic bound."""
        return self.ci_high >= self.bound


def estimate_regularity_prob(m: int, n: int, s: int, eta: float, trials: int, seed: int,
                             cap: int = DEFAULT_CAP) -> RegularityEstimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if math.comb(n, s) * 2**s > cap:
        raise CombinatorialBlowup(f"C({n},{s})*2^{s} exceeds cap {cap}")
    rng = substream(seed, MISC_STREAM, 0)
    hits = 0
    for _ in range(trials):
        A = (2 * rng.integers(0, 2, size=(m, n), dtype=np.int8) - 1).astype(np.int8)
        ok, _ = is_column_regular(A, s, eta, cap)
        hits += ok
    lo, hi = wilson_interval(hits, trials)
    return RegularityEstimate(hits / trials, lo, hi, regularity_prob_bound(m, n, s, eta), trials, hits)
