"""Ground-truth trace auditing.

Replays a recorded trace against the world that generated it, counting how
many user types have rated each item and how many item types each user has
rated, and classifying every recommendation into one of four bad-event
categories (or none).  ``verify_constraints`` then checks five integer
inequalities that must hold for any algorithm on any trace.

This module reads hidden types; algorithms never import it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .model import LatentWorld, Trace
from .regularity import is_column_regular, is_row_regular, wilson_interval
from .theory import ETA

CATEGORIES = ("B1", "B2", "B3", "B4")


class WorldMismatch(ValueError):
    """The trace cannot have been produced by the given world."""


class ConstraintViolated(AssertionError):
    def __init__(self, failures: list["ConstraintResult"]):
        names = ", ".join(str(f.index) for f in failures)
        super().__init__(f"counting constraint(s) violated: {names}")
        self.failures = failures


@dataclass
class TraceStats:
    category: np.ndarray
    c_at: np.ndarray
    d_at: np.ndarray
    item_ids: np.ndarray
    c_final: np.ndarray
    d_final: np.ndarray
    bad_counts: dict[str, int]
    I_strong: int
    I_weak_mass: int
    I_total: int
    U_weak_frac: Fraction
    gamma_star: int
    pi_star: int
    first_small: int
    simultaneous: int
    s_I: int
    s_U: int

    @property
    def bad(self) -> int:
        return sum(self.bad_counts.values())

    @property
    def horizon(self) -> int:
        return self.category.shape[0]

    @property
    def n_users(self) -> int:
        return self.category.shape[1]

    def c_of(self, item: int) -> int:
        """Final user-type count of an item id (0 if never recommended)."""
        k = np.searchsorted(self.item_ids, item)
        if k < len(self.item_ids) and self.item_ids[k] == item:
            return int(self.c_final[k])
        return 0


def audit(trace: Trace, world: LatentWorld | None = None, s_I: int = 0, s_U: int = 0,
          backend: str | None = None) -> TraceStats:
    world = trace.world if world is None else world
    if world is None:
        raise WorldMismatch("no world supplied")
    if s_I < 0 or s_U < 0:
        raise ValueError("s_I and s_U must be nonnegative")
    T, N = trace.items.shape
    if N != world.n_users:
        raise WorldMismatch(f"trace has {N} users, world has {world.n_users}")
    if T and not np.array_equal(world.ratings(np.broadcast_to(np.arange(N), (T, N)).ravel(),
                                              trace.items.ravel()).reshape(T, N), trace.ratings):
        raise WorldMismatch("recorded ratings disagree with the world")
    q_U, q_I = world.config.n_user_types, world.config.n_item_types
    ids, compact = np.unique(trace.items, return_inverse=True)
    compact = compact.reshape(T, N)
    itypes = world.item_types(ids)
    fn = {"python": kernels.replay_python, "cython": kernels.replay_compiled, None: kernels.replay}[backend]
    if fn is None:
        raise RuntimeError("compiled backend unavailable")
    cat, c_at, d_at, c_fin, d_fin, first_small, simultaneous = fn(
        compact, world.user_type, itypes, q_U, q_I, int(s_I), int(s_U))
    cat = np.asarray(cat)
    counts = np.bincount(cat.ravel(), minlength=5)
    c_fin = np.asarray(c_fin, np.int64)
    d_fin = np.asarray(d_fin, np.int64)
    strong = c_fin >= s_I
    weak = (c_fin > 0) & ~strong
    return TraceStats(
        category=cat, c_at=np.asarray(c_at), d_at=np.asarray(d_at), item_ids=ids,
        c_final=c_fin, d_final=d_fin,
        bad_counts={name: int(counts[k + 1]) for k, name in enumerate(CATEGORIES)},
        I_strong=int(strong.sum()),
        I_weak_mass=int(c_fin[weak].sum()),
        I_total=int((c_fin > 0).sum()),
        U_weak_frac=Fraction(int((d_fin < s_U).sum()), N),
        gamma_star=int(d_fin.min()) if N else 0,
        pi_star=int(np.bincount(world.user_type, minlength=q_U).max()),
        first_small=int(first_small), simultaneous=int(simultaneous), s_I=int(s_I), s_U=int(s_U),
    )


@dataclass(frozen=True)
class ConstraintResult:
    index: int
    description: str
    lhs: object
    rhs: object
    ok: bool | None


@dataclass
class ConstraintReport:
    results: list[ConstraintResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok is not False for r in self.results)

    @property
    def failures(self) -> list[ConstraintResult]:
        return [r for r in self.results if r.ok is False]

    def raise_for_failure(self) -> None:
        if not self.ok:
            raise ConstraintViolated(self.failures)


def verify_constraints(stats: TraceStats, T: int, N: int, s_I: int, s_U: int,
                       bad_counts: dict[str, int] | None = None) -> ConstraintReport:
    """Check the five counting constraints exactly.

    ``bad_counts`` may override the tallies in ``stats`` (used to test that a
    corrupted tally is caught).  The right half of constraint 1 is reported
    as not applicable (``ok=None``) when ``s_I == 0``.
    """
    b = dict(stats.bad_counts if bad_counts is None else bad_counts)
    b12 = b["B1"] + b["B2"]
    b13 = b["B1"] + b["B3"]
    bad = sum(b.values())
    middle = stats.I_strong * s_I + stats.I_weak_mass
    U = stats.U_weak_frac
    out = [
        ConstraintResult(1, "B1+B2 >= I_strong*s_I + I_weak_mass", b12, middle, b12 >= middle),
        ConstraintResult(1, "I_strong*s_I + I_weak_mass >= I_total", middle, stats.I_total,
                         None if s_I == 0 else middle >= stats.I_total),
        ConstraintResult(2, "B1+B3 >= (1-U_weak)*N*s_U", b13, (1 - U) * N * s_U, b13 >= (1 - U) * N * s_U),
        ConstraintResult(3, "B1+B3 >= U_weak*N*gamma*", b13, U * N * stats.gamma_star,
                         b13 >= U * N * stats.gamma_star),
        ConstraintResult(4, "bad*pi* >= gamma*·N", bad * stats.pi_star, stats.gamma_star * N,
                         bad * stats.pi_star >= stats.gamma_star * N),
        ConstraintResult(5, "bad >= T*N - [I_strong*(N-s_I) + I_weak_mass*(pi*-1)]", bad,
                         T * N - (stats.I_strong * (N - s_I) + stats.I_weak_mass * (stats.pi_star - 1)),
                         bad >= T * N - (stats.I_strong * (N - s_I) + stats.I_weak_mass * (stats.pi_star - 1))),
    ]
    return ConstraintReport(out)


@dataclass(frozen=True)
class CategoryRate:
    events: int
    dislikes: int
    rate: float | None
    stderr: float | None
    ci_low: float | None
    ci_high: float | None
    clusters: int


def _cluster_rate(y: np.ndarray, groups: np.ndarray) -> tuple[float | None, float | None, int]:
    """Ratio estimate with a cluster-robust standard error.

    Events sharing a group id (trial, user type, item type) have identical
    outcomes, so groups rather than events are the independent units.
    """
    n = len(y)
    if n == 0:
        return None, None, 0
    _, inv = np.unique(groups, axis=0, return_inverse=True)
    inv = inv.ravel()
    sizes = np.bincount(inv).astype(float)
    sums = np.bincount(inv, weights=y.astype(float))
    p = y.mean()
    G = len(sizes)
    resid = sums - p * sizes
    if G < 2:
        return float(p), None, G
    var = (G / (G - 1)) * float((resid**2).sum()) / n**2
    return float(p), math.sqrt(var), G


def empirical_bad_fraction(traces: Sequence[Trace], worlds: LatentWorld | Sequence[LatentWorld] | None = None,
                           s_I: int = 0, s_U: int = 0, stats: Sequence[TraceStats] | None = None,
                           ) -> dict[str, CategoryRate]:
    """Dislike rate among recommendations in each bad-event category."""
    traces = list(traces)
    if worlds is None:
        worlds = [tr.world for tr in traces]
    elif isinstance(worlds, LatentWorld):
        worlds = [worlds] * len(traces)
    if stats is None:
        stats = [audit(tr, w, s_I, s_U) for tr, w in zip(traces, worlds)]
    y_parts: dict[int, list] = {k: [] for k in range(1, 5)}
    g_parts: dict[int, list] = {k: [] for k in range(1, 5)}
    for trial, (tr, w, st) in enumerate(zip(traces, worlds, stats)):
        T, N = tr.items.shape
        if T == 0:
            continue
        utypes = np.broadcast_to(w.user_type, (T, N))
        itypes = w.item_types(tr.items)
        for k in range(1, 5):
            sel = st.category == k
            if not sel.any():
                continue
            y_parts[k].append(tr.ratings[sel] == -1)
            m = int(sel.sum())
            g_parts[k].append(np.column_stack([np.full(m, trial), utypes[sel], itypes[sel]]))
    out = {}
    for k, name in enumerate(CATEGORIES, start=1):
        if y_parts[k]:
            y = np.concatenate(y_parts[k])
            groups = np.concatenate(g_parts[k])
        else:
            y = np.zeros(0, bool)
            groups = np.zeros((0, 3), np.int64)
        p, se, G = _cluster_rate(y, groups)
        if p is None:
            out[name] = CategoryRate(0, 0, None, None, None, None, 0)
            continue
        lo, hi = wilson_interval(int(y.sum()), len(y))
        out[name] = CategoryRate(len(y), int(y.sum()), p, se, lo, hi, G)
    return out


def preference_regularity(world: LatentWorld, s_U: int, s_I: int, eta: float = ETA) -> bool:
    """Whether the preference matrix is column regular at ``s_U`` and row
    regular at ``s_I``."""
    return (is_column_regular(world.pref_matrix, s_U, eta)[0]
            and is_row_regular(world.pref_matrix, s_I, eta)[0])
