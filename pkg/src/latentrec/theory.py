"""Closed-form regret curves, thresholds, bounds and regime classification.

All logarithms are base 2.  Every function here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ETA = 1.0 / 13.0

REGIMES = ("Cold", "Item", "User", "Hybrid", "Asymptotic")


class AmbiguousRegime(RuntimeError):
    """Zero or several rows of the regret table match a point."""


def log2(x: float) -> float:
    return math.log2(x)


def loglog2(x: float) -> float:
    """``log2(log2(x))`` clamped to 0 for ``x <= 2``."""
    return math.log2(math.log2(x)) if x > 2 else 0.0


def floor_plus(x: float) -> int:
    return max(0, math.floor(x))


def r_user(N: int, q_U: int) -> int:
    return math.ceil(2 * log2(N * q_U * q_U))


def r_item(N: int, q_I: int) -> int:
    return math.ceil(2 * log2(N * q_I))


def s_user(N: int, q_U: int, q_I: int) -> int:
    return floor_plus(log2(q_U) - loglog2(q_I) - loglog2(N) - 12)


def s_item(N: int, q_I: int) -> int:
    return floor_plus(0.99 * log2(q_I) - 4 * loglog2(N) - 12)


def k_item(N: int, q_I: int, T: float, r_I: int | None = None) -> float:
    r_I = r_item(N, q_I) if r_I is None else r_I
    return 16 * log2(T) + 2 * math.sqrt(q_I * r_I * T / N)


def k_hybrid(N: int, q_U: int, q_I: int, T: float) -> float:
    return 8 * r_user(N, q_U) + 2 * math.sqrt(r_item(N, q_I) * q_I * T / q_U)


T_CAP = 2**62


def _max_true(pred, start: int = 1) -> int:
    """Largest integer ``T >= start`` with ``pred(T)`` for a predicate that is
    true then false; 0 if ``pred(start)`` already fails, ``T_CAP`` if it never does."""
    if not pred(start):
        return 0
    lo, hi = start, 2 * start
    while pred(hi):
        if hi >= T_CAP:
            return T_CAP
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class Thresholds:
    T1: float
    T2: float
    T3: float
    T4: float
    T5: float
    s_U: int
    s_I: int
    eta: float
    r_U: int
    r_I: int
    T_Item: int
    T_Hybrid: int


def thresholds(N: int, q_U: int, q_I: int) -> Thresholds:
    r_U, r_I = r_user(N, q_U), r_item(N, q_I)
    t_item = _max_true(lambda T: k_item(N, q_I, T, r_I) <= r_U)
    t_hyb = _max_true(lambda T: k_hybrid(N, q_U, q_I, T) <= q_I / 3)
    return Thresholds(
        T1=log2(q_U), T2=q_I / N, T3=q_I / q_U, T4=N * log2(q_U) ** 2 / q_I, T5=q_I * q_U,
        s_U=s_user(N, q_U, q_I), s_I=s_item(N, q_I), eta=ETA, r_U=r_U, r_I=r_I,
        T_Item=t_item, T_Hybrid=t_hyb,
    )


# regret table ---------------------------------------------------------------

def _table_rows(N: int, q_U: int, q_I: int):
    """``(regime, lo, lo_closed, hi, condition, value_fn)`` for each printed row."""
    th = thresholds(N, q_U, q_I)
    T1, T2, T3, T4, T5 = th.T1, th.T2, th.T3, th.T4, th.T5
    lqU, lqI = log2(q_U), log2(q_I)
    user_first = T1 < T2
    rich = lqI <= q_U

    def cold(T):
        return T

    def item(T):
        return 1 + math.sqrt(q_I * T / N)

    def user(T):
        return lqU + q_U * T / N

    def hybrid(T):
        return lqU + math.sqrt(q_I * q_U * T) / N

    def asym_rich(T):
        return lqU + q_I * q_U / N + lqI * T / N

    inf = math.inf
    return [
        ("Cold", 1.0, True, min(T1, T2), True, cold),
        ("Item", T2, False, T4, not user_first, item),
        ("User", T1, False, T3, user_first and rich, user),
        ("Hybrid", T3, False, T5, user_first and rich, hybrid),
        ("Hybrid", T4, False, T5, (not user_first) and rich, hybrid),
        ("Asymptotic", T5, False, inf, rich, asym_rich),
        ("Asymptotic", T1, False, inf, user_first and not rich, user),
        ("Asymptotic", T4, False, inf, (not user_first) and not rich, user),
    ]


def _in_row(T, lo, lo_closed, hi):
    return (lo <= T if lo_closed else lo < T) and T <= hi


def matching_rows(N: int, q_U: int, q_I: int, T: float) -> list[int]:
    return [k for k, (_, lo, lc, hi, cond, _) in enumerate(_table_rows(N, q_U, q_I))
            if cond and _in_row(T, lo, lc, hi)]


def regret_curve_R(N: int, q_U: int, q_I: int, T: float) -> tuple[float, str]:
    """Per-user optimal regret order ``R(T)`` and its regime label, unscaled."""
    rows = _table_rows(N, q_U, q_I)
    hits = matching_rows(N, q_U, q_I, T)
    if len(hits) != 1:
        raise AmbiguousRegime(f"{len(hits)} rows match (N={N}, q_U={q_U}, q_I={q_I}, T={T})")
    regime, *_, fn = rows[hits[0]]
    return fn(T), regime


def table_is_consistent(N: int, q_U: int, q_I: int) -> bool:
    """Whether the thresholds are ordered so the table partitions ``T >= 1``.

    Requires the active path's interior boundaries to be nondecreasing
    (``T2 <= T4 <= T5`` on the item-first path, ``T1 <= T3 <= T5`` on the
    user-first path).
    """
    th = thresholds(N, q_U, q_I)
    rich = log2(q_I) <= q_U
    if th.T1 < th.T2:
        return (th.T1 <= th.T3 <= th.T5) if rich else True
    return (th.T2 <= th.T4 <= th.T5) if rich else th.T2 <= th.T4


def regret_curve_R_continuous(N: int, q_U: int, q_I: int, T: float) -> tuple[float, str]:
    """``R(T)`` with each later piece rescaled by a constant so the curve is
    continuous at every row boundary.  Nondecreasing whenever the table is
    consistent, since each piece is nondecreasing.
    """
    rows = _table_rows(N, q_U, q_I)
    active = [r for r in rows if r[4] and r[3] >= max(r[1], 1.0) and (r[1] < r[3] or r[2])]
    active.sort(key=lambda r: r[1])
    hit = matching_rows(N, q_U, q_I, T)
    if len(hit) != 1:
        raise AmbiguousRegime(f"{len(hit)} rows match (N={N}, q_U={q_U}, q_I={q_I}, T={T})")
    target = rows[hit[0]]
    scale = 1.0
    for prev, cur in zip(active, active[1:]):
        b = cur[1]
        if b >= 1.0:
            scale *= prev[5](b) / cur[5](b) if cur[5](b) > 0 else 1.0
        if cur is target:
            break
    if target is active[0]:
        scale = 1.0
    return scale * target[5](T), target[0]


# upper curves ---------------------------------------------------------------

def upper_curves(N: int, q_U: int, q_I: int, T: float) -> tuple[float, float]:
    th = thresholds(N, q_U, q_I)
    r_U, r_I = th.r_U, th.r_I
    R_U = r_U + q_U / N * T
    if T < th.T_Item:
        R_I = (log2(T) if T >= 1 else 0.0) + math.sqrt(q_I * r_I * T / N)
    elif T < th.T_Hybrid:
        R_I = r_U + math.sqrt(q_I * q_U * r_I * T) / N
    else:
        R_I = r_U + q_U / N * q_I * log2(N * q_I) + r_I / N * T
    return R_U, R_I


# lower bound ----------------------------------------------------------------

def lower_bound(N: int, q_U: int, q_I: int, T: float) -> float:
    """Closed-form regret lower bound per user, with the unknown constant set to 1."""
    s_U, s_I = s_user(N, q_U, q_I), s_item(N, q_I)
    lqI = max(log2(q_I), 1.0)  # q_I = 1
    sq = math.sqrt(q_I)
    terms = [
        N,
        min(N * T, N * s_U, sq),
        min(q_U * T, sq),
        min(N * T / lqI, math.sqrt(T * q_I * N), N * s_U),
        min(q_U * T / lqI, math.sqrt(T * q_I * q_U)),
        min(T * s_I, T * q_U),
    ]
    return max(terms) / N


def _minimax_parts(N, q_U, q_I, T):
    s_U, s_I = s_user(N, q_U, q_I), s_item(N, q_I)
    lqI = max(log2(q_I), 1.0)
    a, b = T / (8 * lqI), T / 2

    def f1(g):
        g = np.asarray(g, float)
        mid = max(T, math.sqrt(q_I))
        return np.where(g <= a, T * q_I / g, np.where(g <= b, mid, float(T)))

    def f2(g):
        g = np.asarray(g, float)
        return np.maximum(q_U * g, N * np.minimum(s_U, g))

    f3 = T * min(s_I, q_U)
    return f1, f2, f3, (a, b, float(s_U))


def lower_bound_minimax(N: int, q_U: int, q_I: int, T: float, grid: int = 4001) -> tuple[float, float]:
    """``(1/64) * min_{gamma >= 1} max{f1, f2, f3}`` by log grid plus local
    refinement, divided by N.  Returns ``(value, argmin gamma)``."""
    f1, f2, f3, kinks = _minimax_parts(N, q_U, q_I, T)

    def obj(g):
        return np.maximum(np.maximum(f1(g), f2(g)), f3)

    hi = max(4.0, 4 * T * q_I, 4 * T, 4 * max(kinks))
    g = np.unique(np.concatenate([
        np.geomspace(1.0, hi, grid),
        [k for k in kinks if k >= 1], [k * (1 + 1e-12) for k in kinks if k >= 1],
    ]))
    vals = obj(g)
    k = int(np.argmin(vals))
    best_val, best = float(vals[k]), float(g[k])
    lo_g, hi_g = g[max(k - 1, 0)], g[min(k + 1, len(g) - 1)]
    for _ in range(3):
        fine = np.linspace(lo_g, hi_g, 2001)
        fv = obj(fine)
        j = int(np.argmin(fv))
        if fv[j] < best_val:
            best_val, best = float(fv[j]), float(fine[j])
        lo_g, hi_g = fine[max(j - 1, 0)], fine[min(j + 1, len(fine) - 1)]
    return best_val / 64.0 / N, best


# heuristic operating point ---------------------------------------------------

@dataclass(frozen=True)
class HeuristicParams:
    I_usr: float
    I_rep: float
    I_exp: float
    regime: str
    cost: float
    f: float
    g: float


def heuristic_cost(N: int, T: float, q_U: int, q_I: int, I_usr: float, I_rep: float) -> float:
    """Approximate per-user regret of a budget choice, with ``I_exp`` set to its
    optimum for the given ``I_rep`` and ``I_usr`` either 0 or ``r_U``."""
    r_U, r_I = r_user(N, q_U), r_item(N, q_I)
    ell = min(I_rep / 2.0, q_I)
    if ell <= 0:
        return math.inf
    explore = 2 * q_I * r_I / ell
    if I_usr:
        total = N * r_U + I_rep * q_U + explore * max(T - I_rep / 2.0, 0.0)
    else:
        total = I_rep * N + explore * T
    return total / (2.0 * N)


def heuristic_params(N: int, T: float, q_U: int, q_I: int) -> HeuristicParams:
    r_U, r_I = r_user(N, q_U), max(r_item(N, q_I), 1)  # r_I = 0 only when N = q_I = 1
    if T <= q_I * r_I / q_U or q_U <= r_I:
        f_reg = "S1"
        f = r_U / 2 + q_U * T / N
        f_opt = (r_U, 2 * T, 0.0)
    elif T <= q_I * q_U / r_I:
        f_reg = "S2"
        f = r_U / 2 + 2 * math.sqrt(q_U * q_I * r_I * T) / N - q_I * r_I / N
        f_opt = (r_U, 2 * math.sqrt(T * q_I * r_I / q_U), 2 * math.sqrt(T * q_I * q_U / r_I) - 2 * q_I)
    else:
        f_reg = "S3"
        f = r_U / 2 + q_I * (q_U - r_I) / N + r_I * T / N
        f_opt = (r_U, 2 * q_I, 2 * T - 2 * q_I)
    if T <= q_I * N / r_I:
        g_reg = "S4"
        g = 2 * math.sqrt(q_I * r_I * T / N)
        g_opt = (0, 2 * math.sqrt(q_I * r_I * T / N), 2 * math.sqrt(q_I * T * N / r_I))
    else:
        g_reg = "S5"
        g = q_I + r_I * T / N
        g_opt = (0, 2 * q_I, 2 * T)
    if f <= g:
        regime, (iu, ir, ie), cost = f_reg, f_opt, f
    else:
        regime, (iu, ir, ie), cost = g_reg, g_opt, g
    return HeuristicParams(float(iu), float(ir), float(ie), regime, float(cost), float(f), float(g))


def heuristic_grid_min(N: int, T: float, q_U: int, q_I: int, points: int = 20000) -> float:
    """Brute-force minimum of ``heuristic_cost`` over ``I_usr in {0, r_U}`` and
    a dense ``I_rep`` grid."""
    r_U = r_user(N, q_U)
    hi = max(4.0 * q_I, 4.0 * T, 4.0)
    reps = np.unique(np.concatenate([np.geomspace(1e-3, hi, points), np.linspace(1e-3, hi, points)]))
    ell = np.minimum(reps / 2, q_I)
    r_I = r_item(N, q_I)
    explore = 2 * q_I * r_I / ell
    with_users = N * r_U + reps * q_U + explore * np.maximum(T - reps / 2, 0)
    no_users = reps * N + explore * T
    return float(min(with_users.min(), no_users.min()) / (2.0 * N))


# cold start & assumptions ---------------------------------------------------

def coldstart_bounds(N: int, q_U: int, q_I: int) -> tuple[float, float]:
    lN, lqU, lqI = log2(N), log2(q_U), log2(q_I)
    upper = min(lN ** 2, max(q_I * lqI / N * log2(N * q_I) ** 2, 16.0))
    lower = min(lN * lqU, max(q_I * lqI ** 2 / N, 16.0))
    return upper, lower


def check_assumptions(N: int, q_U: int, q_I: int) -> list[str]:
    lN = log2(N)
    checks = [
        ("N>100", N > 100),
        ("N>20*q_U*log2(q_U)^2", N > 20 * q_U * log2(q_U) ** 2),
        ("q_U>100*log2(N)", q_U > 100 * lN),
        ("q_I>100*log2(N)", q_I > 100 * lN),
        ("q_U>log2(q_I)^2", q_U > log2(q_I) ** 2),
        ("q_I>log2(N)^5", q_I > lN ** 5),
    ]
    return [name for name, ok in checks if not ok]


# bundled point -----------------------------------------------------------------

@dataclass(frozen=True)
class TheoryPoint:
    T: float
    R: float | None
    regime: str
    R_U: float
    R_I: float
    lower: float
    violations: list[str] = field(default_factory=list)


def theory_point(N: int, q_U: int, q_I: int, T: float) -> TheoryPoint:
    try:
        R, regime = regret_curve_R(N, q_U, q_I, T)
    except AmbiguousRegime:
        R, regime = None, "AMBIGUOUS"
    R_U, R_I = upper_curves(N, q_U, q_I, T)
    return TheoryPoint(T, R, regime, R_U, R_I, lower_bound(N, q_U, q_I, T), check_assumptions(N, q_U, q_I))
