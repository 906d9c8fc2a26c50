"""Monte Carlo experiment orchestration and CSV emission."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import theory
from .algorithm import STRATEGIES, run, run_anytime
from .instrumentation import CATEGORIES, audit, empirical_bad_fraction, verify_constraints
from .model import ModelConfig, regret_curve

CSV_COLUMNS = ("N", "q_U", "q_I", "strategy", "T", "regret_mean", "regret_stderr", "R_theory",
               "regime", "R_U", "R_I", "lower", "violations")


class ResourceCapExceeded(RuntimeError):
    pass


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class ExperimentSpec:
    n_users: list[int]
    n_user_types: list[int]
    n_item_types: list[int]
    horizons: list[int]
    strategies: list[str] = field(default_factory=lambda: ["recsys", "random"])
    trials: int = 10
    base_seed: int = 0
    checkpoints: list[int] | None = None
    gamma: float = 1.0
    audit: bool = False
    params_mode: str = "max-T"
    anytime: bool = False
    s_I: int | None = None
    s_U: int | None = None
    workers: int = 1
    max_ops: int = 2_000_000_000

    def __post_init__(self):
        for name in ("n_users", "n_user_types", "n_item_types", "horizons", "strategies"):
            setattr(self, name, _as_list(getattr(self, name)))
        if self.checkpoints is not None:
            self.checkpoints = sorted(set(int(c) for c in _as_list(self.checkpoints)))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.strategies:
            raise ValueError("strategies must be nonempty")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        if not self.horizons or min(self.horizons) < 1:
            raise ValueError("horizons must be positive")
        if self.params_mode not in ("max-T", "per-T"):
            raise ValueError("params_mode must be 'max-T' or 'per-T'")
        if self.checkpoints is not None and (min(self.checkpoints) < 1 or max(self.checkpoints) > self.max_T):
            raise ValueError("checkpoints must lie in [1, max horizon]")

    @property
    def max_T(self) -> int:
        return max(self.horizons)

    @property
    def points(self) -> list[int]:
        return self.checkpoints if self.checkpoints is not None else sorted(set(self.horizons))

    def configs(self) -> list[tuple[int, int, int]]:
        return list(itertools.product(self.n_users, self.n_user_types, self.n_item_types))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CurvePoint:
    N: int
    q_U: int
    q_I: int
    strategy: str
    T: int
    regret_mean: float
    regret_stderr: float
    R_theory: float | None
    regime: str
    R_U: float
    R_I: float
    lower: float
    violations: tuple[str, ...]
    n_trials: int

    def row(self) -> list[str]:
        return [str(self.N), str(self.q_U), str(self.q_I), self.strategy, str(self.T),
                fmt_float(self.regret_mean), fmt_float(self.regret_stderr), fmt_float(self.R_theory), self.regime,
                fmt_float(self.R_U), fmt_float(self.R_I), fmt_float(self.lower), ";".join(self.violations)]


def fmt_float(x: float | None) -> str:
    if x is None:
        return ""
    return format(float(x), ".10g")


def _audit_levels(spec: ExperimentSpec, N: int, q_U: int, q_I: int) -> tuple[int, int]:
    s_I = theory.s_item(N, q_I) if spec.s_I is None else spec.s_I
    s_U = theory.s_user(N, q_U, q_I) if spec.s_U is None else spec.s_U
    return s_I, s_U


def _trial(args) -> list[float]:
    """Regret at each checkpoint for one (config, strategy, trial)."""
    spec, N, q_U, q_I, strategy, trial = args
    seed = spec.base_seed + trial
    config = ModelConfig(N, q_U, q_I, seed)
    points = spec.points
    horizons = [spec.max_T] if spec.params_mode == "max-T" else points
    out: dict[int, float] = {}
    for T in horizons:
        if spec.anytime:
            trace = run_anytime(config, T, strategy, seed)
        else:
            trace = run(config, T, strategy, seed)
        if spec.audit:
            s_I, s_U = _audit_levels(spec, N, q_U, q_I)
            stats = audit(trace, trace.world, s_I, s_U)
            verify_constraints(stats, trace.horizon, N, s_I, s_U).raise_for_failure()
        curve = regret_curve(trace)
        if spec.params_mode == "max-T":
            out = {p: float(curve[p - 1]) for p in points}
        else:
            out[T] = float(curve[T - 1])
    return [out[p] for p in points]


def _estimated_ops(spec: ExperimentSpec) -> int:
    per_T = spec.max_T if spec.params_mode == "max-T" else sum(spec.points)
    return sum(N for N, _, _ in spec.configs()) * per_T * spec.trials * len(spec.strategies)


def monte_carlo(spec: ExperimentSpec, config: tuple[int, int, int] | None = None) -> list[CurvePoint]:
    """Mean and standard error of per-user regret at each checkpoint."""
    if config is None:
        configs = spec.configs()
        if len(configs) != 1:
            raise ValueError("monte_carlo takes a single configuration; use sweep for grids")
        config = configs[0]
    N, q_U, q_I = config
    jobs = [(spec, N, q_U, q_I, s, k) for s in spec.strategies for k in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_trial, jobs))
    else:
        results = [_trial(j) for j in jobs]
    table = np.array(results, float).reshape(len(spec.strategies), spec.trials, len(spec.points))
    violations = tuple(theory.check_assumptions(N, q_U, q_I))
    out = []
    for si, strategy in enumerate(spec.strategies):
        for pi, T in enumerate(spec.points):
            vals = table[si, :, pi]
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            tp = theory.theory_point(N, q_U, q_I, T)
            out.append(CurvePoint(N, q_U, q_I, strategy, T, float(vals.mean()), se, tp.R, tp.regime,
                                  tp.R_U, tp.R_I, tp.lower, violations, spec.trials))
    return out


def sweep(spec: ExperimentSpec) -> list[CurvePoint]:
    """Cartesian product over the configuration lists."""
    ops = _estimated_ops(spec)
    if ops > spec.max_ops:
        raise ResourceCapExceeded(f"sweep needs ~{ops} ratings, cap is {spec.max_ops}")
    rows: list[CurvePoint] = []
    for config in spec.configs():
        rows.extend(monte_carlo(spec, config))
    return rows


def estimate_coldstart(curve: Sequence[float], gamma: float, N: int) -> int | None:
    """First ``T`` (1-based) with ``regret(T)/T <= gamma/log2(N*T)``."""
    for T, value in enumerate(curve, start=1):
        if value / T <= gamma / math.log2(N * T):
            return T
    return None


def write_csv(points: Iterable[CurvePoint], out: str | Path | io.TextIOBase | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow(p.row())
    text = buf.getvalue()
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    elif out is not None:
        out.write(text)
    return text


# verification suite -------------------------------------------------------------

@dataclass(frozen=True)
class VerifyRow:
    seed: int
    strategy: str
    constraint: int
    description: str
    lhs: str
    rhs: str
    status: str


def verify_suite(spec: ExperimentSpec) -> tuple[list[VerifyRow], dict[str, object]]:
    """Audit every (config, strategy, trial) at the largest horizon."""
    rows: list[VerifyRow] = []
    traces = []
    stats = []
    for N, q_U, q_I in spec.configs():
        s_I, s_U = _audit_levels(spec, N, q_U, q_I)
        for strategy in spec.strategies:
            for k in range(spec.trials):
                seed = spec.base_seed + k
                trace = run(ModelConfig(N, q_U, q_I, seed), spec.max_T, strategy, seed)
                st = audit(trace, trace.world, s_I, s_U)
                rep = verify_constraints(st, trace.horizon, N, s_I, s_U)
                for r in rep.results:
                    status = "n/a" if r.ok is None else ("pass" if r.ok else "FAIL")
                    rows.append(VerifyRow(seed, strategy, r.index, r.description, str(r.lhs), str(r.rhs), status))
                traces.append(trace)
                stats.append(st)
    rates = empirical_bad_fraction(traces, stats=stats)
    return rows, rates


def write_verify_csv(rows: Sequence[VerifyRow], rates: dict, out_matrix, out_rates=None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "strategy", "constraint", "description", "lhs", "rhs", "status"])
    for r in rows:
        w.writerow([r.seed, r.strategy, r.constraint, r.description, r.lhs, r.rhs, r.status])
    _emit(buf.getvalue(), out_matrix)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["category", "events", "dislikes", "rate", "stderr", "ci_low", "ci_high"])
    for name in CATEGORIES:
        c = rates[name]
        w.writerow([name, c.events, c.dislikes, fmt_float(c.rate), fmt_float(c.stderr), fmt_float(c.ci_low), fmt_float(c.ci_high)])
    _emit(buf.getvalue(), out_rates)


def _emit(text: str, out) -> None:
    if out is None:
        return
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    else:
        out.write(text)

