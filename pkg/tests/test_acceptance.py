"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import functools
import math
import random
import subprocess
import sys

import numpy as np
import pytest

from latentrec import theory as th
from latentrec.algorithm import STRATEGIES, AlgParams, run, run_anytime, run_world, user_clustering
from latentrec.harness import ExperimentSpec, monte_carlo
from latentrec.instrumentation import audit, empirical_bad_fraction, verify_constraints
from latentrec.model import PHASE_CODE, Environment, ModelConfig, generate_world
from latentrec.regularity import estimate_regularity_prob, is_column_regular

pytestmark = pytest.mark.acceptance


def report(capsys, number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}: {detail}"
    with capsys.disabled():
        print("\n" + line, flush=True)
    assert ok, line


def binomial_cap(p0, n):
    return p0 + 3 * math.sqrt(p0 * (1 - p0) / n)


def test_01_counting_constraints(capsys):
    tuples = [(20, 2, 4, 30), (30, 3, 8, 40), (40, 4, 16, 30), (25, 5, 5, 25), (50, 2, 32, 40)]
    traces = checks = 0
    failures = []
    for N, q_U, q_I, T in tuples:
        for strategy in STRATEGIES:
            for seed in range(20):
                trace = run(ModelConfig(N, q_U, q_I, seed), T, strategy, seed)
                traces += 1
                for s_I in (1, 2, 3):
                    for s_U in (1, 2, 3):
                        rep = verify_constraints(audit(trace, trace.world, s_I, s_U), T, N, s_I, s_U)
                        checks += len(rep.results)
                        failures.extend(rep.failures)
    ok = traces >= 500 and not failures
    report(capsys, 1, "counting constraints", ok,
           f"{traces} traces, {checks} inequality checks, {len(failures)} failures")


def test_02_random_baseline(capsys):
    spec = ExperimentSpec(n_users=[100], n_user_types=[4], n_item_types=[16], horizons=[200],
                          strategies=["random"], trials=200, base_seed=1000)
    pt = monte_carlo(spec)[0]
    ok = abs(pt.regret_mean - 100) <= 3 * pt.regret_stderr
    report(capsys, 2, "random baseline regret", ok,
           f"mean {pt.regret_mean:.4f} vs T/2 = 100, stderr {pt.regret_stderr:.4f}")


def test_03_user_clustering_error(capsys):
    N, q_U, q_I, trials = 200, 8, 64, 400
    r_U = th.r_user(N, q_U)
    impure = 0
    for seed in range(trials):
        world = generate_world(ModelConfig(N, q_U, q_I, seed))
        env = Environment(world)
        part = user_clustering(env, env.fresh_items(r_U), r_U)
        impure += not part.is_pure(world.user_type)
    cap = binomial_cap(1 / N, trials)
    report(capsys, 3, "user clustering error", impure / trials <= cap,
           f"{impure}/{trials} impure partitions (I_usr = r_U = {r_U}), rate {impure / trials:.4f} <= {cap:.4f}")


ITEM_CASE = dict(N=500, q_U=160, q_I=256, trials=20)


@functools.lru_cache(maxsize=None)
def item_clustering_runs():
    N, q_U, q_I = ITEM_CASE["N"], ITEM_CASE["q_U"], ITEM_CASE["q_I"]
    r_U, r_I = th.r_user(N, q_U), th.r_item(N, q_I)
    params = AlgParams(r_U=r_U, r_I=r_I, I_usr=r_U, I_rep=20, I_exp=500, ell=10.0, item_clust=True)
    out = []
    for seed in range(ITEM_CASE["trials"]):
        world = generate_world(ModelConfig(N, q_U, q_I, seed))
        out.append(run_world(world, 200, "recsys", seed, params))
    return out


def misclassified_items(trace):
    """Exploration items grouped with a representative of a different true type."""
    ex = trace.meta["exploration"]
    w = trace.world
    bad = set()
    rep_types = w.item_types(ex.reps)
    for j, members in enumerate(ex.clusters.members):
        extra = members[1:]
        bad.update(extra[w.item_types(extra) != rep_types[j]].tolist())
    return bad


def test_04_item_clustering_error(capsys):
    classified = wrong = 0
    for trace in item_clustering_runs():
        classified += len(trace.meta["exploration"].exp_items)
        wrong += len(misclassified_items(trace))
    cap = binomial_cap(2 / ITEM_CASE["N"], classified)
    ok = classified >= 10**4 and wrong / classified <= cap
    report(capsys, 4, "item clustering error", ok,
           f"{wrong}/{classified} misclassified, rate {wrong / classified:.5f} <= {cap:.5f}")


def _purity_counts(traces):
    """``(qualifying trials, exploit recs, dislikes, dislikes in excluded trials)``."""
    qualifying = events = dislikes = excluded = 0
    for trace in traces:
        ex = trace.meta["exploration"]
        if ex is None:
            continue
        mask = trace.phases == PHASE_CODE["exploit"]
        bad = int((trace.ratings[mask] == -1).sum())
        consumed = set(trace.items[mask].tolist()) & misclassified_items(trace)
        if not ex.partition.is_pure(trace.world.user_type) or consumed:
            excluded += bad
            continue
        qualifying += 1
        events += int(mask.sum())
        dislikes += bad
    return qualifying, events, dislikes, excluded


def test_05_exploit_purity(capsys):
    # second batch: few raters per exploration item, so misclassifications are common
    noisy_params = AlgParams(r_U=20, r_I=12, I_usr=0, I_rep=8, I_exp=120, ell=4.0, item_clust=True)
    noisy = [run(ModelConfig(60, 4, 8, seed), 40, "recsys", seed, noisy_params) for seed in range(100)]
    q1, e1, d1, x1 = _purity_counts(item_clustering_runs())
    q2, e2, d2, x2 = _purity_counts(noisy)
    ok = q1 > 0 and q2 > 0 and d1 + d2 == 0
    report(capsys, 5, "exploit purity", ok,
           f"{q1} + {q2} qualifying trials (clean + misclassification-prone batch), {e1 + e2} exploit "
           f"recommendations, {d1 + d2} dislikes; excluded trials had {x1 + x2} dislikes")


def test_06_b4_coin_flip(capsys):
    N, q_U, q_I = 100, 8, 32
    traces = [run(ModelConfig(N, q_U, q_I, seed), 40, strategy, seed)
              for strategy in ("random", "recsys") for seed in range(100)]
    s_I, s_U = th.s_item(N, q_I), th.s_user(N, q_U, q_I)
    b4 = empirical_bad_fraction(traces, s_I=s_I, s_U=s_U)["B4"]
    ok = b4.events >= 10**4 and abs(b4.rate - 0.5) <= 3 * b4.stderr
    report(capsys, 6, "B4 coin flip", ok,
           f"{b4.dislikes}/{b4.events} disliked, rate {b4.rate:.4f}, cluster stderr {b4.stderr:.4f} "
           f"({b4.clusters} clusters, s_I={s_I}, s_U={s_U})")


def test_07_regularity_bound(capsys):
    parts = []
    ok = True
    for m, n, s, eta in [(2**14, 8, 2, 1 / 3), (2**12, 6, 2, 1 / 4)]:
        est = estimate_regularity_prob(m, n, s, eta, 200, seed=7)
        ok &= est.consistent
        parts.append(f"(m={m},n={n},s={s}) rate {est.rate:.3f} ci [{est.ci_low:.3f},{est.ci_high:.3f}] "
                     f"bound {est.bound:.6f}")
    rng = np.random.default_rng(77)
    violations = regular_cases = 0
    for _ in range(1000):
        m, n = int(rng.integers(4, 129)), int(rng.integers(2, 7))
        s = int(rng.integers(1, n + 1))
        eta = float(rng.uniform(0.2, 0.95))
        A = (2 * rng.integers(0, 2, size=(m, n)) - 1).astype(np.int8)
        if is_column_regular(A, s, eta)[0]:
            regular_cases += 1
            violations += sum(not is_column_regular(A, k, eta)[0] for k in range(s))
    ok &= violations == 0 and regular_cases > 0
    parts.append(f"downward closure: {violations} violations over 1000 matrices ({regular_cases} regular)")
    report(capsys, 7, "regularity bound", ok, "; ".join(parts))


def test_08_heuristic_optimizer(capsys):
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(50):
        N, T = int(2 ** rng.uniform(7, 20)), int(2 ** rng.uniform(0, 20))
        q_U, q_I = int(2 ** rng.uniform(1, 10)), int(2 ** rng.uniform(1, 14))
        hp = th.heuristic_params(N, T, q_U, q_I)
        cost = th.heuristic_cost(N, T, q_U, q_I, hp.I_usr, hp.I_rep)
        worst = max(worst, cost / th.heuristic_grid_min(N, T, q_U, q_I))
    report(capsys, 8, "heuristic optimizer", worst <= 1.05, f"worst cost / grid minimum = {worst:.6f} <= 1.05")


def consistent_tuples(count=20, seed=9):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        N, q_U, q_I = int(2 ** rng.uniform(7, 24)), int(2 ** rng.uniform(1, 10)), int(2 ** rng.uniform(1, 16))
        if th.table_is_consistent(N, q_U, q_I):
            out.append((N, q_U, q_I))
    return out


def test_09_theory_self_consistency(capsys):
    tol = 1e-12
    multi = drops = raw_drops = points = 0
    ratios = []
    for N, q_U, q_I in consistent_tuples():
        t = th.thresholds(N, q_U, q_I)
        prev = None
        for T in np.geomspace(1, 100 * max(t.T5, t.T4, t.T3, 2.0), 100):
            points += 1
            multi += len(th.matching_rows(N, q_U, q_I, T)) != 1
            R, _ = th.regret_curve_R(N, q_U, q_I, T)
            cur = (th.regret_curve_R_continuous(N, q_U, q_I, T)[0], *th.upper_curves(N, q_U, q_I, T),
                   th.lower_bound(N, q_U, q_I, T))
            if prev is not None:
                drops += sum(b < a * (1 - tol) for a, b in zip(prev[0], cur))
                raw_drops += R < prev[1] * (1 - tol)
            prev = (cur, R)
            ratios.append(cur[3] / (min(T / 2, cur[1], cur[2]) * math.log2(N * R) ** 1.5))
    C = max(ratios)
    ok = points == 2000 and multi == 0 and drops == 0 and C <= 1.0
    report(capsys, 9, "theory self-consistency", ok,
           f"{points} points, {multi} without a unique row, {drops} monotonicity drops "
           f"(continuous R, R_U, R_I, lower), fitted C = {C:.4f}; unscaled table R drops at {raw_drops} "
           f"row changes (informational)")


def test_10_regret_shape(capsys):
    N, q_U, q_I, T = 400, 4, 32, 256
    spec = ExperimentSpec(n_users=[N], n_user_types=[q_U], n_item_types=[q_I], horizons=[T],
                          strategies=["recsys", "random"], trials=100, checkpoints=list(range(1, T + 1)))
    pts = monte_carlo(spec)
    rec = np.array([p.regret_mean for p in pts if p.strategy == "recsys"])
    rnd = np.array([p.regret_mean for p in pts if p.strategy == "random"])
    below = rec < rnd
    crossing = next((k + 1 for k in range(T) if below[k:].all()), None)
    start = math.ceil(th.coldstart_bounds(N, q_U, q_I)[0])
    inc = np.diff(np.concatenate([[0.0], rec]))[start - 1:]
    smooth = np.convolve(inc, np.ones(3) / 3, mode="valid")
    half = len(smooth) // 2
    trend = float(np.diff(smooth).mean())
    ok = crossing is not None and crossing < T and trend <= 0 and smooth[half:].mean() <= smooth[:half].mean()
    report(capsys, 10, "regret shape", ok,
           f"recsys below random for all T >= {crossing} (final {rec[-1]:.3f} vs {rnd[-1]:.3f}); "
           f"smoothed increments from T={start}: mean change {trend:.2e}, halves "
           f"{smooth[:half].mean():.4f} -> {smooth[half:].mean():.4f}")


def test_11_doubling_trick(capsys):
    N, q_U, q_I, trials = 100, 4, 16, 100
    checkpoints = [8, 16, 32, 64]
    fixed = {T: 0.0 for T in checkpoints}
    anytime = {T: 0.0 for T in checkpoints}
    for seed in range(trials):
        config = ModelConfig(N, q_U, q_I, seed)
        curve = run_anytime(config, max(checkpoints), "recsys", seed).regret_curve()
        for T in checkpoints:
            anytime[T] += curve[T - 1] / trials
            fixed[T] += run(config, T, "recsys", seed).regret_curve()[-1] / trials
    ratios = {T: anytime[T] / fixed[T] for T in checkpoints}
    ok = all(r <= 4 for r in ratios.values())
    report(capsys, 11, "doubling trick", ok,
           ", ".join(f"T={T}: {anytime[T]:.2f}/{fixed[T]:.2f}={ratios[T]:.2f}" for T in checkpoints))


def test_12_determinism(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, "-m", "latentrec", "simulate", "--N", "60", "--q-U", "3", "--q-I", "9",
                        "--T", "40", "--checkpoints", "10", "20", "40", "--strategies", *STRATEGIES,
                        "--trials", "4", "--seed", "123", "--out", str(path)], check=True)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    report(capsys, 12, "determinism", ok, f"two processes, {len(outs[0])} bytes each, identical={outs[0] == outs[1]}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
