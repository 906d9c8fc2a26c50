"""Explore-then-exploit recommender with user and item clustering, plus baselines.

Exploration forms three batches of fresh items: a user-clustering batch
rated by everybody, a batch of representatives rated once per user cluster,
and an exploration batch whose items are each rated by a few random users
and grouped with the representatives they agree with.  Exploitation then
serves every user items grouped with representatives their cluster liked.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import theory
from .model import (PHASE_CODE, Environment, HorizonReached, LatentWorld, ModelConfig, Trace,
                    generate_world, regret_curve)
from .rng import ALG_STREAM, substream

STRATEGIES = ("recsys", "random", "useruser", "itemitem", "heuristic")


@dataclass(frozen=True)
class AlgParams:
    r_U: int
    r_I: int
    I_usr: int
    I_rep: int
    I_exp: int
    ell: float
    item_clust: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _ell(N: int, q_U: int, q_I: int, T: int, r_U: int, r_I: int) -> float:
    k_item = theory.k_item(N, q_I, T, r_I)
    k_hybrid = theory.k_hybrid(N, q_U, q_I, T)
    if k_item <= r_U:
        ell = k_item
    elif k_hybrid <= q_I / 3:
        ell = k_hybrid
    else:
        ell = float(q_I)
    return min(max(ell, 1.0), float(q_I))


def no_item_clust_params(N: int, q_U: int, q_I: int, T: int) -> AlgParams:
    r_U, r_I = theory.r_user(N, q_U), theory.r_item(N, q_I)
    return AlgParams(r_U, r_I, I_usr=r_U, I_rep=6 * T, I_exp=0,
                     ell=_ell(N, q_U, q_I, T, r_U, r_I), item_clust=False)


def item_clust_params(N: int, q_U: int, q_I: int, T: int) -> AlgParams:
    r_U, r_I = theory.r_user(N, q_U), theory.r_item(N, q_I)
    ell = _ell(N, q_U, q_I, T, r_U, r_I)
    I_exp = math.ceil(16 * q_I / ell * T)
    I_usr = r_U if ell > r_U else 0
    I_rep = math.ceil(3 * ell) if ell <= q_I / 3 else math.ceil(q_I * theory.log2(N * q_I))
    return AlgParams(r_U, r_I, I_usr=I_usr, I_rep=I_rep, I_exp=I_exp, ell=ell, item_clust=True)


def select_params(N: int, q_U: int, q_I: int, T: int) -> AlgParams:
    T = max(int(T), 1)
    R_U, R_I = theory.upper_curves(N, q_U, q_I, T)
    if R_I < R_U:
        return item_clust_params(N, q_U, q_I, T)
    return no_item_clust_params(N, q_U, q_I, T)


def heuristic_alg_params(N: int, q_U: int, q_I: int, T: int) -> AlgParams:
    T = max(int(T), 1)
    h = theory.heuristic_params(N, T, q_U, q_I)
    r_U, r_I = theory.r_user(N, q_U), theory.r_item(N, q_I)
    I_rep = max(math.ceil(h.I_rep), 0)
    I_exp = max(math.ceil(h.I_exp), 0)
    return AlgParams(r_U, r_I, I_usr=math.ceil(h.I_usr), I_rep=I_rep, I_exp=I_exp,
                     ell=min(I_rep / 2, q_I), item_clust=I_exp > 0)


def strategy_params(strategy: str, N: int, q_U: int, q_I: int, T: int) -> AlgParams | None:
    T = max(int(T), 1)
    if strategy == "recsys":
        return select_params(N, q_U, q_I, T)
    if strategy == "useruser":
        return no_item_clust_params(N, q_U, q_I, T)
    if strategy == "itemitem":
        return replace(item_clust_params(N, q_U, q_I, T), I_usr=0)
    if strategy == "heuristic":
        return heuristic_alg_params(N, q_U, q_I, T)
    if strategy == "random":
        return None
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


# phases ------------------------------------------------------------------------

@dataclass
class Partition:
    cluster_of: np.ndarray
    clusters: list[np.ndarray]

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "Partition":
        """Relabel clusters in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        cluster_of = rank[inv.ravel()].astype(np.int64)
        clusters = [np.flatnonzero(cluster_of == k) for k in range(len(order))]
        return cls(cluster_of, clusters)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls.from_labels(np.arange(n))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], np.int64)

    def __len__(self) -> int:
        return len(self.clusters)

    def is_pure(self, user_type: np.ndarray) -> bool:
        """Every cluster holds users of a single true type."""
        return all(len(np.unique(user_type[c])) == 1 for c in self.clusters)


def user_clustering(env: Environment, items: np.ndarray, r_U: int) -> Partition:
    """Show every item to every user; group users with identical feedback."""
    N = env.n_users
    feedback = np.zeros((N, len(items)), np.int8)
    for k, item in enumerate(items):
        feedback[:, k] = env.step(np.full(N, item, np.int64), "usr-clust")
    if len(items) >= r_U and len(items) > 0:
        _, inv = np.unique(feedback, axis=0, return_inverse=True)
        return Partition.from_labels(inv.ravel())
    return Partition.singletons(N)


def find_prefs(env: Environment, reps: np.ndarray, partition: Partition) -> np.ndarray:
    """Have each cluster rate each representative once.

    Returns an ``(n_clusters, len(reps))`` table of the ratings obtained.
    Idle members are given fresh filler items.
    """
    R = len(reps)
    prefs = np.zeros((len(partition), R), np.int8)
    if R == 0:
        return prefs
    steps = math.ceil(R / int(partition.sizes.min()))
    N = env.n_users
    for s in range(steps):
        recs = np.empty(N, np.int64)
        phases = np.full(N, PHASE_CODE["filler"], np.uint8)
        slots: list[tuple[int, np.ndarray, np.ndarray]] = []
        for w, members in enumerate(partition.clusters):
            lo = s * len(members)
            idx = np.arange(lo, min(lo + len(members), R))
            busy = members[:len(idx)]
            recs[busy] = reps[idx]
            phases[busy] = PHASE_CODE["find-prefs"]
            idle = members[len(idx):]
            if len(idle):
                recs[idle] = env.fresh_items(len(idle))
            slots.append((w, busy, idx))
        ratings = env.step(recs, phases)
        for w, busy, idx in slots:
            prefs[w, idx] = ratings[busy]
    return prefs


@dataclass
class ItemClusters:
    members: list[np.ndarray]
    exp_prefs: np.ndarray
    exp_rated: np.ndarray


def item_clustering(env: Environment, reps: np.ndarray, exp_items: np.ndarray, partition: Partition,
                    prefs: np.ndarray, r_I: int, rng: np.random.Generator) -> ItemClusters:
    """Have each exploration item rated by ``min(r_I, N)`` users and attach it
    to every representative it agrees with on all clusters that rated it.

    Users are assigned by repeating one random permutation; each copy of the
    permutation is one time step and consecutive positions hold one item.
    """
    N = env.n_users
    n_exp, n_rep, W = len(exp_items), len(reps), len(partition)
    r = min(r_I, N)
    exp_prefs = np.zeros((n_exp, W), np.int8)
    exp_rated = np.zeros((n_exp, W), bool)
    if n_exp == 0 or r == 0:
        return ItemClusters([reps[j:j + 1] for j in range(n_rep)], exp_prefs, exp_rated)
    perm = rng.permutation(N)
    total = n_exp * r
    steps = math.ceil(total / N)
    rater_cluster = np.empty((n_exp, r), np.int64)
    rater_value = np.empty((n_exp, r), np.int8)
    for s in range(steps):
        pos = s * N + np.arange(N)
        live = pos < total
        recs = np.empty(N, np.int64)
        phases = np.full(N, PHASE_CODE["filler"], np.uint8)
        users_live = perm[live]
        item_idx = pos[live] // r
        recs[users_live] = exp_items[item_idx]
        phases[users_live] = PHASE_CODE["item-clust"]
        if (~live).any():
            recs[perm[~live]] = env.fresh_items(int((~live).sum()))
        ratings = env.step(recs, phases)
        slot = pos[live] % r
        rater_cluster[item_idx, slot] = partition.cluster_of[users_live]
        rater_value[item_idx, slot] = ratings[users_live]
    # first recorded rating wins when a cluster rated an item more than once
    first = np.ones((n_exp, r), bool)
    for k in range(1, r):
        first[:, k] = ~np.any(rater_cluster[:, :k] == rater_cluster[:, k:k + 1], axis=1)
    mismatch = np.zeros((n_exp, n_rep), bool)
    rows = np.arange(n_exp)
    for k in range(r):
        f = first[:, k]
        w = rater_cluster[:, k]
        v = rater_value[:, k]
        exp_prefs[rows[f], w[f]] = v[f]
        exp_rated[rows[f], w[f]] = True
        if n_rep:
            mismatch |= (prefs[w, :] != v[:, None]) & f[:, None]
    members = [np.concatenate([reps[j:j + 1], exp_items[~mismatch[:, j]]]) for j in range(n_rep)]
    return ItemClusters(members, exp_prefs, exp_rated)


@dataclass
class Exploration:
    params: AlgParams
    partition: Partition
    reps: np.ndarray
    exp_items: np.ndarray
    usr_items: np.ndarray
    prefs: np.ndarray
    clusters: ItemClusters
    cluster_sets: list[np.ndarray]
    steps: int
    expected_steps: int

    def exploit_set(self, user: int) -> np.ndarray:
        return self.cluster_sets[self.partition.cluster_of[user]]


def exploration_length(params: AlgParams, partition: Partition, N: int) -> int:
    rep_steps = math.ceil(params.I_rep / int(partition.sizes.min())) if params.I_rep else 0
    r = min(params.r_I, N)
    return params.I_usr + rep_steps + math.ceil(r * params.I_exp / N)


def explore(env: Environment, params: AlgParams, rng: np.random.Generator) -> Exploration:
    start = env.t
    usr_items = env.fresh_items(params.I_usr)
    reps = env.fresh_items(params.I_rep)
    exp_items = env.fresh_items(params.I_exp)
    partition = user_clustering(env, usr_items, params.r_U)
    prefs = find_prefs(env, reps, partition)
    clusters = item_clustering(env, reps, exp_items, partition, prefs, params.r_I, rng)
    sets = []
    for w in range(len(partition)):
        liked = np.flatnonzero(prefs[w] == 1)
        if len(liked):
            sets.append(np.unique(np.concatenate([clusters.members[j] for j in liked])))
        else:
            sets.append(np.zeros(0, np.int64))
    expected = exploration_length(params, partition, env.n_users)
    steps = env.t - start
    if steps != expected:
        raise AssertionError(f"exploration used {steps} steps, expected {expected}")
    return Exploration(params, partition, reps, exp_items, usr_items, prefs, clusters, sets, steps, expected)


def exploit(env: Environment, exploration: Exploration, T: int) -> None:
    """Serve unseen items from each user's exploit set, else fresh items, until ``t == T``."""
    N = env.n_users
    remaining = T - env.t
    if remaining <= 0:
        return
    history = env.items_matrix()
    # exploit sets only hold exploration items, so one filter against past ratings suffices
    queue = np.full((N, remaining), -1, np.int64)
    for u in range(N):
        pool = exploration.exploit_set(u)
        if len(pool):
            avail = pool[~np.isin(pool, history[:, u])][:remaining]
            queue[u, :len(avail)] = avail
    exploit_code, filler_code = PHASE_CODE["exploit"], PHASE_CODE["filler"]
    for k in range(remaining):
        recs = queue[:, k].copy()
        empty = recs < 0
        phases = np.where(empty, filler_code, exploit_code).astype(np.uint8)
        if empty.any():
            recs[empty] = env.fresh_items(int(empty.sum()))
        env.step(recs, phases)


def _run_random(env: Environment, T: int) -> None:
    while env.t < T:
        env.step(env.fresh_items(env.n_users), "filler")


def _run_segment(env: Environment, strategy: str, T: int, rng: np.random.Generator,
                 params: AlgParams | None = None) -> tuple[AlgParams | None, Exploration | None]:
    """Run one fixed-horizon instance for ``T`` steps starting at ``env.t``."""
    start = env.t
    end = start + T
    cap = env.horizon
    env.horizon = end if cap is None else min(cap, end)
    N = env.n_users
    q_U, q_I = env.world.config.n_user_types, env.world.config.n_item_types
    if params is None:
        params = strategy_params(strategy, N, q_U, q_I, T)
    exploration = None
    try:
        if params is None:
            _run_random(env, end)
        else:
            exploration = explore(env, params, rng)
            exploit(env, exploration, end)
    except HorizonReached:
        pass
    finally:
        env.horizon = cap
    return params, exploration


def run(config: ModelConfig, T: int, alg: str = "recsys", alg_seed: int = 0,
        params: AlgParams | None = None) -> Trace:
    """Simulate one fixed-horizon run of ``alg`` for ``T`` steps.

    ``params`` overrides the strategy's budgets (ignored for ``random``).
    """
    return run_world(generate_world(config), T, alg, alg_seed, params)


def run_world(world: LatentWorld, T: int, alg: str = "recsys", alg_seed: int = 0,
              params: AlgParams | None = None) -> Trace:
    if T < 0:
        raise ValueError("T must be nonnegative")
    if alg not in STRATEGIES:
        raise ValueError(f"unknown strategy {alg!r}; expected one of {STRATEGIES}")
    env = Environment(world)
    exploration = None
    if alg == "random":
        params = None
    if T > 0:
        params, exploration = _run_segment(env, alg, T, substream(alg_seed, ALG_STREAM, 0), params)
    meta = {"strategy": alg, "params": params, "exploration": exploration, "alg_seed": alg_seed}
    return env.trace(meta)


def run_anytime(config: ModelConfig, T_max: int, alg: str = "recsys", alg_seed: int = 0) -> Trace:
    """Restart the fixed-horizon algorithm on intervals of length 2, 4, 8, ..."""
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    if alg not in STRATEGIES:
        raise ValueError(f"unknown strategy {alg!r}; expected one of {STRATEGIES}")
    env = Environment(generate_world(config))
    env.horizon = T_max
    boundaries = []
    k = 1
    while env.t < T_max:
        length = 2**k
        _run_segment(env, alg, length, substream(alg_seed, ALG_STREAM, k))
        boundaries.append(env.t)
        k += 1
    env.horizon = None
    return env.trace({"strategy": alg, "boundaries": boundaries, "alg_seed": alg_seed})


def regret_of(trace: Trace) -> np.ndarray:
    return regret_curve(trace)
