import math

import numpy as np
import pytest

from latentrec.model import (Environment, LatentWorld, MissingUser, ModelConfig, RepeatViolation,
                             generate_world, regret_curve)
from conftest import make_world


def binomial_two_sided_tail(n, p, lo, hi):
    """P(X < lo or X > hi) for X ~ Bin(n, p), summed term by term in log space."""
    lp, lq = math.log(p), math.log1p(-p)
    total = 0.0
    for k in range(n + 1):
        if lo <= k <= hi:
            continue
        total += math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * lp + (n - k) * lq)
    return total


def test_config_rejects_nonpositive():
    with pytest.raises(ValueError):
        ModelConfig(0, 1, 1)
    with pytest.raises(ValueError):
        ModelConfig(1, 1, 1, seed=-1)


def test_smallest_world():
    w = generate_world(ModelConfig(1, 1, 1, seed=3))
    assert w.user_type.tolist() == [0]
    assert w.pref_matrix.shape == (1, 1) and abs(int(w.pref_matrix[0, 0])) == 1
    assert w.n_typed == 0


def test_generation_is_deterministic():
    a = generate_world(ModelConfig(4, 2, 2, seed=7))
    b = generate_world(ModelConfig(4, 2, 2, seed=7))
    assert a == b
    assert a.to_json() == b.to_json()
    other = generate_world(ModelConfig(400, 8, 8, seed=8))
    assert other != generate_world(ModelConfig(400, 8, 8, seed=9))


def test_user_type_balance_large_population():
    n = 100_000
    tail = binomial_two_sided_tail(n, 0.5, int(0.49 * n), int(0.51 * n))
    assert tail < 1e-8
    w = generate_world(ModelConfig(n, 2, 2, seed=11))
    frac = float(np.mean(w.user_type == 0))
    assert 0.49 <= frac <= 0.51


def test_item_types_independent_of_query_order():
    cfg = ModelConfig(3, 2, 5, seed=2)
    a, b = generate_world(cfg), generate_world(cfg)
    ids = np.array([9000, 3, 4097, 0, 12])
    ta = a.item_types(ids)
    tb = np.array([b.item_type(int(i)) for i in ids[::-1]])[::-1]
    assert np.array_equal(ta, tb)
    assert np.array_equal(a.item_types(ids), ta)


def test_rating_type_consistency():
    w = make_world([0, 0, 1], [[1, -1], [-1, -1]], [0, 1, 0, 1])
    assert w.rating(0, 0) == w.rating(1, 0) == 1
    assert w.rating(0, 0) == w.rating(0, 2)
    assert w.rating(2, 1) == -1
    with pytest.raises(IndexError):
        w.rating(3, 0)


def test_all_like_world():
    w = make_world([0, 0], [[1]], [])
    assert all(w.rating(u, i) == 1 for u in range(2) for i in range(20))


def test_fresh_items():
    env = Environment(generate_world(ModelConfig(2, 2, 2)))
    assert len(env.fresh_items(0)) == 0
    a, b = env.fresh_items(3), env.fresh_items(3)
    assert len(set(a.tolist()) | set(b.tolist())) == 6


def test_fresh_items_cover_all_types():
    # probability that one of 16 types is missing from 10^4 draws
    log_miss = math.log(16) + 10_000 * math.log(15 / 16)
    assert log_miss < -100 * math.log(10)
    w = generate_world(ModelConfig(1, 1, 16, seed=5))
    env = Environment(w)
    types = w.item_types(env.fresh_items(10_000))
    assert set(types.tolist()) == set(range(16))


def test_step_and_repeat_violation():
    env = Environment(generate_world(ModelConfig(1, 1, 1, seed=1)))
    item = env.fresh_items(1)
    r = env.step(item)
    assert env.t == 1 and r.shape == (1,)
    with pytest.raises(RepeatViolation) as exc:
        env.step(item)
    assert exc.value.user == 0 and exc.value.item == int(item[0])
    assert env.t == 1


def test_missing_user():
    env = Environment(generate_world(ModelConfig(3, 1, 1)))
    with pytest.raises(MissingUser):
        env.step(env.fresh_items(2))


def test_same_type_same_item_equal_ratings():
    w = make_world([0, 0, 0], [[1, -1]], [1])
    env = Environment(w)
    item = env.fresh_items(1)[0]
    r = env.step([item] * 3)
    assert r.tolist() == [-1, -1, -1]


def test_history_indexes():
    env = Environment(generate_world(ModelConfig(2, 2, 2, seed=4)))
    items = env.fresh_items(3)
    env.step([items[0], items[1]])
    env.step([items[1], items[2]])
    assert [h[1] for h in env.user_history(0)] == [items[0], items[1]]
    assert env.rated_by() == {int(items[0]): {0}, int(items[1]): {0, 1}, int(items[2]): {1}}
    assert env.next_fresh_item > env.items_matrix().max()


def test_snapshot_round_trip(tmp_path):
    w = generate_world(ModelConfig(5, 3, 4, seed=9))
    w.item_types(np.arange(17))
    path = tmp_path / "world.json"
    w.save(path)
    back = LatentWorld.load(path)
    assert back == w
    assert back.to_json() == w.to_json()
    assert back.n_typed == 17


def test_regret_curve_hand_count():
    w = make_world([0, 1], [[1, -1], [-1, 1]], [0, 0])
    env = Environment(w)
    a, b = env.fresh_items(2)
    env.step([a, b])  # user 1 dislikes type 0
    assert regret_curve(env.trace()).tolist() == [0.5]


def test_trace_rows_and_empty():
    env = Environment(generate_world(ModelConfig(2, 1, 1)))
    assert regret_curve(env.trace()).size == 0
    env.step(env.fresh_items(2), "exploit")
    rows = list(env.trace().rows())
    assert rows[0][0] == 1 and rows[0][4] == "exploit" and len(rows) == 2
