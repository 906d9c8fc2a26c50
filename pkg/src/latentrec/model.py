"""Latent-type preference world and the step-wise recommendation environment.

Users and items carry hidden types.  A user likes an item exactly when the
preference matrix entry for their type pair is +1.  Items are consecutive
integer ids whose types are drawn lazily, so the item supply is unbounded.

Ids are 0-based throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import ITEM_STREAM, WORLD_STREAM, substream

ITEM_BLOCK = 4096

PHASES = ("usr-clust", "find-prefs", "item-clust", "exploit", "filler")
PHASE_CODE = {name: code for code, name in enumerate(PHASES)}


class RepeatViolation(RuntimeError):
    """An item was recommended twice to the same user."""

    def __init__(self, user: int, item: int):
        super().__init__(f"item {item} already recommended to user {user}")
        self.user = user
        self.item = item


class MissingUser(ValueError):
    """A step did not assign exactly one item to every user."""


class HorizonReached(Exception):
    """Raised by ``Environment.step`` once the configured horizon is used up."""


@dataclass(frozen=True)
class ModelConfig:
    n_users: int
    n_user_types: int
    n_item_types: int
    seed: int = 0

    def __post_init__(self):
        for name in ("n_users", "n_user_types", "n_item_types"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def with_seed(self, seed: int) -> "ModelConfig":
        return ModelConfig(self.n_users, self.n_user_types, self.n_item_types, seed)


class LatentWorld:
    """Hidden ground truth: user types, lazily typed items, preference matrix.

    Item types are generated in fixed-size blocks keyed by block index, so the
    type of item ``i`` depends only on ``(seed, i)`` and never on the order in
    which items are first queried.
    """

    def __init__(self, config: ModelConfig, user_type: np.ndarray, pref_matrix: np.ndarray,
                 item_prefix: np.ndarray | None = None):
        self.config = config
        self.user_type = np.asarray(user_type, dtype=np.int64)
        self.pref_matrix = np.asarray(pref_matrix, dtype=np.int8)
        if self.user_type.shape != (config.n_users,):
            raise ValueError("user_type length must equal n_users")
        if self.pref_matrix.shape != (config.n_user_types, config.n_item_types):
            raise ValueError("pref_matrix must be n_user_types x n_item_types")
        if not np.all(np.abs(self.pref_matrix) == 1):
            raise ValueError("pref_matrix entries must be +1 or -1")
        self._prefix = np.zeros(0, np.int64) if item_prefix is None else np.asarray(item_prefix, np.int64)
        self._blocks: dict[int, np.ndarray] = {}
        self._n_typed = len(self._prefix)

    @property
    def n_users(self) -> int:
        return self.config.n_users

    @property
    def n_typed(self) -> int:
        """One past the largest item id whose type has been sampled."""
        return self._n_typed

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            rng = substream(self.config.seed, ITEM_STREAM, b)
            blk = rng.integers(0, self.config.n_item_types, size=ITEM_BLOCK, dtype=np.int64)
            self._blocks[b] = blk
        return blk

    def item_types(self, items: Sequence[int] | np.ndarray) -> np.ndarray:
        ids = np.asarray(items, dtype=np.int64)
        if ids.size == 0:
            return np.zeros(ids.shape, np.int64)
        if ids.min() < 0:
            raise IndexError("item ids are nonnegative")
        out = np.empty(ids.shape, np.int64)
        flat_ids = ids.ravel()
        flat = out.ravel()
        blocks = flat_ids // ITEM_BLOCK
        for b in np.unique(blocks):
            sel = blocks == b
            flat[sel] = self._block(int(b))[flat_ids[sel] % ITEM_BLOCK]
        if len(self._prefix):
            known = flat_ids < len(self._prefix)
            flat[known] = self._prefix[flat_ids[known]]
        self._n_typed = max(self._n_typed, int(flat_ids.max()) + 1)
        return out

    def item_type(self, item: int) -> int:
        return int(self.item_types([item])[0])

    def _check_users(self, users: np.ndarray) -> None:
        if users.size and (users.min() < 0 or users.max() >= self.n_users):
            raise IndexError("unknown user id")

    def ratings(self, users: Sequence[int] | np.ndarray, items: Sequence[int] | np.ndarray) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        self._check_users(users)
        return self.pref_matrix[self.user_type[users], self.item_types(items)]

    def rating(self, user: int, item: int) -> int:
        return int(self.ratings([user], [item])[0])

    def permuted(self, user_perm: np.ndarray | None = None, item_perm: np.ndarray | None = None) -> "LatentWorld":
        """Copy with rows/columns of the preference matrix reordered."""
        pm = self.pref_matrix
        if user_perm is not None:
            pm = pm[np.asarray(user_perm)]
        if item_perm is not None:
            pm = pm[:, np.asarray(item_perm)]
        w = LatentWorld(self.config, self.user_type.copy(), pm.copy(), self._prefix.copy())
        return w

    # snapshot -------------------------------------------------------------
    def to_dict(self) -> dict:
        c = self.config
        return {
            "config": {"n_users": c.n_users, "n_user_types": c.n_user_types,
                       "n_item_types": c.n_item_types, "seed": c.seed},
            "user_type": self.user_type.tolist(),
            "item_type": self.item_types(np.arange(self._n_typed)).tolist(),
            "pref_matrix": self.pref_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LatentWorld":
        config = ModelConfig(**doc["config"])
        return cls(config, np.array(doc["user_type"], np.int64), np.array(doc["pref_matrix"], np.int8),
                   np.array(doc["item_type"], np.int64))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "LatentWorld":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "LatentWorld":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatentWorld):
            return NotImplemented
        n = max(self._n_typed, other._n_typed)
        return (self.config == other.config
                and np.array_equal(self.user_type, other.user_type)
                and np.array_equal(self.pref_matrix, other.pref_matrix)
                and np.array_equal(self.item_types(np.arange(n)), other.item_types(np.arange(n))))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        c = self.config
        return f"LatentWorld(N={c.n_users}, q_U={c.n_user_types}, q_I={c.n_item_types}, seed={c.seed})"


def generate_world(config: ModelConfig) -> LatentWorld:
    user_type = substream(config.seed, WORLD_STREAM, 0).integers(
        0, config.n_user_types, size=config.n_users, dtype=np.int64)
    pref = substream(config.seed, WORLD_STREAM, 1).integers(
        0, 2, size=(config.n_user_types, config.n_item_types), dtype=np.int8)
    return LatentWorld(config, user_type, (2 * pref - 1).astype(np.int8))


@dataclass
class Trace:
    """Recorded interaction: one row per time step, one column per user."""

    items: np.ndarray
    ratings: np.ndarray
    phases: np.ndarray
    world: LatentWorld | None = None
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.items.shape[0]

    @property
    def n_users(self) -> int:
        return self.items.shape[1]

    def regret_curve(self) -> np.ndarray:
        return regret_curve(self)

    def rows(self) -> Iterable[tuple[int, int, int, int, str]]:
        """Yield ``(t, u, item, rating, phase)`` with ``t`` starting at 1."""
        for t in range(self.horizon):
            for u in range(self.n_users):
                yield (t + 1, u, int(self.items[t, u]), int(self.ratings[t, u]), PHASES[self.phases[t, u]])


def regret_curve(trace: Trace) -> np.ndarray:
    """Cumulative per-user count of dislikes after each step."""
    if trace.horizon == 0:
        return np.zeros(0)
    return np.cumsum((trace.ratings == -1).sum(axis=1)) / trace.n_users


class Environment:
    """Mutable simulation state enforcing one item per user per step and no repeats."""

    def __init__(self, world: LatentWorld):
        self.world = world
        self.t = 0
        self.next_fresh_item = 0
        self.horizon: int | None = None
        self._items: list[np.ndarray] = []
        self._ratings: list[np.ndarray] = []
        self._phases: list[np.ndarray] = []
        self._seen: set[int] = set()
        self._users = np.arange(world.n_users, dtype=np.int64)

    @property
    def n_users(self) -> int:
        return self.world.n_users

    def fresh_items(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("k must be nonnegative")
        out = np.arange(self.next_fresh_item, self.next_fresh_item + k, dtype=np.int64)
        self.next_fresh_item += k
        return out

    def _key(self, user, item):
        return item * self.n_users + user

    def has_rated(self, user: int, item: int) -> bool:
        return self._key(int(user), int(item)) in self._seen

    def step(self, recs: Sequence[int] | np.ndarray, phases: int | str | np.ndarray = "filler") -> np.ndarray:
        if self.horizon is not None and self.t >= self.horizon:
            raise HorizonReached(self.t)
        recs = np.asarray(recs, dtype=np.int64)
        if recs.shape != (self.n_users,):
            raise MissingUser(f"expected {self.n_users} recommendations, got shape {recs.shape}")
        if recs.min() < 0 or recs.max() >= self.next_fresh_item:
            raise ValueError("recommended item was never issued by fresh_items")
        keys = (recs * self.n_users + self._users).tolist()
        if not self._seen.isdisjoint(keys):
            for u, k in enumerate(keys):
                if k in self._seen:
                    raise RepeatViolation(u, int(recs[u]))
        if len(set(keys)) != len(keys):  # pragma: no cover - keys differ by user
            raise AssertionError("duplicate key within a step")
        self._seen.update(keys)
        ratings = self.world.ratings(self._users, recs).astype(np.int8)
        if isinstance(phases, str):
            codes = np.full(self.n_users, PHASE_CODE[phases], np.uint8)
        else:
            codes = np.broadcast_to(np.asarray(phases, np.uint8), (self.n_users,)).copy()
        self._items.append(recs.copy())
        self._ratings.append(ratings)
        self._phases.append(codes)
        self.t += 1
        return ratings

    def items_matrix(self) -> np.ndarray:
        """Items recommended so far, shape ``(t, N)``."""
        if not self._items:
            return np.zeros((0, self.n_users), np.int64)
        return np.stack(self._items)

    def user_history(self, user: int) -> list[tuple[int, int, int]]:
        """``(t, item, rating)`` triples for one user, ``t`` starting at 1."""
        return [(t + 1, int(self._items[t][user]), int(self._ratings[t][user])) for t in range(self.t)]

    def rated_by(self) -> dict[int, set[int]]:
        """Inverse index item -> users who rated it."""
        out: dict[int, set[int]] = {}
        for row in self._items:
            for u, i in enumerate(row.tolist()):
                out.setdefault(i, set()).add(u)
        return out

    def trace(self, meta: dict | None = None) -> Trace:
        n = self.n_users
        if self.t:
            items = np.stack(self._items)
            ratings = np.stack(self._ratings)
            phases = np.stack(self._phases)
        else:
            items = np.zeros((0, n), np.int64)
            ratings = np.zeros((0, n), np.int8)
            phases = np.zeros((0, n), np.uint8)
        return Trace(items, ratings, phases, self.world, dict(meta or {}))
