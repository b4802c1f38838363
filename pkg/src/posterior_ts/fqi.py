"""Fitted Q iteration for the glucose MDP.

The default regressor is an ensemble of totally randomized regression
trees: every split draws its feature and threshold at random, so the tree
structure depends on the inputs only. FQI exploits that by building the
ensemble once per training set and refitting leaf means at each
iteration; inputs ``(s, a)`` and ``(s', a')`` are routed through the trees
once. A k-nearest-neighbour regressor with the same interface is available
as an alternative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .environments import (
    GlucoseParams,
    GlucoseState,
    glucose_initial_states,
    glucose_step_batch,
)
from .errors import DomainError
from .rng import RngStream


class TransitionTuple(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


@dataclass
class TransitionBatch:
    """Column storage for ``(s, a, r, s')`` tuples."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __post_init__(self):
        n = len(self.states)
        if not (len(self.actions) == len(self.rewards) == len(self.next_states) == n):
            raise DomainError("transition columns must have equal length")

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[TransitionTuple]:
        for i in range(len(self)):
            yield TransitionTuple(
                self.states[i], int(self.actions[i]), float(self.rewards[i]), self.next_states[i]
            )

    @classmethod
    def from_tuples(cls, tuples) -> "TransitionBatch":
        tuples = list(tuples)
        return cls(
            np.array([t.state for t in tuples], dtype=float),
            np.array([t.action for t in tuples], dtype=np.int64),
            np.array([t.reward for t in tuples], dtype=float),
            np.array([t.next_state for t in tuples], dtype=float),
        )

    @classmethod
    def concatenate(cls, batches) -> "TransitionBatch":
        batches = list(batches)
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in
                     ("states", "actions", "rewards", "next_states")))


# --------------------------------------------------------------------------
# Regressors
# --------------------------------------------------------------------------


@dataclass
class _Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray  # node -> leaf index, -1 for internal nodes
    n_leaves: int
    depth: int
    train_leaves: np.ndarray  # leaf index of every training row

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(self.depth):
            f = self.feature[node]
            rows = np.flatnonzero(f >= 0)
            if rows.size == 0:
                break
            cur = node[rows]
            go_left = X[rows, f[rows]] < self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.leaf_id[node]


def build_random_tree(X: np.ndarray, gen: np.random.Generator, min_leaf: int = 5,
                      max_attempts: int = 10) -> _Tree:
    """Grow a totally randomized tree breadth-first.

    A node with at least ``2 * min_leaf`` rows draws a feature uniformly and
    a threshold uniformly between that feature's min and max in the node;
    draws leaving a child with fewer than ``min_leaf`` rows are retried up
    to ``max_attempts`` times, after which the node becomes a leaf.
    """
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    leaf_id = np.full(cap, -1, dtype=np.int64)
    train_leaves = np.empty(n, dtype=np.int64)

    order = np.arange(n)
    nodes = np.array([0])
    lens = np.array([n])
    n_nodes, n_leaves, depth = 1, 0, 0
    while nodes.size:
        depth += 1
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
        owner = np.repeat(np.arange(nodes.size), lens)
        pending = lens >= 2 * min_leaf
        chosen_f = np.full(nodes.size, -1, dtype=np.int64)
        chosen_t = np.zeros(nodes.size)
        goes_left = np.zeros(order.size, dtype=bool)
        for _ in range(max_attempts):
            if not pending.any():
                break
            f = gen.integers(0, d, size=nodes.size)
            u = gen.random(nodes.size)
            v = X[order, f[owner]]
            vmin = np.minimum.reduceat(v, starts)
            vmax = np.maximum.reduceat(v, starts)
            thr = vmin + u * (vmax - vmin)
            gl = v < thr[owner]
            n_left = np.add.reduceat(gl.astype(np.int64), starts)
            ok = pending & (vmax > vmin) & (n_left >= min_leaf) & (lens - n_left >= min_leaf)
            chosen_f[ok] = f[ok]
            chosen_t[ok] = thr[ok]
            take = ok[owner]
            goes_left[take] = gl[take]
            pending &= ~ok

        split = chosen_f >= 0
        # leaves
        leaf_nodes = nodes[~split]
        leaf_ids = n_leaves + np.arange(leaf_nodes.size)
        leaf_id[leaf_nodes] = leaf_ids
        node_to_leaf = np.full(nodes.size, -1, dtype=np.int64)
        node_to_leaf[~split] = leaf_ids
        in_leaf = ~split[owner]
        train_leaves[order[in_leaf]] = node_to_leaf[owner[in_leaf]]
        n_leaves += leaf_nodes.size

        # internal nodes and their children
        split_idx = np.flatnonzero(split)
        k = split_idx.size
        if k == 0:
            break
        parents = nodes[split_idx]
        kids = n_nodes + np.arange(2 * k)
        feature[parents] = chosen_f[split_idx]
        threshold[parents] = chosen_t[split_idx]
        left[parents] = kids[0::2]
        right[parents] = kids[1::2]
        n_nodes += 2 * k

        rank = np.full(nodes.size, -1, dtype=np.int64)
        rank[split_idx] = np.arange(k)
        keep = split[owner]
        key = 2 * rank[owner[keep]] + (~goes_left[keep])
        perm = np.argsort(key, kind="stable")
        order = order[keep][perm]
        lens = np.bincount(key, minlength=2 * k)
        nodes = kids
    m = n_nodes
    return _Tree(feature[:m], threshold[:m], left[:m], right[:m], leaf_id[:m],
                 n_leaves, depth, train_leaves)


class RandomTreeEnsemble:
    """Totally randomized regression trees (random feature, random cut point)."""

    def __init__(self, n_trees: int = 25, min_leaf: int = 5):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.trees: list[_Tree] = []

    def build(self, X: np.ndarray, rng: RngStream) -> "RandomTreeEnsemble":
        gen = rng.generator
        self.trees = [build_random_tree(X, gen, self.min_leaf) for _ in range(self.n_trees)]
        return self

    def encode(self, X: np.ndarray):
        return [t.apply(X) for t in self.trees]

    def fit_values(self, y: np.ndarray):
        out = []
        for t in self.trees:
            sums = np.bincount(t.train_leaves, weights=y, minlength=t.n_leaves)
            counts = np.bincount(t.train_leaves, minlength=t.n_leaves)
            out.append(sums / counts)
        return out

    def predict_encoded(self, codes, values) -> np.ndarray:
        return np.mean([v[c] for v, c in zip(values, codes)], axis=0)


class KNNRegressor:
    """Average of the ``k`` nearest training targets (Euclidean, raw features)."""

    def __init__(self, k: int = 10):
        self.k = k
        self._tree = None

    def build(self, X: np.ndarray, rng: RngStream | None = None) -> "KNNRegressor":
        self._tree = cKDTree(X)
        self._k = min(self.k, len(X))
        return self

    def encode(self, X: np.ndarray):
        _, idx = self._tree.query(X, k=self._k)
        return idx.reshape(len(X), -1)

    def fit_values(self, y: np.ndarray):
        return np.asarray(y, dtype=float)

    def predict_encoded(self, codes, values) -> np.ndarray:
        return values[codes].mean(axis=1)


@dataclass(frozen=True)
class RegressorConfig:
    kind: str = "trees"
    n_trees: int = 25
    min_leaf: int = 5
    k: int = 10

    def make(self):
        if self.kind == "trees":
            return RandomTreeEnsemble(self.n_trees, self.min_leaf)
        if self.kind == "knn":
            return KNNRegressor(self.k)
        raise DomainError(f"unknown regressor kind {self.kind!r}")


# --------------------------------------------------------------------------
# Fitted Q iteration
# --------------------------------------------------------------------------


def _inputs(states: np.ndarray, actions) -> np.ndarray:
    states = np.atleast_2d(states)
    a = np.broadcast_to(np.asarray(actions, dtype=float), (states.shape[0],))
    return np.column_stack([states, a])


@dataclass
class FittedQ:
    regressor: object
    values: list = field(repr=False)  # per-iteration regressor values, last one is Q_N
    n_actions: int = 2

    @property
    def n_iterations(self) -> int:
        return len(self.values)

    def q_values(self, states: np.ndarray, iteration: int | None = None) -> np.ndarray:
        vals = self.values[-1 if iteration is None else iteration - 1]
        states = np.atleast_2d(states)
        return np.column_stack([
            self.regressor.predict_encoded(self.regressor.encode(_inputs(states, a)), vals)
            for a in range(self.n_actions)
        ])

    def greedy(self, states: np.ndarray) -> np.ndarray:
        # first maximiser, so ties go to action 0
        return np.argmax(self.q_values(states), axis=1)


def fitted_q_iteration(
    data,
    n_iters: int,
    gamma: float,
    regressor_config: RegressorConfig = RegressorConfig(),
    rng: RngStream | None = None,
    n_actions: int = 2,
    clip: float = 1000.0,
) -> FittedQ:
    """Q_k = regress(r + gamma * max_a Q_{k-1}(s', a)) with Q_0 = 0.

    Targets are clipped to ``[-clip, clip]``.
    """
    if not isinstance(data, TransitionBatch):
        data = TransitionBatch.from_tuples(data)
    if len(data) == 0:
        raise DomainError("fitted Q iteration needs at least one transition")
    if n_iters < 1:
        raise DomainError("n_iters must be >= 1")
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    rng = rng if rng is not None else RngStream(0)

    reg = regressor_config.make().build(_inputs(data.states, data.actions), rng)
    next_codes = [reg.encode(_inputs(data.next_states, a)) for a in range(n_actions)]
    rewards = np.asarray(data.rewards, dtype=float)

    history = []
    targets = np.clip(rewards, -clip, clip)
    for k in range(n_iters):
        if k > 0 and gamma > 0:
            prev = history[-1]
            q_next = np.max(
                [reg.predict_encoded(c, prev) for c in next_codes], axis=0
            )
            targets = np.clip(rewards + gamma * q_next, -clip, clip)
        history.append(reg.fit_values(targets))
    return FittedQ(reg, history, n_actions)


def fitted_q_act(q: FittedQ, s) -> int:
    feats = s.features() if isinstance(s, GlucoseState) else np.asarray(s, dtype=float)
    return int(q.greedy(feats[None, :])[0])


def simulate_dataset(
    dynamics: GlucoseParams,
    n_tuples: int,
    rng: RngStream,
    episode_length: int = 30,
    p_insulin: float = 0.5,
) -> TransitionBatch:
    """Random-action rollouts restarted every ``episode_length`` steps.

    Episodes run side by side; tuples are ordered episode by episode and
    truncated to exactly ``n_tuples``.
    """
    if n_tuples < 1:
        raise DomainError("n_tuples must be >= 1")
    if episode_length < 1:
        raise DomainError("episode_length must be >= 1")
    n_ep = -(-n_tuples // episode_length)
    x = glucose_initial_states(dynamics, n_ep, rng)
    S = np.empty((n_ep, episode_length, x.shape[1]))
    A = np.empty((n_ep, episode_length), dtype=np.int64)
    R = np.empty((n_ep, episode_length))
    S2 = np.empty_like(S)
    for t in range(episode_length):
        a = (rng.random(n_ep) < p_insulin).astype(np.int64)
        nxt, r = glucose_step_batch(dynamics, x, a, rng)
        S[:, t], A[:, t], R[:, t], S2[:, t] = x, a, r, nxt
        x = nxt
    d = x.shape[1]
    return TransitionBatch(
        S.reshape(-1, d)[:n_tuples],
        A.reshape(-1)[:n_tuples],
        R.reshape(-1)[:n_tuples],
        S2.reshape(-1, d)[:n_tuples],
    )
