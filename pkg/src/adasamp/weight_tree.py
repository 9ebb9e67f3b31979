"""Sum-labeled binary tree for O(log n) categorical sampling under changing weights."""

from __future__ import annotations

import math

import numpy as np


class WeightTree:
    """Full binary tree over n nonnegative weights, stored as one flat array.

    Leaves are padded out to the next power of two (padding leaves hold 0 and are
    never written again), every internal node holds the sum of its two children,
    and indexing is implicit: node j has children 2j+1 and 2j+2, leaf i lives at
    capacity-1+i. Sampling walks root to leaf flipping one biased coin per level,
    so a draw costs exactly `depth` uniforms; re-weighting one leaf adds the delta
    along a single root-to-leaf path.

    Incremental updates accumulate float drift in the internal labels, bounded in
    practice far below 1e-9 of the root; `rebuild` recomputes the labels bottom-up
    and runs automatically every `rebuild_every` updates.

    Counters `sample_visits`, `update_writes`, and `update_calls` instrument the
    touched-node accounting for the complexity tests.
    """

    def __init__(self, weights, rebuild_every: int = 1 << 20):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValueError("at least one weight must be positive")
        if rebuild_every < 1:
            raise ValueError("rebuild_every must be >= 1")
        self.n = w.size
        self.depth = max(0, math.ceil(math.log2(self.n)))
        self.capacity = 1 << self.depth
        self.rebuild_every = rebuild_every
        self._nodes = np.zeros(2 * self.capacity - 1)
        self._nodes[self.capacity - 1 : self.capacity - 1 + self.n] = w
        self.rebuild()
        self.sample_visits = 0
        self.update_writes = 0
        self.update_calls = 0
        self._updates_since_rebuild = 0

    # ---- reading ----

    @property
    def total(self) -> float:
        """Root label: the (drift-tolerant) sum of all weights."""
        return float(self._nodes[0])

    def weight(self, i: int) -> float:
        self._check_index(i)
        return float(self._nodes[self.capacity - 1 + i])

    def prob(self, i: int) -> float:
        """Current sampling probability of index i, weight / root."""
        self._check_index(i)
        root = self._nodes[0]
        if root <= 0:
            raise ValueError("total weight is zero")
        return float(self._nodes[self.capacity - 1 + i] / root)

    def probs(self, indices) -> np.ndarray:
        """Vectorized `prob` for an integer array of indices."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise ValueError("index out of range")
        root = self._nodes[0]
        if root <= 0:
            raise ValueError("total weight is zero")
        return self._nodes[self.capacity - 1 + idx] / root

    def distribution(self) -> np.ndarray:
        """All n sampling probabilities, normalized to sum to 1 (O(n) diagnostic)."""
        leaves = self._nodes[self.capacity - 1 : self.capacity - 1 + self.n]
        s = leaves.sum()
        if s <= 0:
            raise ValueError("total weight is zero")
        return leaves / s

    # ---- sampling ----

    def descend(self, uniforms) -> int:
        """Walk root to leaf using one provided uniform per level; returns the leaf index.

        At each internal node, go left iff u * (left + right) < left, i.e. with
        probability left / (left + right). A zero-weight subtree can never win the
        comparison, so zero-weight leaves are never returned.
        """
        u = np.asarray(uniforms, dtype=np.float64)
        if u.shape != (self.depth,):
            raise ValueError(f"expected exactly {self.depth} uniforms")
        if self._nodes[0] <= 0:
            raise ValueError("total weight is zero")
        nodes = self._nodes
        j = 0
        for lvl in range(self.depth):
            left = 2 * j + 1
            lv = nodes[left]
            j = left if u[lvl] * (lv + nodes[left + 1]) < lv else left + 1
        self.sample_visits += self.depth
        return j - (self.capacity - 1)

    def sample(self, rng: np.random.Generator) -> int:
        """Draw one index with probability proportional to its weight (depth uniforms)."""
        return self.descend(rng.random(self.depth))

    def sample_many(self, k: int, rng: np.random.Generator) -> np.ndarray:
        """Draw k indices i.i.d., vectorized level by level.

        Consumes the same k*depth uniforms as k `sample` calls but in level-major
        order, so the index stream differs from sequential draws on the same rng;
        meant for bulk statistical checks, not for the training loop.
        """
        if self._nodes[0] <= 0:
            raise ValueError("total weight is zero")
        nodes = self._nodes
        j = np.zeros(k, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * j + 1
            lv = nodes[left]
            go_left = rng.random(k) * (lv + nodes[left + 1]) < lv
            j = np.where(go_left, left, left + 1)
        self.sample_visits += k * self.depth
        return j - (self.capacity - 1)

    # ---- writing ----

    def update(self, i: int, weight: float) -> None:
        """Set leaf i to `weight`, propagating the delta through depth+1 labels."""
        self._check_index(i)
        if not math.isfinite(weight) or weight < 0:
            raise ValueError("weight must be finite and nonnegative")
        j = self.capacity - 1 + i
        delta = weight - self._nodes[j]
        self._nodes[j] = weight
        writes = 1
        while j > 0:
            j = (j - 1) // 2
            v = self._nodes[j] + delta
            self._nodes[j] = v if v > 0 else 0.0
            writes += 1
        self.update_writes += writes
        self.update_calls += 1
        self._updates_since_rebuild += 1
        if self._updates_since_rebuild >= self.rebuild_every:
            self.rebuild()

    def rebuild(self) -> None:
        """Recompute every internal label bottom-up, clearing accumulated drift."""
        nodes = self._nodes
        lo, width = self.capacity - 1, self.capacity
        while width > 1:
            level = nodes[lo : lo + width]
            width //= 2
            lo -= width
            nodes[lo : lo + width] = level[0::2] + level[1::2]
        self._updates_since_rebuild = 0

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"index {i} out of range for n={self.n}")
