"""Huffman coding over the vocabulary for the hierarchical softmax.

Every term is a leaf; the N-1 internal nodes each carry a trainable
vector. A term's probability is the product of sigmoid branch decisions
along its root-to-leaf path, so frequent terms (short codes) are cheap.

Ties between equal-weight nodes break on node id (leaves 0..N-1, internal
nodes numbered from N in creation order), with the smaller node becoming
the left child. This makes tree construction fully deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


@dataclass
class HuffmanTree:
    """Per-term paths through the internal nodes of the coding tree.

    ``paths[t]`` lists internal node ids from the root down; ``signs[t]``
    holds +1 for a left branch and -1 for a right branch at each step.
    """

    num_terms: int
    paths: list[np.ndarray]
    signs: list[np.ndarray]

    @property
    def num_internal(self) -> int:
        return max(self.num_terms - 1, 0)

    def path_length(self, term_id: int) -> int:
        return len(self.paths[term_id])

    def max_depth(self) -> int:
        return max((len(p) for p in self.paths), default=0)

    def validate(self) -> None:
        if self.num_terms != len(self.paths) or self.num_terms != len(self.signs):
            raise ValueError("per-term path arrays disagree with term count")
        if self.num_terms <= 1:
            if self.num_terms == 1 and len(self.paths[0]) != 0:
                raise ValueError("single-term tree must have an empty path")
            return
        seen = set()
        for tid in range(self.num_terms):
            if len(self.paths[tid]) != len(self.signs[tid]):
                raise ValueError(f"term {tid}: path and sign lengths differ")
            if len(self.paths[tid]) == 0:
                raise ValueError(f"term {tid}: empty path in a multi-term tree")
            seen.update(self.paths[tid].tolist())
        if len(seen) != self.num_internal:
            raise ValueError("internal node ids are not exactly 0..N-2")
        kraft = sum(2.0 ** -len(p) for p in self.paths)
        if abs(kraft - 1.0) > 1e-12:
            raise ValueError(f"Kraft sum is {kraft!r}, tree is not full")

    def codes(self) -> list[str]:
        """Binary code strings ('0' = left, '1' = right) per term."""
        return ["".join("0" if s > 0 else "1" for s in signs) for signs in self.signs]

    def flattened(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated per-term paths for vectorized whole-vocabulary scoring.

        Returns (node ids, branch signs, offsets) where term t's path slice
        is ``offsets[t]:offsets[t+1]``. Cached after the first call.
        """
        cached = getattr(self, "_flat", None)
        if cached is None:
            offsets = np.zeros(self.num_terms + 1, dtype=np.int64)
            for tid, path in enumerate(self.paths):
                offsets[tid + 1] = offsets[tid] + len(path)
            nodes = (
                np.concatenate(self.paths) if self.num_terms else np.zeros(0, dtype=np.int64)
            )
            signs = (
                np.concatenate(self.signs).astype(np.float64)
                if self.num_terms
                else np.zeros(0, dtype=np.float64)
            )
            cached = (nodes, signs, offsets)
            self._flat = cached
        return cached


def build_huffman_tree(weights: np.ndarray) -> HuffmanTree:
    """Build the coding tree for positive per-term weights."""
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.size
    if n == 0:
        raise ValueError("cannot build a tree over an empty vocabulary")
    if np.any(weights <= 0) or not np.isfinite(weights).all():
        raise ValueError("all weights must be positive and finite")
    if n == 1:
        return HuffmanTree(1, [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)])

    # Heap entries are (weight, node id); children[internal] = (left, right).
    heap: list[tuple[float, int]] = [(float(weights[i]), i) for i in range(n)]
    heapq.heapify(heap)
    children: list[tuple[int, int]] = []
    next_id = n
    while len(heap) > 1:
        w_left, left = heapq.heappop(heap)
        w_right, right = heapq.heappop(heap)
        children.append((left, right))
        heapq.heappush(heap, (w_left + w_right, next_id))
        next_id += 1

    root = heap[0][1]
    paths: list[np.ndarray] = [np.zeros(0, dtype=np.int64)] * n
    signs: list[np.ndarray] = [np.zeros(0, dtype=np.int64)] * n
    stack: list[tuple[int, list[int], list[int]]] = [(root, [], [])]
    while stack:
        node, path, sign = stack.pop()
        if node < n:
            paths[node] = np.array(path, dtype=np.int64)
            signs[node] = np.array(sign, dtype=np.int64)
            continue
        internal = node - n
        left, right = children[internal]
        stack.append((left, path + [internal], sign + [1]))
        stack.append((right, path + [internal], sign + [-1]))
    return HuffmanTree(n, paths, signs)
