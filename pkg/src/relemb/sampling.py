"""Constant-time categorical sampling via the alias method.

Training draws up to thousands of noise terms per query, so O(1) per draw
matters; building the table is O(K).
"""

from __future__ import annotations

import numpy as np


class AliasSampler:
    """Walker alias table over a fixed categorical distribution."""

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("need a non-empty 1-d probability vector")
        if np.any(probs < 0) or not np.isfinite(probs).all():
            raise ValueError("probabilities must be finite and non-negative")
        total = probs.sum()
        if total <= 0:
            raise ValueError("probability mass is zero")
        k = probs.size
        scaled = probs * (k / total)
        self.accept = np.ones(k, dtype=np.float64)
        self.alias = np.arange(k, dtype=np.int64)

        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            self.accept[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = (scaled[l] - 1.0) + scaled[s]
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        # Leftovers are 1 up to rounding; keep them as certain acceptance.
        for i in small + large:
            self.accept[i] = 1.0
            self.alias[i] = i

    def __len__(self) -> int:
        return len(self.accept)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` category indices."""
        k = len(self.accept)
        idx = rng.integers(0, k, size=size)
        keep = rng.random(size) < self.accept[idx]
        return np.where(keep, idx, self.alias[idx])
