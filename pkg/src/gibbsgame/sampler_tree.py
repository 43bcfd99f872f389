"""Array-backed binary sum tree over a nonnegative vector that only grows by eta."""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation


class SamplerTree:
    """Complete binary tree padded to a power of two.

    Heap layout: node 1 is the root, node k has children 2k and 2k+1, and
    leaf i (0-based) lives at node ``size + i``.  Padding leaves stay zero.
    """

    def __init__(self, m: int, eta_fixed: float):
        if m < 1:
            raise ContractViolation("m must be >= 1")
        if not eta_fixed > 0:
            raise ContractViolation("eta must be > 0")
        self.m = int(m)
        self.eta_fixed = float(eta_fixed)
        self.depth = int(np.ceil(np.log2(m))) if m > 1 else 0
        self.size = 1 << self.depth
        self.nodes = np.zeros(2 * self.size, dtype=np.float64)
        self.update_count = 0
        self.last_touched = 0

    @property
    def root(self) -> int:
        return 1

    def leaf(self, i: int) -> int:
        """Node handle of leaf i."""
        if not 0 <= i < self.m:
            raise ContractViolation(f"leaf index {i} out of range [0, {self.m})")
        return self.size + i

    def update(self, i: int) -> None:
        """x_i += eta, propagating to every ancestor."""
        k = self.leaf(i)
        eta = self.eta_fixed
        touched = 0
        while k >= 1:
            self.nodes[k] += eta
            k >>= 1
            touched += 1
        self.last_touched = touched
        self.update_count += 1

    def subtree_sum(self, node: int) -> float:
        if not 1 <= node < 2 * self.size:
            raise ContractViolation(f"invalid node handle {node}")
        return float(self.nodes[node])

    def ell1_norm(self) -> float:
        return float(self.nodes[1])

    def values(self) -> np.ndarray:
        """Copy of the leaf vector x."""
        return self.nodes[self.size:self.size + self.m].copy()

    def sample_leaf(self, rng: np.random.Generator) -> int:
        """Top-down walk choosing each child with probability proportional to its sum."""
        if self.nodes[1] <= 0:
            raise ContractViolation("cannot sample from an all-zero tree")
        k = 1
        while k < self.size:
            left = self.nodes[2 * k]
            total = left + self.nodes[2 * k + 1]
            k = 2 * k if rng.random() * total < left else 2 * k + 1
        return k - self.size

    def check_consistency(self, rtol: float = 1e-12) -> bool:
        """Full traversal: every internal node equals the sum of its children."""
        nodes = self.nodes
        for k in range(self.size - 1, 0, -1):
            s = nodes[2 * k] + nodes[2 * k + 1]
            if abs(nodes[k] - s) > rtol * max(1.0, abs(s)):
                return False
        return bool(np.all(nodes[self.size + self.m:] == 0) and np.all(nodes >= 0))
