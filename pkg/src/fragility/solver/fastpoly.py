"""Vectorized evaluation of the sparse polynomial IR."""

from __future__ import annotations

import numpy as np

from ..events import PolynomialExpr

__all__ = ["FastPoly"]


class FastPoly:
    """Degree-bucketed numpy form of a PolynomialExpr, built once."""

    def __init__(self, poly: PolynomialExpr):
        self.const = float(poly.terms.get((), 0))
        buckets: dict[int, tuple[list, list]] = {}
        for mono, coef in sorted(poly.terms.items()):
            if not mono:
                continue
            idx, cs = buckets.setdefault(len(mono), ([], []))
            idx.append(mono)
            cs.append(float(coef))
        self.buckets = [
            (np.array(idx, dtype=np.intp), np.array(cs)) for _, (idx, cs) in sorted(buckets.items())
        ]

    def __call__(self, x: np.ndarray) -> float:
        total = self.const
        for idx, cs in self.buckets:
            total += float(np.dot(np.prod(x[idx], axis=1), cs))
        return total

    def many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on a (k, n_vars) batch."""
        total = np.full(X.shape[0], self.const)
        for idx, cs in self.buckets:
            total += np.prod(X[:, idx], axis=2) @ cs
        return total
