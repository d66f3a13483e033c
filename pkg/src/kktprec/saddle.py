"""The 3m x 3m KKT operator in (f; u; lambda) ordering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import DiscreteProblem
from .sparse import DimensionError, SparseMatrix, spmv

MAX_MATERIALIZE_LEVEL = 5


def block_matrix(blocks, m: int) -> SparseMatrix:
    """Assemble a 3x3 grid of (m x m) sparse blocks; ``None`` marks a zero block."""
    rows, cols, vals = [], [], []
    for bi, brow in enumerate(blocks):
        for bj, blk in enumerate(brow):
            if blk is None:
                continue
            rows.append(blk.row_ids + bi * m)
            cols.append(blk.col_indices + bj * m)
            vals.append(blk.values)
    n = len(blocks) * m
    return SparseMatrix.from_coo(np.concatenate(rows), np.concatenate(cols),
                                 np.concatenate(vals), (n, n))


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    """``[[2βM, 0, -M], [0, M, K^T], [-M, K, 0]] x = (0; b; d)``."""

    problem: DiscreteProblem

    @property
    def m(self) -> int:
        return self.problem.m

    @property
    def n(self) -> int:
        return 3 * self.problem.m

    @property
    def rhs(self) -> np.ndarray:
        p = self.problem
        return np.concatenate([np.zeros(p.m), p.b, p.d])

    def split(self, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise DimensionError(f"expected a vector of length {self.n}, got shape {v.shape}")
        m = self.m
        return v[:m], v[m:2 * m], v[2 * m:]

    def apply(self, v) -> np.ndarray:
        return apply_A(self, v)

    __call__ = apply


def apply_A(sys: SaddleSystem, v) -> np.ndarray:
    v1, v2, v3 = sys.split(v)
    p = sys.problem
    Mv1 = spmv(p.M, v1)
    Mv3 = spmv(p.M, v3)
    return np.concatenate([
        2.0 * p.beta * Mv1 - Mv3,
        spmv(p.M, v2) + spmv(p.K, v3, transposed=True),
        -Mv1 + spmv(p.K, v2),
    ])


def materialize_A(sys: SaddleSystem) -> SparseMatrix:
    """Explicit sparse copy of the operator (small levels only)."""
    p = sys.problem
    if p.level > MAX_MATERIALIZE_LEVEL:
        raise ValueError(f"refusing to materialize at level {p.level} > {MAX_MATERIALIZE_LEVEL}")
    M, K = p.M, p.K
    return block_matrix([[M.scaled(2.0 * p.beta), None, M.scaled(-1.0)],
                         [None, M, K.T],
                         [M.scaled(-1.0), K, None]], p.m)


def true_residual(sys: SaddleSystem, x) -> float:
    """``||g - A x||_2``."""
    return float(np.linalg.norm(sys.rhs - apply_A(sys, x)))
