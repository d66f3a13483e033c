"""Q1 finite elements for the Poisson control problem on the unit square.

Uniform ``2**level x 2**level`` grid, bilinear elements, pure Dirichlet data
taken from the target state. Interior nodes are numbered lexicographically
with x running fastest.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .sparse import SparseMatrix

# local node order on an element: (0,0), (1,0), (1,1), (0,1)
_LOCAL = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])

_KE = np.array([[4.0, -1.0, -2.0, -1.0],
                [-1.0, 4.0, -1.0, -2.0],
                [-2.0, -1.0, 4.0, -1.0],
                [-1.0, -2.0, -1.0, 4.0]]) / 6.0
_ME = np.array([[4.0, 2.0, 1.0, 2.0],
                [2.0, 4.0, 2.0, 1.0],
                [1.0, 2.0, 4.0, 2.0],
                [2.0, 1.0, 2.0, 4.0]]) / 36.0


def target_state(x, y):
    """``(2x-1)^2 (2y-1)^2`` on ``[0, 1/2]^2``, zero elsewhere. Vectorized."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = (x >= 0.0) & (x <= 0.5) & (y >= 0.0) & (y <= 0.5)
    val = np.where(inside, (2 * x - 1) ** 2 * (2 * y - 1) ** 2, 0.0)
    return val if val.ndim else float(val)


def element_matrices(h: float) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness and mass matrices of one ``h x h`` square element."""
    if not h > 0:
        raise ValueError("element size must be positive")
    return _KE.copy(), _ME * h * h


@dataclass(frozen=True)
class Grid:
    level: int

    def __post_init__(self):
        if self.level < 2:
            raise ValueError("grid level must be >= 2")

    @property
    def n_cells(self) -> int:
        return 2 ** self.level

    @property
    def h(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def interior_count(self) -> int:
        return (self.n_cells - 1) ** 2

    @property
    def node_count(self) -> int:
        return (self.n_cells + 1) ** 2

    def node_coords(self) -> np.ndarray:
        """Coordinates of all ``(N+1)^2`` nodes, lexicographic, x fastest."""
        t = np.arange(self.n_cells + 1) * self.h
        xx, yy = np.meshgrid(t, t)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def interior_mask(self) -> np.ndarray:
        n = self.n_cells
        ij = np.arange(n + 1)
        inner = (ij > 0) & (ij < n)
        return np.outer(inner, inner).ravel()

    def interior_coords(self) -> np.ndarray:
        return self.node_coords()[self.interior_mask()]

    def elements(self) -> np.ndarray:
        """``(N^2, 4)`` global node numbers of every element."""
        n = self.n_cells
        ex, ey = np.meshgrid(np.arange(n), np.arange(n))
        ex, ey = ex.ravel(), ey.ravel()
        return np.stack([(ey + dy) * (n + 1) + ex + dx for dx, dy in _LOCAL], axis=1)


def assemble_full(grid: Grid) -> tuple[SparseMatrix, SparseMatrix]:
    """Mass and stiffness over every node, before boundary elimination."""
    Ke, Me = element_matrices(grid.h)
    conn = grid.elements()
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    shape = (grid.node_count, grid.node_count)
    ne = conn.shape[0]
    M = SparseMatrix.from_coo(rows, cols, np.tile(Me.ravel(), ne), shape)
    K = SparseMatrix.from_coo(rows, cols, np.tile(Ke.ravel(), ne), shape)
    return M, K


def _restrict(A: SparseMatrix, row_keep: np.ndarray, col_keep: np.ndarray) -> SparseMatrix:
    rmap = np.full(A.nrows, -1)
    rmap[row_keep] = np.arange(row_keep.size)
    cmap = np.full(A.ncols, -1)
    cmap[col_keep] = np.arange(col_keep.size)
    r, c = rmap[A.row_ids], cmap[A.col_indices]
    ok = (r >= 0) & (c >= 0)
    return SparseMatrix.from_coo(r[ok], c[ok], A.values[ok], (row_keep.size, col_keep.size))


def assemble(level: int) -> tuple[SparseMatrix, SparseMatrix]:
    """Interior mass matrix M and stiffness matrix K (Dirichlet rows/cols removed)."""
    if not 2 <= level <= 8:
        raise ValueError("level must lie in [2, 8]")
    grid = Grid(level)
    Mf, Kf = assemble_full(grid)
    inner = np.flatnonzero(grid.interior_mask())
    return _restrict(Mf, inner, inner), _restrict(Kf, inner, inner)


def _gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    pts, wts = np.polynomial.legendre.leggauss(order)
    return 0.5 * (pts + 1.0), 0.5 * wts  # mapped to [0, 1]


def load_vector(grid: Grid, func=target_state, quad_order: int = 2) -> np.ndarray:
    """``∫ func * phi_i`` for every node, by tensor Gauss-Legendre per element."""
    p, w = _gauss_rule(quad_order)
    qx, qy = np.meshgrid(p, p)
    qw = np.outer(w, w).ravel()
    qx, qy = qx.ravel(), qy.ravel()
    # bilinear shape functions at the reference quadrature points, shape (nq, 4)
    phi = np.stack([(1 - qx) * (1 - qy), qx * (1 - qy), qx * qy, (1 - qx) * qy], axis=1)
    h = grid.h
    conn = grid.elements()
    origin = grid.node_coords()[conn[:, 0]]
    fx = origin[:, :1] + h * qx[None, :]
    fy = origin[:, 1:] + h * qy[None, :]
    fvals = func(fx, fy)  # (ne, nq)
    local = h * h * (fvals * qw[None, :]) @ phi  # (ne, 4)
    return np.bincount(conn.ravel(), weights=local.ravel(), minlength=grid.node_count)


RHS_VARIANTS = ("galerkin", "projection", "interpolant")


def assemble_rhs(grid: Grid, M_full: SparseMatrix, K_full: SparseMatrix, quad_order: int = 2,
                 variant: str = "galerkin") -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides b and d on the interior nodes.

    ``d_i = - sum_{j on boundary} K_ij u(x_j)`` with the target state as
    Dirichlet data. The state term b depends on ``variant``:

    ``galerkin``
        ``b_i = ∫ u* phi_i - sum_{j on boundary} M_ij u(x_j)`` (default).
    ``projection``
        ``b_i = ∫ u* phi_i`` without the boundary mass term.
    ``interpolant``
        ``b = (M_full u_h)`` restricted to interior rows, where ``u_h`` is the
        nodal interpolant of u* on all nodes.
    """
    if variant not in RHS_VARIANTS:
        raise ValueError(f"unknown rhs variant {variant!r}; expected one of {RHS_VARIANTS}")
    mask = grid.interior_mask()
    inner = np.flatnonzero(mask)
    bnd = np.flatnonzero(~mask)
    coords = grid.node_coords()
    ub = target_state(coords[bnd, 0], coords[bnd, 1])
    Kib = _restrict(K_full, inner, bnd)
    d = -(Kib @ ub)
    if variant == "interpolant":
        u_all = target_state(coords[:, 0], coords[:, 1])
        b = (M_full.to_scipy() @ u_all)[inner]
    else:
        b = load_vector(grid, quad_order=quad_order)[inner]
        if variant == "galerkin":
            b = b - _restrict(M_full, inner, bnd) @ ub
    return b, d


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    beta: float
    grid: Grid
    M: SparseMatrix
    K: SparseMatrix
    b: np.ndarray
    d: np.ndarray

    @property
    def m(self) -> int:
        return self.grid.interior_count

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def level(self) -> int:
        return self.grid.level

    def with_beta(self, beta: float) -> "DiscreteProblem":
        return DiscreteProblem(beta, self.grid, self.M, self.K, self.b, self.d)


def build_problem(level: int, beta: float, quad_order: int = 2,
                  rhs: str = "galerkin") -> DiscreteProblem:
    """Assemble M, K, b and d for the test problem on level ``level``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not 2 <= level <= 8:
        raise ValueError("level must lie in [2, 8]")
    grid = Grid(level)
    Mf, Kf = assemble_full(grid)
    inner = np.flatnonzero(grid.interior_mask())
    M = _restrict(Mf, inner, inner)
    K = _restrict(Kf, inner, inner)
    b, d = assemble_rhs(grid, Mf, Kf, quad_order, rhs)
    return DiscreteProblem(float(beta), grid, M, K, b, d)
