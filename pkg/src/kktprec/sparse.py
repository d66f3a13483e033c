"""Compressed sparse-row matrices and the factorizations built on them.

Everything downstream (assembly, block operators, preconditioners) talks to
:class:`SparseMatrix`. The exact factorization goes through LAPACK's banded
Cholesky; the threshold incomplete factorization is implemented here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class NotSPDError(ValueError):
    """A Cholesky pivot was not strictly positive."""

    def __init__(self, pivot: int, value: float | None = None):
        self.pivot = pivot
        self.value = value
        msg = f"matrix is not positive definite: pivot {pivot} is non-positive"
        if value is not None:
            msg += f" ({value:.3e})"
        super().__init__(msg)


class BreakdownError(NotSPDError):
    """Incomplete factorization produced a non-positive pivot."""


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Real CSR matrix with sorted column indices inside every row."""

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _row_ids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ro = np.asarray(self.row_offsets, dtype=np.int64)
        ci = np.asarray(self.col_indices, dtype=np.int64)
        va = np.asarray(self.values, dtype=np.float64)
        if ro.shape != (self.nrows + 1,) or ro[0] != 0 or np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing, start at 0, length nrows+1")
        if ci.shape != va.shape or ro[-1] != ci.size:
            raise ValueError("nnz mismatch between row_offsets, col_indices and values")
        if ci.size and (ci.min() < 0 or ci.max() >= self.ncols):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(va)):
            raise ValueError("matrix values must be finite")
        row_ids = np.repeat(np.arange(self.nrows), np.diff(ro))
        # strictly increasing columns within a row
        same_row = row_ids[1:] == row_ids[:-1]
        if np.any(ci[1:][same_row] <= ci[:-1][same_row]):
            raise ValueError("column indices must be strictly increasing within each row")
        for name, arr in (("row_offsets", ro), ("col_indices", ci), ("values", va)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        row_ids.setflags(write=False)
        object.__setattr__(self, "_row_ids", row_ids)

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_coo(cls, rows, cols, vals, shape, drop_zeros=False) -> "SparseMatrix":
        """Build from triplets, summing duplicates in input order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        nrows, ncols = shape
        order = np.lexsort((cols, rows))  # stable
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            new = np.ones(rows.size, dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            summed = np.add.reduceat(vals, starts)
            rows, cols, vals = rows[starts], cols[starts], summed
        if drop_zeros:
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        return cls(nrows, ncols, np.cumsum(offsets), cols, vals)

    @classmethod
    def from_dense(cls, a, tol: float = 0.0) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionError("from_dense expects a 2-D array")
        r, c = np.nonzero(np.abs(a) > tol)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csr = mat.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    # -- views -------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[self.nrows])

    @property
    def row_ids(self) -> np.ndarray:
        return self._row_ids

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self._row_ids, self.col_indices] = self.values
        return out

    def to_scipy(self):
        import scipy.sparse as sps
        return sps.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_coo(self.col_indices, self._row_ids, self.values,
                                     (self.ncols, self.nrows))

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        on = self._row_ids == self.col_indices
        d[self._row_ids[on]] = self.values[on]
        return d

    def bandwidth(self) -> int:
        """Largest ``|i - j|`` over stored entries."""
        if self.nnz == 0:
            return 0
        return int(np.max(np.abs(self._row_ids - self.col_indices)))

    def scaled(self, alpha: float) -> "SparseMatrix":
        return SparseMatrix(self.nrows, self.ncols, self.row_offsets, self.col_indices,
                            alpha * self.values)

    def add_diagonal(self, diag) -> "SparseMatrix":
        diag = np.broadcast_to(np.asarray(diag, dtype=np.float64), (self.nrows,))
        idx = np.arange(self.nrows)
        return SparseMatrix.from_coo(np.concatenate([self._row_ids, idx]),
                                     np.concatenate([self.col_indices, idx]),
                                     np.concatenate([self.values, diag]), self.shape)

    def lower_band(self, kd: int | None = None) -> np.ndarray:
        """LAPACK lower band storage: ``ab[i - j, j] = A[i, j]`` for ``i >= j``."""
        if self.nrows != self.ncols:
            raise DimensionError("band storage needs a square matrix")
        kd = self.bandwidth() if kd is None else kd
        ab = np.zeros((kd + 1, self.nrows))
        low = self._row_ids >= self.col_indices
        ri, cj = self._row_ids[low], self.col_indices[low]
        if np.any(ri - cj > kd):
            raise ValueError("entries outside the requested band")
        ab[ri - cj, cj] = self.values[low]
        return ab

    def __matmul__(self, x):
        return spmv(self, x)


def lower_from_band(ab: np.ndarray) -> SparseMatrix:
    """CSR lower-triangular matrix from LAPACK lower band storage (zeros skipped)."""
    kd1, n = ab.shape
    d, j = np.nonzero(ab)
    return SparseMatrix.from_coo(j + d, j, ab[d, j], (n, n))


def spmv(A: SparseMatrix, x, transposed: bool = False) -> np.ndarray:
    """Return ``A @ x`` (or ``A.T @ x``) as a new array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("spmv expects a 1-D vector")
    if not transposed:
        if x.size != A.ncols:
            raise DimensionError(f"spmv: matrix has {A.ncols} columns, vector has {x.size}")
        return np.bincount(A.row_ids, weights=A.values * x[A.col_indices], minlength=A.nrows)
    if x.size != A.nrows:
        raise DimensionError(f"spmv^T: matrix has {A.nrows} rows, vector has {x.size}")
    return np.bincount(A.col_indices, weights=A.values * x[A.row_ids], minlength=A.ncols)


# --------------------------------------------------------------------------
# exact factorization

@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Band Cholesky factor ``A = L L^T``; ``band`` holds L in LAPACK lower storage."""

    band: np.ndarray
    bandwidth: int

    @property
    def n(self) -> int:
        return self.band.shape[1]

    @property
    def lower(self) -> SparseMatrix:
        return lower_from_band(self.band)

    def solve(self, b) -> np.ndarray:
        return cholesky_solve(self, b)


def band_cholesky(A: SparseMatrix) -> CholeskyFactor:
    """Factor an SPD matrix inside its own band.

    Raises
    ------
    NotSPDError
        On a non-positive pivot; ``err.pivot`` is the 0-based failing index.
    """
    if A.nrows != A.ncols:
        raise DimensionError("band_cholesky needs a square matrix")
    kd = A.bandwidth()
    ab = A.lower_band(kd)
    try:
        lb = scipy.linalg.cholesky_banded(ab, lower=True)
    except np.linalg.LinAlgError as err:
        pivot = int(str(err).split("-th")[0]) - 1
        raise NotSPDError(pivot) from None
    return CholeskyFactor(lb, kd)


def _tri_solve(band: np.ndarray, b: np.ndarray, trans: str) -> np.ndarray:
    x, info = lapack.dtbtrs(band, b.reshape(b.shape[0], -1), uplo="L", trans=trans)
    if info != 0:
        raise np.linalg.LinAlgError(f"triangular band solve failed (info={info})")
    return x.reshape(b.shape)


def cholesky_solve(F: CholeskyFactor, b) -> np.ndarray:
    """Forward then backward substitution with the band factor.

    ``b`` may be a vector or an ``(n, k)`` block of right-hand sides.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim not in (1, 2) or b.shape[0] != F.n:
        raise DimensionError(f"cholesky_solve: factor is {F.n}x{F.n}, rhs has shape {b.shape}")
    return _tri_solve(F.band, _tri_solve(F.band, b, "N"), "T")


# --------------------------------------------------------------------------
# threshold incomplete factorization

@dataclass(frozen=True, eq=False)
class IncompleteCholeskyFactor:
    """Lower factor with ``L L^T ~ A``. Dropped entries are stored as exact zeros in ``band``."""

    band: np.ndarray
    drop_tolerance: float
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.band.shape[1]

    @property
    def lower(self) -> SparseMatrix:
        return lower_from_band(self.band)

    def solve_lower(self, b) -> np.ndarray:
        return _tri_solve(self.band, np.asarray(b, dtype=np.float64), "N")

    def solve_upper(self, b) -> np.ndarray:
        return _tri_solve(self.band, np.asarray(b, dtype=np.float64), "T")

    def solve(self, b) -> np.ndarray:
        """Apply ``(L L^T)^{-1}``."""
        return self.solve_upper(self.solve_lower(b))


def ict_factor(A: SparseMatrix, tau: float, shift: float = 0.0) -> IncompleteCholeskyFactor:
    """Incomplete Cholesky with threshold dropping.

    Columns are eliminated right-looking over a dense sliding window the width
    of the band, so fill can appear anywhere inside the band profile. A
    computed sub-diagonal ``L[i, j]`` is discarded when
    ``|L[i, j]| < tau * ||A[:, j]||_2``; the diagonal is always kept.
    ``shift`` factors ``A + shift * diag(A)`` instead of ``A``.

    Raises
    ------
    BreakdownError
        When a pivot is not strictly positive.
    """
    if tau < 0:
        raise ValueError("drop tolerance must be non-negative")
    if A.nrows != A.ncols:
        raise DimensionError("ict_factor needs a square matrix")
    n = A.nrows
    kd = A.bandwidth()
    w = kd + 1
    ab = A.lower_band(kd)
    if shift:
        ab[0] = ab[0] * (1.0 + shift)
    colnorm = np.sqrt(np.bincount(A.col_indices, weights=A.values ** 2, minlength=n))
    thresh = tau * colnorm

    L = np.zeros((w, n))
    win = np.zeros((w, w))
    for t in range(min(w, n)):
        col = ab[: min(w, n) - t, t]
        win[t:t + col.size, t] = col
        win[t, t:t + col.size] = col
    for j in range(n):
        piv = win[0, 0]
        if not piv > 0.0:
            raise BreakdownError(j, float(piv))
        d = np.sqrt(piv)
        rows = min(w, n - j)
        lcol = win[:rows, 0] / d
        lcol[0] = d
        small = np.abs(lcol[1:]) < thresh[j]
        lcol[1:][small] = 0.0
        L[:rows, j] = lcol
        # rank-one update of the trailing window, then slide by one
        sub = lcol[1:]
        win[1:rows, 1:rows] -= np.outer(sub, sub)
        win[:-1, :-1] = win[1:, 1:]
        win[-1, :] = 0.0
        win[:, -1] = 0.0
        new = j + w
        if new < n:
            # column `new` couples back to rows new-kd .. new, i.e. window positions 0..kd
            r = np.arange(j + 1, new + 1)
            coupling = ab[new - r, r]
            win[-1, :] = coupling
            win[:, -1] = coupling
    return IncompleteCholeskyFactor(L, float(tau), float(shift))


def robust_ict(A: SparseMatrix, tau: float, sigma0: float = 1e-3, retries: int = 10
               ) -> IncompleteCholeskyFactor:
    """``ict_factor`` with diagonal-shift restarts on breakdown (sigma doubles each retry)."""
    try:
        return ict_factor(A, tau)
    except BreakdownError as err:
        last = err
    sigma = sigma0
    for _ in range(retries):
        try:
            return ict_factor(A, tau, shift=sigma)
        except BreakdownError as err:
            last = err
            sigma *= 2.0
    raise last
