"""Matrix Market and plain-text vector I/O for :class:`SparseMatrix`."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sps

from .sparse import SparseMatrix


def is_symmetric(A: SparseMatrix) -> bool:
    if A.nrows != A.ncols:
        return False
    T = A.transpose()
    return (np.array_equal(A.row_offsets, T.row_offsets)
            and np.array_equal(A.col_indices, T.col_indices)
            and np.array_equal(A.values, T.values))


def write_matrix_market(A: SparseMatrix, path, symmetry: str | None = None,
                        comment: str = "") -> Path:
    """Write coordinate format; ``symmetry`` defaults to 'symmetric' when A == A^T."""
    path = Path(path)
    if path.suffix != ".mtx":
        path = path.with_name(path.name + ".mtx")
    if symmetry is None:
        symmetry = "symmetric" if is_symmetric(A) else "general"
    coo = sps.coo_matrix(A.to_scipy())
    if symmetry == "symmetric":
        coo = sps.tril(coo, format="coo")
    scipy.io.mmwrite(str(path), coo, comment=comment, field="real", precision=17,
                     symmetry=symmetry)
    return path


def read_matrix_market(path) -> SparseMatrix:
    """Read a real coordinate Matrix Market file (general or symmetric)."""
    mat = scipy.io.mmread(str(path))
    if not sps.issparse(mat):
        mat = sps.csr_matrix(np.asarray(mat))
    return SparseMatrix.from_scipy(sps.csr_matrix(mat, dtype=np.float64))


def write_vector(v, path, header: str = "") -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(v, dtype=np.float64), fmt="%.17g", header=header)
    return path


def read_vector(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=1)
