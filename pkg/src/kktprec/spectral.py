"""Spectrum of the NEW-preconditioned KKT matrix and the bounds it obeys.

The non-unit eigenvalues come from the m x m reduced problem
``2β I + K^{-T} M K^{-1} M``, symmetrized as ``L^T K^{-T} M K^{-1} L`` with
``M = L L^T`` and diagonalized by cyclic Jacobi. The unit eigenvalue is
certified through the rank of ``P^{-1} A - I`` rather than a nonsymmetric
eigensolver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import DiscreteProblem
from .precond import PreconditionerKind, build_preconditioner
from .saddle import SaddleSystem, materialize_A
from .sparse import band_cholesky, cholesky_solve

C1, C2 = 1.0 / 9.0, 1.0
D1, D2 = 2.0 * math.pi ** 2, 4.0
UNIT_TOL = 1e-8
BOUND_SLACK = 1e-12
MAX_REDUCED_LEVEL = 5
MAX_FULL_LEVEL = 4


# ---------------------------------------------------------------------------
# dense symmetric eigensolver

def _round_robin(n: int):
    """Pairings for one sweep: n-1 rounds of n/2 disjoint pairs (n even)."""
    players = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        yield np.minimum(p, q), np.maximum(p, q)
        players = [players[0]] + [players[-1]] + players[1:-1]


def jacobi_eigh(S, tol: float = 1e-15, max_sweeps: int = 30):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Rotations within a round act on disjoint index pairs, so each round is
    applied to all pairs at once.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    V : ndarray
        Orthonormal eigenvectors, ``S @ V ~ V * w``.
    """
    A = np.array(S, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("jacobi_eigh needs a square matrix")
    n0 = A.shape[0]
    A = 0.5 * (A + A.T)
    if n0 == 1:
        return A.diagonal().copy(), np.eye(1)
    n = n0 + (n0 % 2)
    if n != n0:  # pad with a decoupled dummy row/column
        A = np.pad(A, ((0, 1), (0, 1)))
    Vt = np.eye(n)  # rows are eigenvectors
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n0), np.eye(n0)
    rounds = list(_round_robin(n))
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # J^T A J as two row rotations around a transpose (A stays symmetric)
            for _ in range(2):
                Ap, Aq = A[p], A[q]
                A[p], A[q] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
                A = A.T.copy()
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = Vt[p], Vt[q]
            Vt[p], Vt[q] = c[:, None] * Vp - s[:, None] * Vq, s[:, None] * Vp + c[:, None] * Vq
    w = A.diagonal().copy()
    V = Vt.T
    if n != n0:
        # the dummy index never couples, so its eigenvector is e_{n-1}
        keep = np.argsort(np.abs(V[n0, :]))[:n0]
        w, V = w[keep], V[:n0, keep]
    order = np.argsort(w)
    return w[order], V[:, order]


def numerical_rank(A, rtol: float = 1e-9) -> int:
    """Rank by Gaussian elimination with complete pivoting.

    A pivot counts when it exceeds ``rtol`` times the largest initial entry.
    """
    A = np.array(A, dtype=np.float64)
    m, n = A.shape
    thresh = rtol * max(np.abs(A).max(), 1e-300)
    rank = 0
    for k in range(min(m, n)):
        sub = np.abs(A[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= thresh:
            break
        i += k
        j += k
        A[[k, i]] = A[[i, k]]
        A[:, [k, j]] = A[:, [j, k]]
        A[k + 1:, k:] -= np.outer(A[k + 1:, k] / A[k, k], A[k, k:])
        rank += 1
    return rank


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBounds:
    h: float
    beta: float
    c1: float = C1
    c2: float = C2
    d1: float = D1
    d2: float = D2

    @property
    def lower(self) -> float:
        return 2.0 * self.beta + self.c1 ** 2 * self.h ** 4 / self.d2 ** 2

    @property
    def upper(self) -> float:
        return 2.0 * self.beta + self.c2 ** 2 / self.d1 ** 2

    def contains(self, values, slack: float = BOUND_SLACK) -> bool:
        v = np.asarray(values)
        return bool(np.all(v >= self.lower - slack) and np.all(v <= self.upper + slack))


@dataclass
class SpectrumReport:
    unit_count: int
    nonunit_values: np.ndarray
    bounds: SpectralBounds
    all_within: bool
    rank_deficit_matrix_rank: int = -1
    eigvec_residual: float = float("nan")
    unit_eigvec_residual: float = float("nan")
    details: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.unit_count + len(self.nonunit_values)


def _mass_chol_dense(problem: DiscreteProblem) -> np.ndarray:
    return band_cholesky(problem.M).lower.to_dense()


def reduced_matrix(problem: DiscreteProblem, check_symmetry: bool = True):
    """Symmetric ``S = L^T K^{-T} M K^{-1} L`` and the Cholesky factor L of M.

    Returns ``(S, L, asym)`` where ``asym = ||S - S^T||_F / ||S||_F`` before
    symmetrization.
    """
    if problem.level > MAX_REDUCED_LEVEL:
        raise ValueError(f"reduced spectrum limited to level <= {MAX_REDUCED_LEVEL}")
    L = _mass_chol_dense(problem)
    FK = band_cholesky(problem.K)
    X = cholesky_solve(FK, L)  # K^{-1} L
    MX = problem.M.to_scipy() @ X
    KtInvMX = cholesky_solve(FK, MX)  # K^{-T} M K^{-1} L (K symmetric)
    S = L.T @ KtInvMX
    asym = float(np.linalg.norm(S - S.T) / np.linalg.norm(S))
    return 0.5 * (S + S.T), L, asym


def nonunit_spectrum(problem: DiscreteProblem, return_vectors: bool = False):
    """The m eigenvalues of ``P^{-1} A`` that differ from 1, ascending.

    With ``return_vectors`` also returns the matching z vectors (columns) of
    ``(2β I + K^{-T} M K^{-1} M) z = λ z``.
    """
    S, L, _ = reduced_matrix(problem)
    w, Q = jacobi_eigh(S)
    vals = 2.0 * problem.beta + w
    if not return_vectors:
        return vals
    import scipy.linalg
    Z = scipy.linalg.solve_triangular(L.T, Q, lower=False)  # z = L^{-T} q
    return vals, Z


def preconditioned_matrix(problem: DiscreteProblem) -> np.ndarray:
    """Dense ``P^{-1} A`` for the NEW preconditioner, built column by column."""
    if problem.level > MAX_FULL_LEVEL:
        raise ValueError(f"dense preconditioned matrix limited to level <= {MAX_FULL_LEVEL}")
    sys = SaddleSystem(problem)
    A = materialize_A(sys).to_dense()
    P = build_preconditioner(PreconditionerKind.NEW, problem)
    return np.column_stack([P.apply(A[:, j]) for j in range(A.shape[1])])


def verify_theorem1(problem: DiscreteProblem, rng=None) -> SpectrumReport:
    """Certify the 2m-fold unit eigenvalue and the m non-unit eigenpairs of ``P^{-1} A``."""
    if problem.level > MAX_FULL_LEVEL:
        raise ValueError(f"unit-eigenvalue certificate limited to level <= {MAX_FULL_LEVEL}")
    rng = np.random.default_rng(0) if rng is None else rng
    m, beta = problem.m, problem.beta
    T = preconditioned_matrix(problem)
    rank = numerical_rank(T - np.eye(3 * m))
    vals, Z = nonunit_spectrum(problem, return_vectors=True)
    near_one = int(np.sum(np.abs(vals - 1.0) <= UNIT_TOL))
    unit_count = 3 * m - rank + near_one
    nonunit = vals[np.abs(vals - 1.0) > UNIT_TOL]

    M = problem.M.to_dense()
    K = problem.K.to_dense()
    Minv_Kt_Z = np.linalg.solve(M, K.T @ Z)
    V = np.vstack([-np.linalg.solve(M, K @ Minv_Kt_Z), -Minv_Kt_Z, Z])
    res = np.linalg.norm(T @ V - V * vals[None, :], axis=0) / np.linalg.norm(V, axis=0)

    y = rng.standard_normal((m, 4))
    z = rng.standard_normal((m, 4))
    W = np.vstack([(z + np.linalg.solve(M, K @ y)) / (2 * beta), y, z])
    ures = np.linalg.norm(T @ W - W, axis=0) / np.linalg.norm(W, axis=0)

    bounds = SpectralBounds(problem.h, beta)
    return SpectrumReport(unit_count, nonunit, bounds, bounds.contains(vals),
                          rank_deficit_matrix_rank=rank, eigvec_residual=float(res.max()),
                          unit_eigvec_residual=float(ures.max()))


def verify_bounds(problem: DiscreteProblem, values=None, slack: float = BOUND_SLACK) -> bool:
    """True iff every non-unit eigenvalue lies in ``[2β + h^4/1296, 2β + 1/(4π^4)]``."""
    vals = nonunit_spectrum(problem) if values is None else np.asarray(values)
    return SpectralBounds(problem.h, problem.beta).contains(vals, slack)


def spectrum(problem: DiscreteProblem, which: str = "preconditioned") -> np.ndarray:
    """Ascending eigenvalues of A (``original``) or of ``P^{-1} A`` (``preconditioned``)."""
    if problem.level > MAX_FULL_LEVEL:
        raise ValueError(f"spectrum dumps limited to level <= {MAX_FULL_LEVEL}")
    if which == "original":
        w, _ = jacobi_eigh(materialize_A(SaddleSystem(problem)).to_dense())
        return w
    if which == "preconditioned":
        rep = verify_theorem1(problem)
        return np.sort(np.concatenate([np.ones(rep.unit_count), rep.nonunit_values]))
    raise ValueError("which must be 'original' or 'preconditioned'")


def spectrum_dump(problem: DiscreteProblem, which: str, path) -> Path:
    """Write ``index eigenvalue`` lines (1-based, ascending) with a header comment."""
    vals = spectrum(problem, which)
    path = Path(path)
    header = f"level={problem.level} h={problem.h:g} beta={problem.beta:g} which={which}"
    np.savetxt(path, np.column_stack([np.arange(1, vals.size + 1), vals]),
               fmt=["%d", "%.17g"], header=header)
    return path


def read_spectrum_dump(path) -> np.ndarray:
    data = np.loadtxt(path, ndmin=2)
    return data[:, 1]
