"""Block preconditioners for the KKT system.

Every kind is applied by block substitution over solves with M, K and K^T.
Those solves are either exact (band Cholesky) or truncated PCG runs
preconditioned by a threshold incomplete Cholesky factor.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .fem import DiscreteProblem
from .sparse import (CholeskyFactor, DimensionError, IncompleteCholeskyFactor, SparseMatrix,
                     band_cholesky, cholesky_solve, robust_ict, spmv)


class PreconditionerKind(enum.Enum):
    NEW = "new"
    D = "d"
    C = "c"
    BT = "bt"
    BCD = "bcd"
    BCT = "bct"
    BS = "bs"
    BLT = "blt"
    P1 = "p1"
    P2 = "p2"
    P3 = "p3"
    P4 = "p4"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, name) -> "PreconditionerKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown preconditioner {name!r}; expected one of: {valid}") from None


BLOCK_KINDS = tuple(k for k in PreconditionerKind if k is not PreconditionerKind.IDENTITY)


@dataclass(frozen=True)
class SubSolveMode:
    """How M, K and K^T systems are solved inside a preconditioner application."""

    inexact: bool = False
    inner_tol: float = 1e-3
    inner_maxit: int | None = None  # None -> min(m, 20)
    drop_tol: float = 0.01

    @classmethod
    def exact(cls) -> "SubSolveMode":
        return cls(inexact=False)

    @classmethod
    def pcg_ict(cls, inner_tol=1e-3, inner_maxit=None, drop_tol=0.01) -> "SubSolveMode":
        return cls(True, inner_tol, inner_maxit, drop_tol)

    @property
    def name(self) -> str:
        return "pcg_ict" if self.inexact else "exact"

    def cap(self, m: int) -> int:
        return min(m, 20) if self.inner_maxit is None else self.inner_maxit


@dataclass(eq=False)
class SubSolvers:
    """Factors of M and K for one (problem, mode) pair, shared across kinds."""

    problem: DiscreteProblem
    mode: SubSolveMode
    M_factor: CholeskyFactor | IncompleteCholeskyFactor
    K_factor: CholeskyFactor | IncompleteCholeskyFactor

    @classmethod
    def build(cls, problem: DiscreteProblem, mode: SubSolveMode | None = None) -> "SubSolvers":
        mode = mode or SubSolveMode.exact()
        if mode.inexact:
            return cls(problem, mode, robust_ict(problem.M, mode.drop_tol),
                       robust_ict(problem.K, mode.drop_tol))
        return cls(problem, mode, band_cholesky(problem.M), band_cholesky(problem.K))

    def _solve(self, A: SparseMatrix, F, r, stats, key):
        if stats is not None:
            stats[key] += 1
        if not self.mode.inexact:
            return cholesky_solve(F, r)
        from .krylov import pcg
        x, rep = pcg(A, F, r, tol=self.mode.inner_tol, maxit=self.mode.cap(self.problem.m))
        if stats is not None:
            stats["inner_iterations"] += rep.iterations
        return x

    def solve_M(self, r, stats=None):
        return self._solve(self.problem.M, self.M_factor, r, stats, "M")

    def solve_K(self, r, stats=None):
        return self._solve(self.problem.K, self.K_factor, r, stats, "K")

    def solve_KT(self, r, stats=None):
        # K is symmetric for this discretization: K^T solves reuse K's factor
        return self._solve(self.problem.K, self.K_factor, r, stats, "KT")


# ---------------------------------------------------------------------------
# block-substitution schedules; r = (r1; r2; r3) -> z = (z1; z2; z3)

def _new(S, p, r1, r2, r3, st):
    z1 = S.solve_M(r1 - r3, st)
    z2 = S.solve_K(r1, st)
    z3 = S.solve_KT(r2 - spmv(p.M, z2), st)
    return z1, z2, z3


def _schur_inv(S, p, v, st):
    # (K M^-1 K^T)^-1 v = K^-T M K^-1 v
    return S.solve_KT(spmv(p.M, S.solve_K(v, st)), st)


def _d(S, p, r1, r2, r3, st):
    z1 = S.solve_M(r1, st) / (2 * p.beta)
    z2 = S.solve_M(r2, st)
    z3 = _schur_inv(S, p, r3, st)
    return z1, z2, z3


def _c(S, p, r1, r2, r3, st):
    z3 = -S.solve_M(r1, st)
    t = r2 - spmv(p.K, z3, transposed=True)
    # (2β K^T M^-1 K M)^-1 = (2β)^-1 M^-1 K^-1 M K^-T
    z2 = S.solve_M(S.solve_K(spmv(p.M, S.solve_KT(t, st)), st), st) / (2 * p.beta)
    z1 = S.solve_M(spmv(p.K, z2) - r3, st)
    return z1, z2, z3


def _bt(S, p, r1, r2, r3, st):
    z1 = S.solve_M(r1, st) / (2 * p.beta)
    z2 = S.solve_M(r2, st)
    z3 = _schur_inv(S, p, r3 + spmv(p.M, z1) - spmv(p.K, z2), st)
    return z1, z2, z3


def _bcd(S, p, r1, r2, r3, st):
    z3 = -S.solve_M(r1, st)
    z2 = S.solve_M(r2, st)
    z1 = -S.solve_M(r3, st)
    return z1, z2, z3


def _bct(S, p, r1, r2, r3, st):
    z3 = -S.solve_M(r1, st)
    z2 = S.solve_M(r2 - spmv(p.K, z3, transposed=True), st)
    z1 = S.solve_M(spmv(p.K, z2) - r3, st)
    return z1, z2, z3


def _bs(S, p, r1, r2, r3, st):
    z1 = -S.solve_M(r3, st)
    z2 = S.solve_M(r2, st)
    z3 = 2 * p.beta * z1 - S.solve_M(r1, st)
    return z1, z2, z3


def _blt(S, p, r1, r2, r3, st):
    z1 = S.solve_M(r1, st) / (2 * p.beta)
    z2 = S.solve_M(r2, st)
    z3 = -2 * p.beta * S.solve_M(r3 + spmv(p.M, z1) - spmv(p.K, z2), st)
    return z1, z2, z3


def _p1(S, p, r1, r2, r3, st):
    z3 = S.solve_KT(r2, st)
    z1 = (S.solve_M(r1, st) + z3) / (2 * p.beta)
    z2 = S.solve_K(r3 + spmv(p.M, z1), st)
    return z1, z2, z3


def _p2(S, p, r1, r2, r3, st):
    z2 = S.solve_K(r3, st)
    z3 = S.solve_KT(r2 - spmv(p.M, z2), st)
    z1 = (S.solve_M(r1, st) + z3) / (2 * p.beta)
    return z1, z2, z3


def _p3(S, p, r1, r2, r3, st):
    z2 = S.solve_M(r2, st)
    z1 = S.solve_M(spmv(p.K, z2) - r3, st)
    z3 = 2 * p.beta * z1 - S.solve_M(r1, st)
    return z1, z2, z3


def _p4(S, p, r1, r2, r3, st):
    z1 = -S.solve_M(r3, st)
    z3 = 2 * p.beta * z1 - S.solve_M(r1, st)
    z2 = S.solve_M(r2 - spmv(p.K, z3, transposed=True), st)
    return z1, z2, z3


def _identity(S, p, r1, r2, r3, st):
    return r1.copy(), r2.copy(), r3.copy()


K_ = PreconditionerKind
_SCHEDULES = {
    K_.NEW: _new, K_.D: _d, K_.C: _c, K_.BT: _bt, K_.BCD: _bcd, K_.BCT: _bct, K_.BS: _bs,
    K_.BLT: _blt, K_.P1: _p1, K_.P2: _p2, K_.P3: _p3, K_.P4: _p4, K_.IDENTITY: _identity,
}


@dataclass(eq=False)
class Preconditioner:
    kind: PreconditionerKind
    problem: DiscreteProblem
    solvers: SubSolvers | None
    stats: Counter = field(default_factory=Counter)

    @property
    def beta(self) -> float:
        return self.problem.beta

    @property
    def mode(self) -> SubSolveMode:
        return self.solvers.mode if self.solvers is not None else SubSolveMode.exact()

    @property
    def is_variable(self) -> bool:
        return self.solvers is not None and self.solvers.mode.inexact

    def apply(self, r, stats: Counter | None = None) -> np.ndarray:
        """Return ``P^{-1} r`` (exactly, or approximately in inexact mode)."""
        r = np.asarray(r, dtype=np.float64)
        m = self.problem.m
        if r.shape != (3 * m,):
            raise DimensionError(f"expected a vector of length {3 * m}, got shape {r.shape}")
        st = self.stats if stats is None else stats
        st["applications"] += 1
        z = _SCHEDULES[self.kind](self.solvers, self.problem, r[:m], r[m:2 * m], r[2 * m:], st)
        return np.concatenate(z)

    __call__ = apply


def build_preconditioner(kind, problem: DiscreteProblem, mode: SubSolveMode | None = None,
                         solvers: SubSolvers | None = None) -> Preconditioner:
    """Prepare a preconditioner; pass ``solvers`` to share factorizations between kinds."""
    kind = PreconditionerKind.parse(kind)
    if not problem.beta > 0:
        raise ValueError("beta must be positive")
    if kind is PreconditionerKind.IDENTITY:
        return Preconditioner(kind, problem, solvers)
    if solvers is None:
        solvers = SubSolvers.build(problem, mode)
    elif mode is not None and solvers.mode != mode:
        raise ValueError("shared sub-solvers were built for a different mode")
    return Preconditioner(kind, problem, solvers)


def preconditioner_matrix(kind, problem: DiscreteProblem) -> np.ndarray:
    """Dense 3m x 3m block matrix of a preconditioner, straight from its definition.

    Independent of the substitution schedules; meant for small-level checks.
    """
    kind = PreconditionerKind.parse(kind)
    m = problem.m
    if m > 1000:
        raise ValueError("dense preconditioner matrix limited to m <= 1000")
    M = problem.M.to_dense()
    K = problem.K.to_dense()
    b2 = 2.0 * problem.beta
    Z = np.zeros((m, m))
    Minv = np.linalg.inv(M)
    schur = K @ Minv @ K.T
    blocks = {
        K_.NEW: [[Z, K, Z], [Z, M, K.T], [-M, K, Z]],
        K_.D: [[b2 * M, Z, Z], [Z, M, Z], [Z, Z, schur]],
        K_.C: [[Z, Z, -M], [Z, b2 * K.T @ Minv @ K @ M, K.T], [-M, K, Z]],
        K_.BT: [[b2 * M, Z, Z], [Z, M, Z], [-M, K, schur]],
        K_.BCD: [[Z, Z, -M], [Z, M, Z], [-M, Z, Z]],
        K_.BCT: [[Z, Z, -M], [Z, M, K.T], [-M, K, Z]],
        K_.BS: [[b2 * M, Z, -M], [Z, M, Z], [-M, Z, Z]],
        K_.BLT: [[b2 * M, Z, Z], [Z, M, Z], [-M, K, -M / b2]],
        K_.P1: [[b2 * M, Z, -M], [Z, Z, K.T], [-M, K, Z]],
        K_.P2: [[b2 * M, Z, -M], [Z, M, K.T], [Z, K, Z]],
        K_.P3: [[b2 * M, Z, -M], [Z, M, Z], [-M, K, Z]],
        K_.P4: [[b2 * M, Z, -M], [Z, M, K.T], [-M, Z, Z]],
        K_.IDENTITY: [[np.eye(m), Z, Z], [Z, np.eye(m), Z], [Z, Z, np.eye(m)]],
    }
    return np.block(blocks[kind])
