"""Krylov solvers: full GMRES and FGMRES (right preconditioned), PCG, Chebyshev."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sparse import IncompleteCholeskyFactor, SparseMatrix, spmv

Operator = Callable[[np.ndarray], np.ndarray]


class ConfigurationError(ValueError):
    """Solver or experiment settings are inconsistent."""


@dataclass(frozen=True)
class SolverConfig:
    """Outer solver settings. ``maxit=None`` means ``min(maxit_cap, n)`` with ``n = 3m``."""

    tol: float = 1e-6
    maxit: int | None = None
    maxit_cap: int = 500

    def resolve_maxit(self, n: int) -> int:
        return self.maxit if self.maxit is not None else min(self.maxit_cap, n)


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    relative_residuals: list[float]
    wall_time: float = 0.0
    inner_iteration_total: int = 0
    estimated_residuals: list[float] = field(default_factory=list)
    basis: np.ndarray | None = field(default=None, repr=False)
    iterates: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def final_residual(self) -> float:
        return self.relative_residuals[-1]


def _givens(a: float, b: float) -> tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = math.hypot(a, b)
    return a / r, b / r


def _arnoldi_solve(apply_A: Operator, apply_P: Operator | None, g, cfg: SolverConfig,
                   flexible: bool, keep_basis: bool, keep_iterates: bool):
    t0 = time.perf_counter()
    g = np.asarray(g, dtype=np.float64)
    n = g.size
    apply_P = apply_P or (lambda v: v)
    maxit = cfg.resolve_maxit(n)
    x = np.zeros(n)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return x, SolveReport(0, True, [0.0], time.perf_counter() - t0)

    V = np.zeros((maxit + 1, n))
    Z = np.zeros((maxit, n))
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    s = np.zeros(maxit + 1)
    s[0] = gnorm
    V[0] = g / gnorm
    hist, est, iterates = [1.0], [1.0], []
    converged = False
    k = 0
    filled = 1
    y = np.zeros(0)
    for k in range(maxit):
        z = apply_P(V[k])
        Z[k] = z
        w = apply_A(z)
        wnorm0 = float(np.linalg.norm(w))
        for i in range(k + 1):  # modified Gram-Schmidt
            H[i, k] = w @ V[i]
            w -= H[i, k] * V[i]
        hnext = float(np.linalg.norm(w))
        H[k + 1, k] = hnext
        for i in range(k):
            a, b = H[i, k], H[i + 1, k]
            H[i, k] = cs[i] * a + sn[i] * b
            H[i + 1, k] = -sn[i] * a + cs[i] * b
        cs[k], sn[k] = _givens(H[k, k], H[k + 1, k])
        H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
        H[k + 1, k] = 0.0
        s[k + 1] = -sn[k] * s[k]
        s[k] = cs[k] * s[k]
        y = _back_substitute(H[:k + 1, :k + 1], s[:k + 1])
        x = Z[:k + 1].T @ y
        rel = float(np.linalg.norm(g - apply_A(x))) / gnorm
        hist.append(rel)
        est.append(abs(s[k + 1]) / gnorm)
        if keep_iterates:
            iterates.append(x.copy())
        breakdown = hnext <= 1e-14 * max(wnorm0, 1e-300)
        if rel <= cfg.tol or breakdown:
            converged = True  # happy breakdown: exact solution in the Krylov space
            break
        V[k + 1] = w / hnext
        filled += 1
    its = k + 1
    if not flexible:
        # standard right-preconditioned update x = P^{-1} V y
        x = apply_P(V[:its].T @ y)
        hist[-1] = float(np.linalg.norm(g - apply_A(x))) / gnorm
        if keep_iterates:
            iterates[-1] = x.copy()
    rep = SolveReport(its, bool(converged), hist, time.perf_counter() - t0,
                      estimated_residuals=est,
                      basis=V[:filled].copy() if keep_basis else None,
                      iterates=iterates if keep_iterates else None)
    return x, rep


def _back_substitute(R: np.ndarray, s: np.ndarray) -> np.ndarray:
    k = s.size
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (s[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def gmres(apply_A: Operator, apply_P: Operator | None, g, cfg: SolverConfig | None = None,
          keep_basis: bool = False, keep_iterates: bool = False):
    """Full (unrestarted) right-preconditioned GMRES with a fixed preconditioner.

    Arnoldi uses modified Gram-Schmidt and the least-squares problem is kept
    triangular by Givens rotations. Because preconditioning is on the right,
    the monitored residual is the residual of the original system. Returns
    ``(x, SolveReport)``; non-convergence is reported, not raised.
    """
    return _arnoldi_solve(apply_A, apply_P, g, cfg or SolverConfig(), False, keep_basis,
                          keep_iterates)


def fgmres(apply_A: Operator, apply_P: Operator | None, g, cfg: SolverConfig | None = None,
           keep_basis: bool = False, keep_iterates: bool = False):
    """Flexible GMRES: the preconditioned directions are stored, so the
    preconditioner may change from one iteration to the next."""
    return _arnoldi_solve(apply_A, apply_P, g, cfg or SolverConfig(), True, keep_basis,
                          keep_iterates)


def pcg(A: SparseMatrix, L: IncompleteCholeskyFactor | None, rhs, tol: float = 1e-3,
        maxit: int | None = None):
    """Preconditioned CG with ``(L L^T)^{-1}`` applied as two triangular solves.

    Stops once ``||rhs - A x|| <= tol * ||rhs||`` (true residual, zero start) or
    after ``maxit`` steps, in which case the truncated iterate is returned.
    """
    t0 = time.perf_counter()
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    maxit = min(n, 20) if maxit is None else maxit
    x = np.zeros(n)
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return x, SolveReport(0, True, [0.0], time.perf_counter() - t0)
    prec = (lambda v: L.solve(v)) if L is not None else (lambda v: v.copy())
    r = rhs.copy()
    z = prec(r)
    p = z.copy()
    rz = r @ z
    hist = [1.0]
    converged = False
    its = 0
    for its in range(1, maxit + 1):
        q = spmv(A, p)
        alpha = rz / (p @ q)
        x += alpha * p
        r -= alpha * q
        rel = float(np.linalg.norm(rhs - spmv(A, x))) / bnorm
        hist.append(rel)
        if rel <= tol:
            converged = True
            break
        z = prec(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(its, converged, hist, time.perf_counter() - t0)


CHEBYSHEV_BETA_MAX = 0.5 * (1.0 - 1.0 / (4.0 * math.pi ** 4))


def chebyshev_interval(beta: float) -> tuple[float, float]:
    """Eigenvalue interval ``[2β, 1]`` of the NEW-preconditioned operator."""
    if not 0 < beta <= CHEBYSHEV_BETA_MAX:
        raise ConfigurationError(
            f"Chebyshev needs 0 < beta <= {CHEBYSHEV_BETA_MAX:.6f}, got {beta}")
    return 2.0 * beta, 1.0


def chebyshev(apply_A: Operator, apply_P: Operator | None, g, interval: tuple[float, float],
              cfg: SolverConfig | None = None, keep_iterates: bool = False):
    """Chebyshev iteration on ``P^{-1} A x = P^{-1} g`` for a spectrum in ``interval``."""
    cfg = cfg or SolverConfig()
    lo, hi = map(float, interval)
    if not 0 < lo < hi:
        raise ConfigurationError(f"Chebyshev interval must satisfy 0 < lo < hi, got {interval}")
    t0 = time.perf_counter()
    g = np.asarray(g, dtype=np.float64)
    n = g.size
    apply_P = apply_P or (lambda v: v.copy())
    maxit = cfg.resolve_maxit(n)
    x = np.zeros(n)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return x, SolveReport(0, True, [0.0], time.perf_counter() - t0)
    theta = 0.5 * (hi + lo)
    delta = 0.5 * (hi - lo)
    sigma = theta / delta
    rho = 1.0 / sigma
    s = g.copy()  # residual of the original system
    r = apply_P(s)
    d = r / theta
    hist, iterates = [1.0], []
    converged = False
    its = 0
    for its in range(1, maxit + 1):
        x += d
        Ad = apply_A(d)
        s -= Ad
        rel = float(np.linalg.norm(g - apply_A(x))) / gnorm
        hist.append(rel)
        if keep_iterates:
            iterates.append(x.copy())
        if rel <= cfg.tol:
            converged = True
            break
        r = apply_P(s)
        rho_next = 1.0 / (2.0 * sigma - rho)
        d = rho_next * rho * d + (2.0 * rho_next / delta) * r
        rho = rho_next
    return x, SolveReport(its, converged, hist, time.perf_counter() - t0,
                          iterates=iterates if keep_iterates else None)
