"""Block preconditioners for the discretized Poisson control KKT system."""
from .fem import DiscreteProblem, Grid, assemble, build_problem, target_state
from .krylov import ConfigurationError, SolveReport, SolverConfig, chebyshev, fgmres, gmres, pcg
from .precond import (BLOCK_KINDS, Preconditioner, PreconditionerKind, SubSolveMode,
                      build_preconditioner)
from .saddle import SaddleSystem
from .sparse import SparseMatrix, band_cholesky, cholesky_solve, ict_factor, spmv

__all__ = [
    "DiscreteProblem", "Grid", "assemble", "build_problem", "target_state",
    "ConfigurationError", "SolveReport", "SolverConfig", "chebyshev", "fgmres", "gmres", "pcg",
    "BLOCK_KINDS", "Preconditioner", "PreconditionerKind", "SubSolveMode",
    "build_preconditioner", "SaddleSystem", "SparseMatrix", "band_cholesky", "cholesky_solve",
    "ict_factor", "spmv",
]
