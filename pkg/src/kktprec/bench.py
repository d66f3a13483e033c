"""Experiment matrix over (beta, level, preconditioner), tables, and spectral checks."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, astuple, dataclass, field, fields
from pathlib import Path

import numpy as np

from .fem import RHS_VARIANTS, DiscreteProblem, build_problem
from .krylov import (ConfigurationError, SolverConfig, chebyshev, chebyshev_interval, fgmres,
                     gmres)
from .precond import (BLOCK_KINDS, PreconditionerKind, SubSolveMode, SubSolvers,
                      build_preconditioner, preconditioner_matrix)
from .saddle import SaddleSystem, true_residual

log = logging.getLogger(__name__)

DEFAULT_BETAS = tuple(10.0 ** -k for k in range(1, 11))
DEFAULT_LEVELS = (2, 3, 4, 5, 6)
MAX_LEVEL = 6
WORKERS_ENV = "KKTPREC_WORKERS"


@dataclass
class ExperimentConfig:
    betas: tuple[float, ...] = DEFAULT_BETAS
    levels: tuple[int, ...] = DEFAULT_LEVELS
    kinds: tuple[PreconditionerKind, ...] = BLOCK_KINDS
    mode: SubSolveMode = field(default_factory=SubSolveMode.exact)
    solver: str = "gmres"
    output_format: str = "markdown"
    seed: int = 0
    tol: float = 1e-6
    maxit_cap: int = 500
    rhs: str = "galerkin"
    allow_level7: bool = False
    residual_dir: str | None = None

    def __post_init__(self):
        self.kinds = tuple(PreconditionerKind.parse(k) for k in self.kinds)
        self.betas = tuple(float(b) for b in self.betas)
        self.levels = tuple(int(l) for l in self.levels)
        self.validate()

    def validate(self):
        if self.solver not in ("gmres", "fgmres", "chebyshev"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.output_format not in ("csv", "markdown"):
            raise ConfigurationError(f"unknown output format {self.output_format!r}")
        if not self.betas or not self.levels or not self.kinds:
            raise ConfigurationError("betas, levels and kinds must be non-empty")
        if any(not b > 0 for b in self.betas):
            raise ConfigurationError("beta values must be positive")
        top = 7 if self.allow_level7 else MAX_LEVEL
        if any(not 2 <= l <= top for l in self.levels):
            raise ConfigurationError(f"levels must lie in [2, {top}]")
        if self.solver == "gmres" and self.mode.inexact:
            raise ConfigurationError("gmres runs with exact sub-solves; use fgmres for pcg_ict")
        if self.solver == "fgmres" and not self.mode.inexact:
            raise ConfigurationError("fgmres is paired with pcg_ict sub-solves")
        if self.solver == "chebyshev":
            if self.mode.inexact or set(self.kinds) != {PreconditionerKind.NEW}:
                raise ConfigurationError("chebyshev runs only with the NEW preconditioner, exact mode")
            for b in self.betas:
                chebyshev_interval(b)
        if self.rhs not in RHS_VARIANTS:
            raise ConfigurationError(f"unknown rhs variant {self.rhs!r}")
        if not 0 < self.tol < 1:
            raise ConfigurationError("tol must lie in (0, 1)")


@dataclass(eq=False)
class TableCell:
    beta: float
    level: int
    kind: str
    iterations: int
    wall_time: float
    converged: bool
    final_residual: float = float("nan")
    inner_iterations: int = 0
    error: str = ""

    def __eq__(self, other):
        if not isinstance(other, TableCell):
            return NotImplemented
        # NaN residuals (failed runs) compare equal to each other
        return all(a == b or (isinstance(a, float) and math.isnan(a) and math.isnan(b))
                   for a, b in zip(astuple(self), astuple(other)))

    def render(self) -> str:
        if not self.converged:
            return "--"
        return f"{self.iterations}({self.wall_time:.2f})"


def _solve(cfg: ExperimentConfig, problem: DiscreteProblem, kind, solvers):
    sys = SaddleSystem(problem)
    pc = build_preconditioner(kind, problem, solvers=solvers)
    scfg = SolverConfig(tol=cfg.tol, maxit_cap=cfg.maxit_cap)
    if cfg.solver == "chebyshev":
        x, rep = chebyshev(sys, pc, sys.rhs, chebyshev_interval(problem.beta), scfg)
    elif cfg.solver == "fgmres":
        x, rep = fgmres(sys, pc, sys.rhs, scfg)
    else:
        x, rep = gmres(sys, pc, sys.rhs, scfg)
    rep.inner_iteration_total = int(pc.stats["inner_iterations"])
    return x, rep


def run_cell(cfg: ExperimentConfig, problem: DiscreteProblem, kind, solvers=None) -> TableCell:
    kind = PreconditionerKind.parse(kind)
    try:
        x, rep = _solve(cfg, problem, kind, solvers)
    except Exception as err:  # recorded in the cell; the matrix keeps going
        log.warning("run failed (beta=%g, level=%d, %s): %s", problem.beta, problem.level,
                    kind.value, err)
        return TableCell(problem.beta, problem.level, kind.value, 0, 0.0, False, error=str(err))
    if cfg.residual_dir:
        d = Path(cfg.residual_dir)
        d.mkdir(parents=True, exist_ok=True)
        name = f"res_{cfg.solver}_{kind.value}_l{problem.level}_b{problem.beta:.0e}.csv"
        np.savetxt(d / name, np.column_stack([np.arange(len(rep.relative_residuals)),
                                              rep.relative_residuals]),
                   delimiter=",", header="iteration,relative_residual", comments="",
                   fmt=["%d", "%.17g"])
    return TableCell(problem.beta, problem.level, kind.value, rep.iterations, rep.wall_time,
                     rep.converged, rep.relative_residuals[-1], rep.inner_iteration_total)


def _run_group(cfg: ExperimentConfig, beta: float, level: int) -> list[TableCell]:
    try:
        problem = build_problem(level, beta, rhs=cfg.rhs)
        solvers = SubSolvers.build(problem, cfg.mode)
    except Exception as err:
        return [TableCell(beta, level, k.value, 0, 0.0, False, error=str(err)) for k in cfg.kinds]
    return [run_cell(cfg, problem, k, solvers) for k in cfg.kinds]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_matrix(cfg: ExperimentConfig, workers: int | None = None) -> list[TableCell]:
    """One cell per (beta, level, kind), ordered by beta, then level, then kind."""
    groups = [(b, l) for b in cfg.betas for l in cfg.levels]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda bl: _run_group(cfg, *bl), groups))
    else:
        results = [_run_group(cfg, b, l) for b, l in groups]
    return [cell for group in results for cell in group]


# ---------------------------------------------------------------------------
# reports

_CSV_FIELDS = [f.name for f in fields(TableCell)]


def render_csv(cells) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for c in cells:
        row = asdict(c)
        row["beta"] = repr(c.beta)
        row["wall_time"] = repr(c.wall_time)
        row["final_residual"] = repr(c.final_residual)
        w.writerow(row)
    return buf.getvalue()


def read_csv(source) -> list[TableCell]:
    text = Path(source).read_text() if not isinstance(source, io.StringIO) else source.getvalue()
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(TableCell(float(row["beta"]), int(row["level"]), row["kind"],
                             int(row["iterations"]), float(row["wall_time"]),
                             row["converged"] == "True", float(row["final_residual"]),
                             int(row["inner_iterations"]), row["error"]))
    return out


def _beta_label(beta: float) -> str:
    e = math.log10(beta)
    return f"1e{int(round(e))}" if abs(e - round(e)) < 1e-9 else f"{beta:g}"


def render_markdown(cells) -> str:
    """Rows grouped by beta then h, one column per preconditioner, cells ``IT(CPU)``."""
    cells = list(cells)
    kinds = list(dict.fromkeys(c.kind for c in cells))
    keys = list(dict.fromkeys((c.beta, c.level) for c in cells))
    lookup = {(c.beta, c.level, c.kind): c for c in cells}
    head = ["beta", "h"] + [k.upper() if k != "new" else "NEW" for k in kinds]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    prev = None
    for beta, level in keys:
        label = _beta_label(beta) if beta != prev else ""
        prev = beta
        row = [label, f"2^-{level}"]
        for k in kinds:
            c = lookup.get((beta, level, k))
            row.append(c.render() if c else "")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def render(cells, fmt: str = "markdown", path=None) -> str:
    cells = list(cells)
    if not cells:
        raise ValueError("nothing to render")
    text = render_csv(cells) if fmt == "csv" else render_markdown(cells)
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# verification

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        return "\n".join(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}  {c.detail}"
                         for c in self.checks)


def rayleigh_check(problem: DiscreteProblem, samples: int = 1000, seed: int = 0,
                   slack: float = 1e-12):
    """Rayleigh quotients of M and K over random unit vectors against the Q1 constants.

    Returns ``(ok_M, ok_K, (qM_min, qM_max), (qK_min, qK_max))``.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((problem.m, samples))
    X /= np.linalg.norm(X, axis=0)
    Ms, Ks = problem.M.to_scipy(), problem.K.to_scipy()
    qM = np.einsum("ij,ij->j", X, Ms @ X)
    qK = np.einsum("ij,ij->j", X, Ks @ X)
    h2 = problem.h ** 2
    ok_M = qM.min() >= h2 / 9 - slack and qM.max() <= h2 + slack
    ok_K = qK.min() >= 2 * math.pi ** 2 * h2 - slack and qK.max() <= 4 + slack
    return bool(ok_M), bool(ok_K), (qM.min(), qM.max()), (qK.min(), qK.max())


def precond_oracle_error(problem: DiscreteProblem, kind, samples: int = 10, seed: int = 0) -> float:
    """Worst relative ``||z - P^{-1} r|| / ||P^{-1} r||`` over random r.

    ``z`` comes from the block-substitution apply and ``P^{-1}`` from a dense
    inverse of the block matrix assembled straight from the definition.
    """
    rng = np.random.default_rng(seed)
    Pinv = np.linalg.inv(preconditioner_matrix(kind, problem))
    pc = build_preconditioner(kind, problem)
    worst = 0.0
    for _ in range(samples):
        r = rng.standard_normal(3 * problem.m)
        ref = Pinv @ r
        worst = max(worst, float(np.linalg.norm(pc.apply(r) - ref) / np.linalg.norm(ref)))
    return worst


def verify_all(levels=(2,), betas=(1e-2,), seed: int = 0, mass_perturbation: float = 0.0,
               kinds=BLOCK_KINDS) -> VerificationReport:
    """Spectral and oracle checks for each (level, beta); levels must be <= 4.

    ``mass_perturbation`` adds ``sigma * I`` to M before checking (negative control).
    """
    from .spectral import verify_bounds, verify_theorem1
    from .sparse import SparseMatrix

    rep = VerificationReport()
    for level in levels:
        if level > 4:
            raise ConfigurationError("verification is limited to levels <= 4")
        for beta in betas:
            p = build_problem(level, beta)
            if mass_perturbation:
                M = p.M.add_diagonal(mass_perturbation)
                p = DiscreteProblem(p.beta, p.grid, M, p.K, p.b, p.d)
            tag = f"level={level} beta={beta:g}"
            okM, okK, qM, qK = rayleigh_check(p, seed=seed)
            rep.add(f"rayleigh-mass {tag}", okM,
                    f"x'Mx/x'x in [{qM[0]:.4e}, {qM[1]:.4e}] vs [{p.h**2/9:.4e}, {p.h**2:.4e}]")
            rep.add(f"rayleigh-stiffness {tag}", okK,
                    f"x'Kx/x'x in [{qK[0]:.4e}, {qK[1]:.4e}]")
            t1 = verify_theorem1(p)
            rep.add(f"unit-multiplicity {tag}",
                    t1.unit_count == 2 * p.m and t1.rank_deficit_matrix_rank == p.m,
                    f"unit={t1.unit_count} (2m={2 * p.m}), rank(P^-1A - I)={t1.rank_deficit_matrix_rank}")
            rep.add(f"eigenpairs {tag}",
                    t1.eigvec_residual <= 1e-8 and t1.unit_eigvec_residual <= 1e-9,
                    f"nonunit res={t1.eigvec_residual:.2e}, unit res={t1.unit_eigvec_residual:.2e}")
            ok_b = verify_bounds(p, t1.nonunit_values)
            rep.add(f"eigenvalue-bounds {tag}", ok_b,
                    f"[{t1.nonunit_values.min():.6e}, {t1.nonunit_values.max():.6e}] within "
                    f"[{t1.bounds.lower:.6e}, {t1.bounds.upper:.6e}]")
            worst = max(precond_oracle_error(p, k, seed=seed) for k in kinds)
            rep.add(f"preconditioner-oracle {tag}", worst <= 1e-11, f"max rel err={worst:.2e}")
    return rep
