import numpy as np
import pytest

from kktprec.fem import build_problem
from kktprec.precond import (BLOCK_KINDS, PreconditionerKind, SubSolveMode, SubSolvers,
                             build_preconditioner, preconditioner_matrix)
from kktprec.saddle import SaddleSystem, materialize_A
from kktprec.sparse import DimensionError


@pytest.mark.parametrize("kind", BLOCK_KINDS, ids=lambda k: k.value)
@pytest.mark.parametrize("beta", [1e-1, 1e-6])
def test_apply_matches_dense_inverse(kind, beta):
    p = build_problem(2, beta)
    Pinv = np.linalg.inv(preconditioner_matrix(kind, p))
    pc = build_preconditioner(kind, p)
    rng = np.random.default_rng(7)
    for _ in range(5):
        r = rng.standard_normal(3 * p.m)
        ref = Pinv @ r
        assert np.linalg.norm(pc.apply(r) - ref) <= 1e-11 * np.linalg.norm(ref)


def test_new_differs_from_A_in_first_block_row_only(problem_l2):
    # A - P vanishes outside the first block row, so P (P^{-1} A - I) does too
    p = problem_l2
    A = materialize_A(SaddleSystem(p)).to_dense()
    P = preconditioner_matrix("new", p)
    pc = build_preconditioner("new", p)
    m = p.m
    T = np.column_stack([pc.apply(A[:, j]) for j in range(3 * m)])
    R = P @ (T - np.eye(3 * m))
    assert np.abs(R[m:]).max() <= 1e-12 * np.abs(A).max()
    assert np.allclose(R[:m], (A - P)[:m], atol=1e-12)


def test_identity_kind_copies(problem_l2):
    pc = build_preconditioner(PreconditionerKind.IDENTITY, problem_l2)
    r = np.arange(27.0)
    z = pc.apply(r)
    assert np.array_equal(z, r) and z is not r


def test_parse():
    assert PreconditionerKind.parse("NEW") is PreconditionerKind.NEW
    assert PreconditionerKind.parse(" bct ") is PreconditionerKind.BCT
    assert len(BLOCK_KINDS) == 12
    with pytest.raises(ValueError, match="unknown preconditioner"):
        PreconditionerKind.parse("ilu")


def test_apply_rejects_wrong_length(problem_l2):
    with pytest.raises(DimensionError):
        build_preconditioner("new", problem_l2).apply(np.ones(10))


def test_new_uses_three_subsolves(problem_l3):
    pc = build_preconditioner("new", problem_l3)
    pc.apply(np.ones(3 * problem_l3.m))
    assert pc.stats["M"] == pc.stats["K"] == pc.stats["KT"] == 1
    assert pc.stats["applications"] == 1


def test_inexact_mode_close_to_exact(problem_l3):
    r = np.random.default_rng(3).standard_normal(3 * problem_l3.m)
    exact = build_preconditioner("new", problem_l3).apply(r)
    loose = build_preconditioner("new", problem_l3, SubSolveMode.pcg_ict()).apply(r)
    tight = build_preconditioner("new", problem_l3,
                                 SubSolveMode.pcg_ict(inner_tol=1e-10, inner_maxit=200))
    err_loose = np.linalg.norm(loose - exact) / np.linalg.norm(exact)
    err_tight = np.linalg.norm(tight.apply(r) - exact) / np.linalg.norm(exact)
    assert err_tight < 1e-7 < err_loose < 0.1
    assert tight.is_variable and tight.stats["inner_iterations"] > 0


def test_sub_solve_mode_defaults():
    mode = SubSolveMode.pcg_ict()
    assert mode.inexact and mode.name == "pcg_ict"
    assert mode.cap(9) == 9 and mode.cap(961) == 20
    assert SubSolveMode.exact().name == "exact"


def test_shared_solvers(problem_l2):
    solvers = SubSolvers.build(problem_l2)
    a = build_preconditioner("d", problem_l2, solvers=solvers)
    b = build_preconditioner("c", problem_l2, solvers=solvers)
    assert a.solvers is b.solvers
    with pytest.raises(ValueError):
        build_preconditioner("d", problem_l2, mode=SubSolveMode.pcg_ict(), solvers=solvers)


def test_dense_matrix_size_guard():
    with pytest.raises(ValueError):
        preconditioner_matrix("new", build_problem(6, 1e-2))
