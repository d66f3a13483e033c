import numpy as np
import pytest

from kktprec.saddle import SaddleSystem, apply_A, materialize_A, true_residual
from kktprec.sparse import DimensionError


def test_operator_matches_dense_blocks(problem_l3):
    p = problem_l3
    sys = SaddleSystem(p)
    M, K = p.M.to_dense(), p.K.to_dense()
    Z = np.zeros_like(M)
    A = np.block([[2 * p.beta * M, Z, -M], [Z, M, K.T], [-M, K, Z]])
    v = np.random.default_rng(1).standard_normal(sys.n)
    assert np.allclose(apply_A(sys, v), A @ v, rtol=1e-14, atol=1e-15)
    assert np.allclose(materialize_A(sys).to_dense(), A)


def test_symmetric_indefinite(problem_l2):
    A = materialize_A(SaddleSystem(problem_l2)).to_dense()
    assert np.array_equal(A, A.T)
    w = np.linalg.eigvalsh(A)
    assert w.min() < 0 < w.max()


def test_rhs_layout(problem_l2):
    sys = SaddleSystem(problem_l2)
    f, u, lam = sys.split(sys.rhs)
    assert np.all(f == 0)
    assert np.array_equal(u, problem_l2.b) and np.array_equal(lam, problem_l2.d)


def test_split_rejects_wrong_length(problem_l2):
    with pytest.raises(DimensionError):
        SaddleSystem(problem_l2).split(np.zeros(5))


def test_true_residual_of_direct_solution(problem_l3):
    sys = SaddleSystem(problem_l3)
    x = np.linalg.solve(materialize_A(sys).to_dense(), sys.rhs)
    assert true_residual(sys, x) <= 1e-12 * np.linalg.norm(sys.rhs)
    assert true_residual(sys, np.zeros(sys.n)) == pytest.approx(np.linalg.norm(sys.rhs))
