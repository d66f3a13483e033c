import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kktprec.fem import build_problem
from kktprec.saddle import SaddleSystem, materialize_A
from kktprec.spectral import (SpectralBounds, jacobi_eigh, nonunit_spectrum, numerical_rank,
                              preconditioned_matrix, read_spectrum_dump, reduced_matrix,
                              spectrum, spectrum_dump, verify_bounds, verify_theorem1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 14).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False))))
def test_jacobi_against_lapack(a):
    S = a + a.T
    w, V = jacobi_eigh(S)
    ref = np.linalg.eigvalsh(S)
    scale = max(np.abs(ref).max(), 1.0)
    assert np.allclose(w, ref, atol=1e-12 * scale)
    assert np.allclose(V.T @ V, np.eye(len(w)), atol=1e-12)
    assert np.linalg.norm(S @ V - V * w) <= 1e-12 * scale * len(w)


def test_jacobi_diagonal_and_zero():
    w, V = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert np.array_equal(w, [-1.0, 2.0, 3.0])
    w, _ = jacobi_eigh(np.zeros((3, 3)))
    assert np.all(w == 0)
    with pytest.raises(ValueError):
        jacobi_eigh(np.ones((2, 3)))


def test_jacobi_clustered_spectrum():
    rng = np.random.default_rng(4)
    Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    lam = np.concatenate([np.ones(20), 1 + 1e-9 * np.arange(10)])
    w, _ = jacobi_eigh(Q @ np.diag(lam) @ Q.T)
    assert np.allclose(w, np.sort(lam), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 8), st.integers(0, 10 ** 6))
def test_numerical_rank_against_svd(m, n, r, seed):
    rng = np.random.default_rng(seed)
    r = min(r, m, n)
    A = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    assert numerical_rank(A) == np.linalg.matrix_rank(A) == r


def test_bounds_formula():
    b = SpectralBounds(h=0.25, beta=0.01)
    assert b.lower == pytest.approx(0.02 + 0.25 ** 4 / 1296)
    assert b.upper == pytest.approx(0.02 + 1 / (4 * math.pi ** 4))
    assert b.contains([b.lower, b.upper]) and not b.contains([b.upper + 1e-9])


@pytest.mark.parametrize("level", [2, 3])
def test_reduced_matrix_symmetric_before_symmetrizing(level):
    _, _, asym = reduced_matrix(build_problem(level, 1e-2))
    assert asym < 1e-12


@pytest.mark.parametrize("level, beta", [(2, 1e-2), (3, 1e-4)])
def test_nonunit_values_match_lapack_on_full_matrix(level, beta):
    p = build_problem(level, beta)
    T = preconditioned_matrix(p)
    ev = np.sort(np.linalg.eigvals(T).real)
    ours = nonunit_spectrum(p)
    non_unit = ev[np.abs(ev - 1) > 1e-6]
    assert np.allclose(non_unit, ours, rtol=1e-8)
    assert np.sum(np.abs(ev - 1) <= 1e-6) == 2 * p.m


@pytest.mark.parametrize("level", [2, 3])
@pytest.mark.parametrize("beta", [1e-2, 1e-4])
def test_unit_eigenvalue_certificate(level, beta):
    p = build_problem(level, beta)
    rep = verify_theorem1(p)
    assert rep.unit_count == 2 * p.m
    assert rep.rank_deficit_matrix_rank == p.m
    assert rep.eigvec_residual < 1e-10 and rep.unit_eigvec_residual < 1e-12
    assert rep.all_within and rep.n == 3 * p.m


@pytest.mark.parametrize("beta", [1e-1, 1e-4, 1e-8])
def test_bounds_hold_level3(beta):
    p = build_problem(3, beta)
    vals = nonunit_spectrum(p)
    assert verify_bounds(p, vals)
    assert np.all(vals > 2 * beta) and np.all(vals <= 1)


def test_bounds_fail_with_wrong_values(problem_l2):
    assert not verify_bounds(problem_l2, [2 * problem_l2.beta])


def test_spectrum_dump_round_trip(tmp_path, problem_l2):
    for which in ("original", "preconditioned"):
        path = spectrum_dump(problem_l2, which, tmp_path / f"{which}.txt")
        vals = read_spectrum_dump(path)
        assert np.allclose(vals, spectrum(problem_l2, which), rtol=0, atol=0)
        assert path.read_text().startswith("# level=2")
    orig = read_spectrum_dump(tmp_path / "original.txt")
    ref = np.linalg.eigvalsh(materialize_A(SaddleSystem(problem_l2)).to_dense())
    assert np.allclose(orig, ref, atol=1e-13)
    with pytest.raises(ValueError):
        spectrum(problem_l2, "other")


def test_level_guards():
    with pytest.raises(ValueError):
        verify_theorem1(build_problem(5, 1e-2))
