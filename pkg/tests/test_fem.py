import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kktprec.fem import (RHS_VARIANTS, Grid, assemble, assemble_full, assemble_rhs, build_problem,
                         element_matrices, load_vector, target_state)
from kktprec.sparse import band_cholesky


def _q1_oracle(h):
    """Element matrices by 3x3 Gauss-Legendre on the physical h x h square."""
    pts, wts = np.polynomial.legendre.leggauss(3)
    xs, ws = 0.5 * h * (pts + 1), 0.5 * h * wts
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    Ke, Me = np.zeros((4, 4)), np.zeros((4, 4))
    for x, wx in zip(xs, ws):
        for y, wy in zip(xs, ws):
            s, t = x / h, y / h
            phi, grad = [], []
            for cx, cy in corners:
                fx = s if cx else 1 - s
                fy = t if cy else 1 - t
                dfx = (1 if cx else -1) / h
                dfy = (1 if cy else -1) / h
                phi.append(fx * fy)
                grad.append((dfx * fy, fx * dfy))
            phi, grad = np.array(phi), np.array(grad)
            Me += wx * wy * np.outer(phi, phi)
            Ke += wx * wy * grad @ grad.T
    return Ke, Me


@pytest.mark.parametrize("xy, val", [((0.0, 0.0), 1.0), ((0.25, 0.25), 0.0625),
                                     ((0.75, 0.3), 0.0), ((0.5, 0.5), 0.0), ((0.1, 0.9), 0.0)])
def test_target_state_values(xy, val):
    assert target_state(*xy) == pytest.approx(val, abs=1e-15)


@given(st.floats(0, 1), st.floats(0, 1))
def test_target_state_range(x, y):
    v = target_state(x, y)
    assert 0.0 <= v <= 1.0
    if x > 0.5 or y > 0.5:
        assert v == 0.0


@pytest.mark.parametrize("h", [1.0, 0.25, 2.0 ** -5])
def test_element_matrices_against_quadrature(h):
    Ke, Me = element_matrices(h)
    Ko, Mo = _q1_oracle(h)
    assert np.allclose(Ke, Ko, atol=1e-14)
    assert np.allclose(Me, Mo, atol=1e-14 * h * h)
    assert np.allclose(Ke.sum(axis=1), 0.0, atol=1e-15)
    assert Me.sum() == pytest.approx(h * h, rel=1e-14)
    assert np.array_equal(Ke, Ke.T) and np.array_equal(Me, Me.T)


def test_element_matrices_reject_bad_h():
    with pytest.raises(ValueError):
        element_matrices(0.0)


def test_grid_counts_and_ordering():
    g = Grid(3)
    assert g.h == 0.125 and g.interior_count == 49
    c = g.interior_coords()
    assert np.allclose(c[0], [g.h, g.h]) and np.allclose(c[1], [2 * g.h, g.h])
    assert np.allclose(c[-1], [1 - g.h, 1 - g.h])
    with pytest.raises(ValueError):
        Grid(1)


def test_level2_sizes_and_stencil():
    M, K = assemble(2)
    assert M.shape == K.shape == (9, 9)
    # center node couples to all 9 nodes of its stencil
    assert np.count_nonzero(M.to_dense()[4]) == 9
    assert np.count_nonzero(K.to_dense()[4]) == 9
    assert np.count_nonzero(K.to_dense()[0]) == 4


@pytest.mark.parametrize("level", [2, 3, 4, 5])
def test_exact_symmetry(level):
    for A in assemble(level):
        D = A.to_scipy()
        assert (D - D.T).count_nonzero() == 0


def test_interior_mass_rows_sum_to_h2():
    level = 4
    M, _ = assemble(level)
    n = 2 ** level - 1
    sums = M.to_dense().sum(axis=1).reshape(n, n)
    assert np.allclose(sums[1:-1, 1:-1], 2.0 ** (-2 * level), rtol=1e-14)


@pytest.mark.parametrize("level", [3, 4])
def test_mass_spectrum_within_q1_constants(level):
    M, _ = assemble(level)
    w = np.linalg.eigvalsh(M.to_dense())
    h2 = 4.0 ** -level
    assert w.min() >= h2 / 9 and w.max() <= h2


def _stiffness_closed_form(level):
    # K = K1 (x) M1 + M1 (x) K1 with 1-D Dirichlet Q1 matrices
    h = 2.0 ** -level
    theta = np.arange(1, 2 ** level) * math.pi * h
    k1 = (2 - 2 * np.cos(theta)) / h
    m1 = h * (4 + 2 * np.cos(theta)) / 6
    return np.sort((np.outer(k1, m1) + np.outer(m1, k1)).ravel())


@pytest.mark.parametrize("level", [2, 3, 4])
def test_stiffness_spectrum_closed_form(level):
    _, K = assemble(level)
    w = np.linalg.eigvalsh(K.to_dense())
    assert np.allclose(w, _stiffness_closed_form(level), rtol=1e-12, atol=1e-13)
    assert w.max() <= 4.0


def test_stiffness_lower_constant_is_asymptotic():
    # lambda_min(K) / (2 pi^2 h^2) approaches 1 from below as h -> 0
    ratios = [_stiffness_closed_form(l)[0] / (2 * math.pi ** 2 * 4.0 ** -l) for l in range(2, 8)]
    assert all(r < 1 for r in ratios)
    assert all(a < b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] > 0.999


@pytest.mark.parametrize("level", [2, 3, 4, 5, 6, 7])
def test_matrices_are_spd(level):
    for A in assemble(level):
        band_cholesky(A)


def test_assemble_level_range():
    with pytest.raises(ValueError):
        assemble(1)
    with pytest.raises(ValueError):
        assemble(9)


def test_load_vector_integrates_target():
    # ∫_0^{1/2} (2x-1)^2 dx squared = (1/6)^2
    for level in (2, 3, 5):
        assert load_vector(Grid(level)).sum() == pytest.approx(1 / 36, rel=1e-13)


def test_load_vector_quadrature_is_exact():
    g = Grid(3)
    assert np.allclose(load_vector(g, quad_order=2), load_vector(g, quad_order=5), atol=1e-16)


def test_zero_data_gives_zero_rhs():
    assert np.all(load_vector(Grid(2), func=lambda x, y: 0 * x) == 0)


def test_d_sparsity_level2():
    g = Grid(2)
    Mf, Kf = assemble_full(g)
    _, d = assemble_rhs(g, Mf, Kf)
    # boundary nodes with nonzero data: x or y = 0 with the other coordinate < 1/2
    # interior nodes touching them: (1,1), (2,1), (1,2) in grid indices
    expected = np.zeros((3, 3), bool)
    expected[0, 0] = expected[0, 1] = expected[1, 0] = True
    assert np.array_equal(d.reshape(3, 3) != 0, expected)


def test_rhs_formula_against_dense_oracle():
    g = Grid(3)
    Mf, Kf = assemble_full(g)
    mask = g.interior_mask()
    xy = g.node_coords()
    u = target_state(xy[:, 0], xy[:, 1])
    Md, Kd = Mf.to_dense(), Kf.to_dense()
    b, d = assemble_rhs(g, Mf, Kf)
    assert np.allclose(d, -(Kd[mask][:, ~mask] @ u[~mask]), atol=1e-15)
    assert np.allclose(b, load_vector(g)[mask] - Md[mask][:, ~mask] @ u[~mask], atol=1e-15)
    b_proj, _ = assemble_rhs(g, Mf, Kf, variant="projection")
    assert np.allclose(b_proj, load_vector(g)[mask])
    b_int, _ = assemble_rhs(g, Mf, Kf, variant="interpolant")
    assert np.allclose(b_int, (Md @ u)[mask])
    with pytest.raises(ValueError):
        assemble_rhs(g, Mf, Kf, variant="other")


def test_build_problem():
    p = build_problem(3, 1e-3)
    assert p.m == 49 and p.h == 0.125 and p.level == 3 and p.beta == 1e-3
    assert p.b.shape == p.d.shape == (49,)
    q = p.with_beta(0.5)
    assert q.beta == 0.5 and q.M is p.M
    assert set(RHS_VARIANTS) == {"galerkin", "projection", "interpolant"}
    with pytest.raises(ValueError):
        build_problem(3, 0.0)
