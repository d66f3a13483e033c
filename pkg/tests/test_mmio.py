import numpy as np

from kktprec.fem import assemble
from kktprec.mmio import (is_symmetric, read_matrix_market, read_vector, write_matrix_market,
                          write_vector)
from kktprec.sparse import SparseMatrix


def test_symmetric_round_trip(tmp_path):
    M, K = assemble(3)
    for A in (M, K):
        path = write_matrix_market(A, tmp_path / "A")
        assert path.suffix == ".mtx"
        assert "symmetric" in path.read_text().splitlines()[0]
        B = read_matrix_market(path)
        assert np.array_equal(A.to_dense(), B.to_dense())


def test_general_round_trip(tmp_path):
    A = SparseMatrix.from_dense([[1.0, 2.0, 0.0], [0.0, 0.0, -3.5]])
    assert not is_symmetric(A)
    path = write_matrix_market(A, tmp_path / "g.mtx")
    assert "general" in path.read_text().splitlines()[0]
    assert np.array_equal(read_matrix_market(path).to_dense(), A.to_dense())


def test_vector_round_trip(tmp_path):
    v = np.random.default_rng(0).standard_normal(17)
    assert np.array_equal(read_vector(write_vector(v, tmp_path / "v.txt")), v)
