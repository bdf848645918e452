import numpy as np
import pytest
import scipy.sparse as sps

from ricsolve.errors import MatrixMarketError
from ricsolve.problem_io import (
    AREInstance,
    gen_grcar_problem,
    gen_laplacian_problem,
    gen_random_problem,
    gen_toeplitz_problem,
    load_dense_text,
    load_instance,
    load_matrix_market,
    save_matrix_market,
)


def _write(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_mm_identity(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 1\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), np.eye(2))


def test_mm_duplicates_are_summed(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 2 3\n1 2 4\n")
    M = load_matrix_market(p)
    assert M[0, 1] == 7 and M.nnz == 1


def test_mm_symmetric_expanded(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[2, 1], [1, 2]])


def test_mm_skew_and_array(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 5\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[0, -5], [5, 0]])
    p = _write(tmp_path, "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n", "a.mtx")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[1, 3], [2, 4]])


def test_mm_pattern_and_integer(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n")
    assert load_matrix_market(p)[0, 1] == 1
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 -3\n", "i.mtx")
    assert load_matrix_market(p)[0, 0] == -3


@pytest.mark.parametrize("text,line", [
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n", None),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
    ("not a header\n", 1),
])
def test_mm_errors_carry_line_numbers(tmp_path, text, line):
    p = _write(tmp_path, text)
    with pytest.raises(MatrixMarketError) as exc:
        load_matrix_market(p)
    if line is not None:
        assert f"line {line}" in str(exc.value)


def test_mm_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_matrix_market(tmp_path / "absent.mtx")


def test_mm_roundtrip(tmp_path):
    M = sps.random(7, 7, density=0.3, random_state=3, format="csr")
    save_matrix_market(tmp_path / "r.mtx", M)
    np.testing.assert_allclose(load_matrix_market(tmp_path / "r.mtx").toarray(), M.toarray())


def test_load_instance_and_dense_text(tmp_path):
    save_matrix_market(tmp_path / "A.mtx", sps.csr_matrix(-np.eye(3)))
    (tmp_path / "B.txt").write_text("1, 0\n0, 1\n1, 1\n")
    (tmp_path / "C.txt").write_text("1 2 3\n")
    inst = load_instance(tmp_path / "A.mtx", tmp_path / "B.txt", tmp_path / "C.txt")
    assert (inst.n, inst.q, inst.p) == (3, 2, 1)
    assert load_dense_text(tmp_path / "C.txt").shape == (1, 3)


def test_instance_dimension_checks():
    with pytest.raises(ValueError):
        AREInstance(sps.eye(4, format="csr"), np.ones((4, 1)), np.ones((1, 3)))
    with pytest.warns(UserWarning, match="not small"):
        AREInstance(sps.eye(4, format="csr"), np.ones((4, 1)), np.ones((1, 4)))


def test_toeplitz_small_case():
    inst = gen_toeplitz_problem(6, 1.0)
    A = inst.A.toarray()
    np.testing.assert_allclose(A[0], [-2.8, -1, -1, -1, 0, 0])
    assert A[1, 0] == 1.5 and A[2, 0] == 1.0
    np.testing.assert_array_equal(inst.C, [[1, -2, 1, -2, 1, -2]])
    lower = max(i - j for i, j in zip(*np.nonzero(A)))
    upper = max(j - i for i, j in zip(*np.nonzero(A)))
    assert (lower, upper) == (2, 3)


def test_toeplitz_example_scale():
    inst = gen_toeplitz_problem(700, 5e-3)
    assert np.all(inst.A.diagonal() == -2.8)
    assert np.linalg.norm(inst.B) == pytest.approx(5e-3 * np.sqrt(700), rel=1e-14)
    with pytest.raises(ValueError):
        gen_toeplitz_problem(5, 1.0)


def test_laplacian_small_case():
    A = gen_laplacian_problem(2, 1.0).A.toarray()
    np.testing.assert_array_equal(A, [[-4, 1, 1, 0], [1, -4, 0, 1], [1, 0, -4, 1], [0, 1, 1, -4]])


def test_laplacian_negative_definite():
    inst = gen_laplacian_problem(30, 10.0)
    A = inst.A.toarray()
    assert inst.n == 900
    assert np.array_equal(A, A.T)
    x = np.random.default_rng(0).standard_normal((900, 20))
    assert np.all(np.einsum("ij,ij->j", x, A @ x) < 0)


def test_grcar_small_case_and_determinism():
    inst = gen_grcar_problem(5, 3, seed=11)
    assert inst.A[0, 0] == pytest.approx(-1.3125)
    assert np.linalg.norm(inst.B, 2) == pytest.approx(5e-2, rel=1e-13)
    assert np.linalg.norm(inst.C) == pytest.approx(1.0)
    again = gen_grcar_problem(5, 3, seed=11)
    assert np.array_equal(inst.B, again.B)
    A0 = -(inst.A.toarray() + np.eye(5)) * 3.2
    np.testing.assert_allclose(A0[0], [1, 1, 1, 1, 0], atol=1e-14)
    np.testing.assert_allclose(A0[1], [-1, 1, 1, 1, 1], atol=1e-14)


def test_random_problem_is_passive():
    inst = gen_random_problem(30, 2, 2, seed=4)
    A = inst.A.toarray()
    assert np.linalg.eigvalsh((A + A.T) / 2).max() == pytest.approx(-0.5)
