import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gibbsgame.errors import ContractViolation
from gibbsgame.game import (PayoffMatrix, as_simplex, duality_gap, gibbs_distribution, load_game,
                            mat_vec, mat_vec_T, random_game, save_game)

PENNIES = [[1.0, -1.0], [-1.0, 1.0]]


def test_gap_zero_matrix():
    assert duality_gap([[0.0]], [1.0], [1.0]).gap == 0.0


def test_gap_matching_pennies_uniform():
    assert abs(duality_gap(PENNIES, [0.5, 0.5], [0.5, 0.5]).gap) <= 1e-12


def test_gap_matching_pennies_pure():
    rep = duality_gap(PENNIES, [1.0, 0.0], [1.0, 0.0])
    # column best response to row 1 earns 1; row best response to column 1 earns -1
    assert rep.best_response_value_max == 1.0
    assert rep.best_response_value_min == -1.0
    assert rep.gap == 2.0


def test_gap_dimension_mismatch():
    with pytest.raises(ContractViolation):
        duality_gap(PENNIES, [1.0], [0.5, 0.5])


def test_gap_analytic_2x2_equilibrium():
    # [[a, b], [c, d]] without saddle point: u* = (d-c, a-b)/D, v* = (d-b, a-c)/D
    a, b, c, d = 0.8, -0.4, -0.6, 0.3
    D = a - b - c + d
    u = np.array([d - c, a - b]) / D
    v = np.array([d - b, a - c]) / D
    assert abs(duality_gap([[a, b], [c, d]], u, v).gap) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_gap_nonnegative(m, n, seed):
    rng = np.random.default_rng(seed)
    A = random_game(m, n, "uniform", seed)
    u = rng.dirichlet(np.ones(m))
    v = rng.dirichlet(np.ones(n))
    assert duality_gap(A, u, v).gap >= -1e-9


def test_gibbs_uniform_and_logs():
    np.testing.assert_allclose(gibbs_distribution([0, 0, 0]), [1 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(gibbs_distribution(np.log([1, 2, 3])), [1 / 6, 1 / 3, 1 / 2], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_gibbs_shift_invariance(v, c):
    p = gibbs_distribution(v)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.max(np.abs(p - gibbs_distribution(v + c))) <= 1e-12


def test_gibbs_rejects_nonfinite():
    with pytest.raises(ContractViolation):
        gibbs_distribution([0.0, np.inf])
    with pytest.raises(ContractViolation):
        gibbs_distribution([np.nan])


def test_gibbs_no_overflow():
    p = gibbs_distribution([1000.0, 999.0])
    assert np.all(np.isfinite(p))


def test_mat_vec_examples():
    np.testing.assert_array_equal(mat_vec_T([[1, 0], [0, 1]], [2, 3]), [2, 3])
    np.testing.assert_array_equal(mat_vec_T(PENNIES, [1, 1]), [0, 0])


def test_mat_vec_against_loops():
    rng = np.random.default_rng(7)
    A = random_game(8, 8, "uniform", 3)
    x = rng.normal(size=8)
    y = rng.normal(size=8)
    ref_T = [sum(A.A[i, j] * x[i] for i in range(8)) for j in range(8)]
    ref = [sum(A.A[i, j] * y[j] for j in range(8)) for i in range(8)]
    assert np.max(np.abs(mat_vec_T(A, x) - ref_T)) <= 1e-12
    assert np.max(np.abs(mat_vec(A, y) - ref)) <= 1e-12


def test_mat_vec_dimension_mismatch():
    with pytest.raises(ContractViolation):
        mat_vec(random_game(3, 4, "sign", 0), np.ones(3))
    with pytest.raises(ContractViolation):
        mat_vec_T(random_game(3, 4, "sign", 0), np.ones(4))


def test_random_game_kinds():
    assert random_game(5, 7, "sign", 11) == random_game(5, 7, "sign", 11)
    assert np.all(np.abs(random_game(10, 10, "sign", 1).A) == 1.0)
    assert abs(random_game(100, 100, "uniform", 2).A.mean()) <= 0.05
    D = random_game(6, 6, "diag_dominant", 0).A
    assert np.all(np.diag(D) == 1.0) and np.all(D[~np.eye(6, dtype=bool)] <= 0)
    with pytest.raises(ContractViolation):
        random_game(3, 3, "cauchy", 0)
    with pytest.raises(ContractViolation):
        random_game(0, 3, "sign", 0)


def test_payoff_matrix_validation():
    with pytest.raises(ContractViolation):
        PayoffMatrix([[1.5]])
    with pytest.raises(ContractViolation):
        PayoffMatrix(np.zeros((0, 3)))
    A = PayoffMatrix([[0.5, -1.0]])
    assert (A.m, A.n) == (1, 2)
    with pytest.raises(ValueError):
        A.A[0, 0] = 0.0


def test_simplex_validation():
    with pytest.raises(ContractViolation):
        as_simplex([0.5, 0.6])
    with pytest.raises(ContractViolation):
        as_simplex([1.5, -0.5])
    as_simplex([0.5, 0.5 + 5e-10])


def test_game_file_round_trip(tmp_path):
    A = random_game(4, 3, "uniform", 5)
    p = tmp_path / "g.txt"
    save_game(A, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "4 3" and len(lines) == 5
    assert load_game(p) == A


def test_game_file_rejects_out_of_range(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2\n0.5 1.2\n")
    with pytest.raises(ContractViolation):
        load_game(p)
    p.write_text("2 2\n0.5 0.1\n")
    with pytest.raises(ContractViolation):
        load_game(p)
