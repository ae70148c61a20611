import math

import numpy as np
import pytest

from signmuon.harness import NoiseModel, matrix_quadratic
from signmuon.linalg import polar_svd
from signmuon.verify import (
    SUITES,
    deterministic_muon_average,
    estimate_sign_error,
    gradient_sign_hp,
    noise_floor_scan,
    ns_test_matrix,
    run_suite,
    verify_deterministic_muon,
    verify_descent_lemma,
    verify_inexact_muon,
    verify_ns_error,
    verify_polar_dual,
)

PHI_MINUS_1 = 0.5 * math.erfc(1 / math.sqrt(2))


def test_gaussian_oracle_value():
    assert PHI_MINUS_1 == pytest.approx(0.158655, abs=5e-7)


def test_sign_error_single_worker_matches_gaussian_tail():
    r = estimate_sign_error(1.0, 1.0, 1, 1, 100_000, seed=3)
    assert abs(r.estimate - PHI_MINUS_1) <= 3 * r.standard_error
    assert r.passed and r.analytic_bound == 1.0


def test_sign_error_nine_workers_matches_binomial_tail():
    p = PHI_MINUS_1
    tail = sum(math.comb(9, k) * p**k * (1 - p) ** (9 - k) for k in range(5, 10))
    r = estimate_sign_error(1.0, 1.0, 1, 9, 100_000, seed=4)
    assert abs(r.estimate - tail) <= 3 * r.standard_error
    assert r.analytic_bound == pytest.approx(2 / 3)


def test_sign_error_noiseless_is_exactly_zero():
    r = estimate_sign_error(-0.3, 0.0, 1, 5, 10_000)
    assert (r.estimate, r.analytic_bound, r.passed) == (0.0, 0.0, True)


def test_sign_error_preconditions():
    with pytest.raises(ValueError):
        estimate_sign_error(1.0, 1.0, trials=100)
    with pytest.raises(ValueError):
        estimate_sign_error(0.0, 1.0)


def test_sign_error_ties_count_as_errors_under_zero_policy():
    zero = estimate_sign_error(1.0, 1.0, 1, 2, 50_000, seed=1, tie_policy="zero")
    plus = estimate_sign_error(1.0, 1.0, 1, 2, 50_000, seed=1, tie_policy="plus_one")
    # M = 2: an error needs both wrong (p^2), a tie needs exactly one wrong (2p(1-p))
    p = PHI_MINUS_1
    assert abs(plus.estimate - p**2) <= 3 * plus.standard_error
    assert abs(zero.estimate - (p**2 + 2 * p * (1 - p))) <= 3 * zero.standard_error


def test_sign_error_monotone_in_batch():
    est = [estimate_sign_error(0.5, 1.0, nb, 1, 100_000, seed=nb) for nb in (1, 4, 16)]
    for a, b in zip(est, est[1:]):
        assert b.estimate <= a.estimate + 2 * math.hypot(a.standard_error, b.standard_error)


# --- descent lemma and geometry ----------------------------------------------------------

def test_descent_lemma_random_triples():
    r = verify_descent_lemma(matrix_quadratic(6, 4, seed=0), 10_000, seed=0)
    assert r.passed and r.details["violations"] == 0


def test_descent_lemma_zero_direction_is_equality():
    task = matrix_quadratic(6, 4, seed=0)
    W, eta = task.W0, 0.7
    lhs = task.loss(W - eta * np.zeros_like(W))
    assert lhs == task.loss(W)


def test_descent_lemma_polar_direction_decreases():
    task = matrix_quadratic(6, 4, seed=1)
    W = task.W0
    D = polar_svd(task.grad(W))
    for eta in (1e-3, 1e-2):
        new = task.loss(W - eta * D)
        assert new < task.loss(W)
        assert new <= task.loss(W) - eta * np.sum(task.grad(W) * D) + 0.5 * task.L_star * eta**2 + 1e-9


@pytest.mark.parametrize("K,bound", [(3, 0.43047), (5, 0.03434)])
def test_ns_bound_values(K, bound):
    r = verify_ns_error(0.9, K, trials=10, seed=0)
    assert r.bound == pytest.approx(bound, abs=5e-6)
    assert r.passed


def test_ns_orthogonal_input_has_zero_error():
    r = verify_ns_error(0.0, 3, trials=10, seed=2)
    assert r.passed and r.measured <= 1e-12


def test_ns_test_matrix_premise(rng):
    X = ns_test_matrix(rng, 0.9, 7, 4)
    s = np.linalg.svd(X, compute_uv=False)
    assert s.max() == pytest.approx(1.0) and s.min() == pytest.approx(math.sqrt(0.1))


def test_polar_dual_reports_pass():
    assert all(r.passed for r in verify_polar_dual(10, 50, seed=1))


# --- convergence ---------------------------------------------------------------------------------

def test_deterministic_muon_meets_proved_bound():
    reports = verify_deterministic_muon(matrix_quadratic(8, 8, seed=0), 400)
    assert all(r.passed for r in reports)


def test_deterministic_muon_l1_stationarity_within_rate():
    # the l1 proxy (not the nuclear norm) stays below sqrt(L gap / T)
    task = matrix_quadratic(8, 8, seed=0)
    l1 = verify_deterministic_muon(task, 400)[1]
    assert l1.measured <= math.sqrt(task.L_star * task.loss(task.W0) / 400) + 1e-6


def test_deterministic_average_exceeds_sqrt2_free_rate_on_quadratic():
    task = matrix_quadratic(8, 8, seed=0)
    avg, eta = deterministic_muon_average(task, 400)
    gap = task.loss(task.W0)
    assert avg > math.sqrt(task.L_star * gap / 400)
    assert avg <= math.sqrt(2 * task.L_star * gap / 400) + 1e-6


def test_inexact_muon():
    task = matrix_quadratic(8, 8, seed=0)
    exact = verify_inexact_muon(task, 0.0, 400)
    half = verify_inexact_muon(task, 0.5, 400)
    assert exact.passed and half.passed
    assert half.bound - 1e-6 == pytest.approx(2 * (exact.bound - 1e-6))
    tight = verify_inexact_muon(task, 1e-9, 400)
    assert abs(tight.measured - exact.measured) <= 1e-6


def test_inexact_muon_rejects_eps_at_least_one():
    with pytest.raises(ValueError):
        verify_inexact_muon(matrix_quadratic(2, 2), 1.0)


def test_noise_floor_noiseless_independent_of_workers():
    task = matrix_quadratic(6, 6, seed=0)
    T = 200
    table = noise_floor_scan(task, NoiseModel(0.0), [1, 4], T, gradient_sign_hp(task, T), [0, 1, 2])
    assert table.rows[0][1] == table.rows[1][1]
    assert table.floor(1) == table.floor(4) == 0.0


def test_noise_floor_decreases_with_workers():
    T = 2000
    task = matrix_quadratic(16, 16, seed=0)
    table = noise_floor_scan(task, NoiseModel(1.0), [1, 4, 16], T, gradient_sign_hp(task, T), [0, 1, 2])
    assert table.floor(1) > table.floor(4) > table.floor(16) > 0
    assert 2.0 <= table.ratio(1, 16) <= 8.0


def test_noise_floor_needs_three_seeds():
    task = matrix_quadratic(2, 2)
    with pytest.raises(ValueError):
        noise_floor_scan(task, NoiseModel(1.0), [1], 10, gradient_sign_hp(task, 10), [0, 1])


# --- suites ---------------------------------------------------------------------------------------

def test_report_line_format():
    r = verify_ns_error(0.5, 2, trials=10)
    fields = r.line().split("\t")
    assert fields[0] == "PASS" and fields[1] == "ns_error[rho=0.5,K=2]"
    assert fields[2].startswith("measured=") and fields[3].startswith("bound=")


def test_suite_registry():
    assert set(SUITES) == {"linalg", "collective", "bounds"}
    with pytest.raises(ValueError):
        run_suite("numerics")


def test_linalg_suite_passes_and_is_deterministic():
    a = run_suite("linalg", seed=5)
    b = run_suite("linalg", seed=5)
    assert all(r.passed for r in a)
    assert [r.line() for r in a] == [r.line() for r in b]
