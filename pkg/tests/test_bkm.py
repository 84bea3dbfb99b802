import math

import mpmath
import numpy as np
import pytest
import scipy.linalg

from qimanifold.bkm import (BudgetError, bkm_metric, bkm_metric_quadrature, check_budget,
                            cumulant_table, delta_schedule, gram_matrix, log_mean_matrix,
                            npoint_bound, npoint_function, regularized_mean, score,
                            simplex_trace, third_cumulant, third_cumulant_decomposition,
                            true_mean)
from qimanifold.dyson import central_difference, direct_free_energy
from qimanifold.gibbs import gibbs
from qimanifold.linalg import as_matrix

from conftest import random_hamiltonian, random_hermitian

OFFDIAG = np.array([[0.0, 1.0], [1.0, 0.0]])


def block_corner_trace(h, vs):
    """``Tr [expm(B)]_(0, n)`` for the block bidiagonal ``B`` with ``-H`` and ``vs``."""
    d, n = h.shape[0], len(vs)
    b = np.zeros(((n + 1) * d,) * 2, dtype=complex)
    for k in range(n + 1):
        b[k * d:(k + 1) * d, k * d:(k + 1) * d] = -h
    for k, v in enumerate(vs):
        b[k * d:(k + 1) * d, (k + 1) * d:(k + 2) * d] = v
    return np.trace(scipy.linalg.expm(b)[:d, n * d:])


def oracle_ordered_trace(h, vs):
    """``Z Tr int_simplex rho^a1 V_1 ... rho^an V_n`` from cyclic rotations."""
    n = len(vs)
    return sum(block_corner_trace(h, vs[r:] + vs[:r]) for r in range(n))


def test_true_mean_examples(rng):
    s = gibbs(random_hamiltonian(rng, 4))
    assert true_mean(s, np.eye(4)) == pytest.approx(1.0, rel=1e-14)
    assert true_mean(gibbs([[1.0]]), [[1.0]]) == 1.0
    y = random_hermitian(rng, 4)
    u = s.spectrum_cache.eigenvectors
    oracle = np.sum(s.probabilities * np.diag(u.conj().T @ y @ u).real)
    assert true_mean(s, y) == pytest.approx(oracle, abs=1e-12)


def test_regularized_mean(rng):
    s = gibbs(random_hamiltonian(rng, 6, spread=5.0))
    assert regularized_mean(s, np.eye(6), 0.5) == pytest.approx(1.0, rel=1e-12)
    y = random_hermitian(rng, 6)
    m = true_mean(s, y)
    for lam in np.linspace(0.1, 0.9, 9):
        assert abs(regularized_mean(s, y, lam) - m) <= 1e-12 * max(1.0, abs(m))
    with pytest.raises(ValueError):
        regularized_mean(s, y, 1.0)


def test_score(rng):
    s = gibbs(random_hamiltonian(rng, 5))
    assert np.abs(score(s, np.eye(5))).max() <= 1e-15
    y = random_hermitian(rng, 5)
    c = score(s, y)
    assert abs(true_mean(s, c)) <= 1e-12
    assert np.allclose(score(s, c), c, atol=1e-14)


def test_metric_scalar_and_commuting(rng):
    s1 = gibbs([[1.0]])
    assert bkm_metric(s1, [[0.3]], [[-2.0]]) == pytest.approx(-0.6, rel=1e-15)
    assert bkm_metric_quadrature(s1, [[0.3]], [[-2.0]]) == pytest.approx(-0.6, rel=1e-12)

    e = np.array([1.0, 1.7, 3.0])
    s = gibbs(np.diag(e))
    y, z = np.diag([1.0, -2.0, 0.5]), np.diag([0.3, 0.1, 4.0])
    oracle = np.sum(s.probabilities * np.diag(y) * np.diag(z))
    assert bkm_metric(s, y, z) == pytest.approx(oracle, rel=1e-13)
    assert bkm_metric_quadrature(s, y, z) == pytest.approx(oracle, rel=1e-11)


def test_metric_two_level_offdiagonal():
    s = gibbs(np.diag([1.0, 2.0]))
    z = math.exp(-1) + math.exp(-2)
    p1, p2 = math.exp(-1) / z, math.exp(-2) / z
    log_mean = (p1 - p2) / (math.log(p1) - math.log(p2))
    assert bkm_metric(s, OFFDIAG, OFFDIAG) == pytest.approx(2 * log_mean, rel=1e-14)
    assert bkm_metric_quadrature(s, OFFDIAG, OFFDIAG) == pytest.approx(2 * log_mean, abs=1e-11)


def test_log_mean_series_branch():
    for w in (1e-5, 3e-6, 9.9e-5):
        lp = np.log(np.array([0.3, 0.3 * math.exp(-w)]))
        with mpmath.workdps(40):
            p, q = mpmath.mpf(0.3), mpmath.mpf(0.3) * mpmath.exp(-mpmath.mpf(w))
            oracle = float((p - q) / (mpmath.log(p) - mpmath.log(q)))
        assert log_mean_matrix(lp)[0, 1] == pytest.approx(oracle, rel=1e-15)
    assert log_mean_matrix(np.log([0.2]))[0, 0] == pytest.approx(0.2, rel=1e-15)


def test_metric_properties(rng):
    s = gibbs(random_hamiltonian(rng, 7, spread=6.0))
    y1, y2, z = (random_hermitian(rng, 7) for _ in range(3))
    assert bkm_metric(s, y1, z) == pytest.approx(bkm_metric(s, z, y1), abs=1e-12)
    a, b = 0.7, -1.3
    lhs = bkm_metric(s, a * y1 + b * y2, z)
    rhs = a * bkm_metric(s, y1, z) + b * bkm_metric(s, y2, z)
    assert lhs == pytest.approx(rhs, abs=1e-10)
    assert abs(bkm_metric(s, y1, z) - bkm_metric_quadrature(s, y1, z)) <= 1e-9
    g = gram_matrix(s, [y1, y2, z, y1 @ y2 + y2 @ y1])
    assert np.linalg.eigvalsh(g)[0] > 0


def test_third_cumulant_trivial_cases():
    s = gibbs(np.diag([1.0, 2.0]))
    eye = np.eye(2)
    assert third_cumulant(s, eye, eye, eye) == pytest.approx(0.0, abs=1e-15)
    s1 = gibbs([[1.0]])
    assert third_cumulant(s1, [[0.4]], [[2.0]], [[-1.0]]) == pytest.approx(0.0, abs=1e-15)


def test_third_cumulant_two_level_matches_fd():
    s = gibbs(np.diag([1.0, 2.0]))
    t = third_cumulant(s, OFFDIAG, OFFDIAG, OFFDIAG)
    fd = central_difference(lambda lam: direct_free_energy(s, OFFDIAG, lam), 3, 0.02)
    assert -2.0 * t == pytest.approx(fd, rel=1e-4)


def test_third_cumulant_decomposition(rng):
    s = gibbs(random_hamiltonian(rng, 4))
    y = random_hermitian(rng, 4)
    d = third_cumulant_decomposition(s, y, y, y)
    assert d['raw'] - d['connected'] == pytest.approx(d['disconnected'], abs=1e-14)
    assert d['connected'] == pytest.approx(third_cumulant(s, y, y, y), rel=1e-14)


def test_npoint_scalar_pins_normalization():
    v = 0.7
    s = gibbs([[1.0]])
    for n in range(1, 8):
        assert npoint_function(s, [[[v]]] * n) == pytest.approx(math.exp(-1) * v ** n,
                                                                rel=1e-13)


def test_npoint_low_orders(rng):
    s = gibbs(random_hamiltonian(rng, 5))
    v, w = random_hermitian(rng, 5), random_hermitian(rng, 5)
    assert npoint_function(s, [v]) == pytest.approx(s.partition * true_mean(s, v), rel=1e-12)
    assert npoint_function(s, [v, w]) == pytest.approx(s.partition * bkm_metric(s, v, w),
                                                       rel=1e-10)
    assert npoint_function(s, [v, v]) >= 0


@pytest.mark.parametrize('n', [1, 2, 3, 4, 5])
def test_npoint_matches_block_exponential(rng, n):
    h = random_hamiltonian(rng, 4, spread=4.0)
    s = gibbs(h)
    v = random_hermitian(rng, 4)
    oracle = math.factorial(n) * block_corner_trace(h, [v] * n).real
    assert npoint_function(s, [v] * n) == pytest.approx(oracle, rel=1e-10)


def test_ordered_trace_distinct_matches_block_exponential(rng):
    h = random_hamiltonian(rng, 4, spread=3.0)
    s = gibbs(h)
    vs = [random_hermitian(rng, 4) for _ in range(3)]
    ours = s.partition * simplex_trace(s, vs)
    oracle = oracle_ordered_trace(h, vs)
    assert abs(ours - oracle) <= 1e-11 * abs(oracle)
    assert abs(ours.imag) > 1e-6 * abs(ours)  # genuinely complex for distinct V_j
    rev = s.partition * simplex_trace(s, vs[::-1])
    assert rev == pytest.approx(np.conj(ours), rel=1e-12)


def test_npoint_cyclic_covariance(rng):
    s = gibbs(random_hamiltonian(rng, 4))
    vs = [random_hermitian(rng, 4) for _ in range(4)]
    ref = npoint_function(s, vs)
    for r in range(1, 4):
        assert npoint_function(s, vs[r:] + vs[:r]) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_npoint_bound_examples():
    assert npoint_bound(1, 0.5, 1.0, 1.0, [1.0]) == pytest.approx(8 / math.e, rel=1e-15)
    b1 = npoint_bound(3, 0.4, 2.0, 1.5, [0.2, 0.3, 0.1])
    b2 = npoint_bound(3, 0.4, 2.0, 1.5, [0.4, 0.6, 0.2])
    assert b2 == pytest.approx(8 * b1, rel=1e-14)
    with pytest.raises(ValueError):
        npoint_bound(2, 1.0, 1.0, 1.0, [1.0, 1.0])
    with pytest.raises(ValueError):
        npoint_bound(2, 0.5, 1.0, 1.0, [1.0])


def test_delta_schedule():
    assert np.allclose(delta_schedule(4), [0.75, 0.5, 0.25, 1.0])
    assert np.array_equal(delta_schedule(1), [1.0])


def test_budget_guard(rng):
    check_budget(12, 6)
    with pytest.raises(BudgetError):
        check_budget(13, 7)
    with pytest.raises(BudgetError):
        check_budget(64, 5)
    s = gibbs(np.diag(1.0 + np.arange(13.0)))
    with pytest.raises(BudgetError):
        npoint_function(s, [np.eye(13)] * 7)


def test_cumulant_table(rng):
    s = gibbs(random_hamiltonian(rng, 5))
    v = random_hermitian(rng, 5)
    t = cumulant_table(s, v, 4, 0.5)
    assert list(t.orders) == [1, 2, 3, 4]
    for k in range(4):
        m = npoint_function(s, [v] * (k + 1))
        assert t.m_values[k] == pytest.approx(m, rel=1e-14)
        assert t.signed_dyson[k] == pytest.approx((-1) ** (k + 1) * m / math.factorial(k + 1),
                                                  rel=1e-14)
    assert np.allclose(t.bound_ratios, t.m_values / t.bound_values, rtol=1e-14)
    assert t.flagged_orders() == [int(k) for k, r in zip(t.orders, t.bound_ratios) if abs(r) > 1]


def test_shape_mismatch(rng):
    s = gibbs(random_hamiltonian(rng, 3))
    with pytest.raises(ValueError):
        bkm_metric(s, np.eye(3), np.eye(4))
