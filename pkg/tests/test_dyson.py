import math

import numpy as np
import pytest

from qimanifold import models
from qimanifold.bkm import true_mean
from qimanifold.dyson import (InsufficientDataError, central_difference,
                              difference_quotient_errors, direct_free_energy,
                              direct_partition, divergent_direction_scan,
                              duhamel_remainder_check, dyson_coefficient, expand,
                              fd_step, radius_report)
from qimanifold.gibbs import DEFAULT_N_LIST, gibbs

from conftest import random_hamiltonian, random_hermitian


def test_direct_free_energy_examples(rng):
    s = gibbs(random_hamiltonian(rng, 5))
    v = random_hermitian(rng, 5)
    assert direct_free_energy(s, v, 0.0) == pytest.approx(s.log_partition, abs=1e-14)
    s1 = gibbs([[1.0]])
    for lam in (-0.8, 0.3, 2.0):
        assert direct_free_energy(s1, [[0.7]], lam) == pytest.approx(-(1 + 0.7 * lam), abs=1e-15)
    slope = -true_mean(s, v)
    for lam in (1e-2, 1e-3):
        resid = direct_free_energy(s, v, lam) - s.log_partition - lam * slope
        assert abs(resid) <= 10 * lam ** 2 * np.linalg.norm(v, 2) ** 2


def test_scalar_coefficients_machine_precision():
    v = 0.7
    ex = expand(gibbs([[1.0]]), [[v]], 8)
    exact = [math.exp(-1) * (-v) ** k / math.factorial(k) for k in range(9)]
    assert np.allclose(ex.coefficients, exact, rtol=1e-14, atol=0)
    assert ex.next_coefficient == pytest.approx(math.exp(-1) * (-v) ** 9 / math.factorial(9),
                                                rel=1e-13)
    assert ex.next_coefficient_exact


def test_series_basics(rng):
    s = gibbs(random_hamiltonian(rng, 6))
    v = random_hermitian(rng, 6, scale=0.2)
    ex = expand(s, v, 1)
    assert ex.coefficients[0] == s.partition
    assert ex.evaluate(0.0) == s.partition
    for lam in (1e-2, 1e-3):
        err = abs(ex.evaluate(lam) - direct_partition(s, v, lam))
        assert err <= 10 * lam ** 2 * s.partition * np.linalg.norm(v, 2) ** 2
    with pytest.raises(ValueError):
        expand(s, v, 0)


def test_oscillator_series_vs_direct():
    spec = models.ModelSpec(family='oscillator', dim=16, seed=5, scramble=True, r=0.2)
    base, d = models.build(spec)
    ex = expand(base, d, 6)
    err, est = ex.error(0.5)
    assert err <= 2 * est


@pytest.mark.parametrize('k, tol', [(1, 1e-5), (2, 1e-5), (3, 1e-5), (4, 1e-3)])
def test_coefficients_match_finite_differences(k, tol):
    spec = models.ModelSpec(family='oscillator', dim=6, seed=11, scramble=True, r=0.2)
    base, d = models.build(spec)
    z = lambda lam: direct_partition(base, d.operator, lam)  # noqa: E731
    h = fd_step(0.1, d.omega_norm, k)
    fd = central_difference(z, k, h) / math.factorial(k)
    assert dyson_coefficient(base, d.operator, k) == pytest.approx(fd, rel=tol)


def test_psi_is_convex(rng):
    s = gibbs(random_hamiltonian(rng, 7, spread=5.0))
    v = random_hermitian(rng, 7)
    lams = np.linspace(-1, 1, 41)
    psi = np.array([direct_free_energy(s, v, x) for x in lams])
    assert np.all(psi[:-2] - 2 * psi[1:-1] + psi[2:] >= -1e-10)


def test_next_term_estimate_without_exact_coefficient(rng):
    s = gibbs(random_hamiltonian(rng, 4))
    v = random_hermitian(rng, 4, scale=0.1)
    ex = expand(s, v, 5, next_term=False)
    assert ex.next_coefficient is None and not ex.next_coefficient_exact
    c = ex.coefficients
    lam = 0.3
    step = abs(c[5] ** 2 / c[4] * lam ** 6)
    parity = abs(c[5] ** 2 / c[3]) * lam ** 7
    assert ex.next_term_estimate(lam) == pytest.approx(max(step, parity), rel=1e-14)


def test_duhamel_zero_and_scalar():
    s = gibbs(np.diag([1.0, 2.0]))
    chk = duhamel_remainder_check(s, np.zeros((2, 2)), 0.1)
    assert chk.difference_quotient_error == 0.0 and chk.remainder_trace_norm == 0.0

    v = 0.7
    s1 = gibbs([[1.0]])
    for lam in (0.5, 1e-2, -0.3):
        chk = duhamel_remainder_check(s1, [[v]], lam)
        exact = math.exp(-1) * abs(math.exp(-lam * v) - 1 + lam * v) / abs(lam)
        assert chk.difference_quotient_error == pytest.approx(exact, rel=1e-8)
        assert chk.remainder_trace.real * abs(lam) == pytest.approx(exact, rel=1e-10)
        assert chk.bound_holds
    with pytest.raises(ValueError):
        duhamel_remainder_check(s1, [[v]], 0.0)


def test_duhamel_linear_decay(rng):
    s = gibbs(random_hamiltonian(rng, 8))
    v = random_hermitian(rng, 8, scale=0.3)
    lams = 10.0 ** -np.arange(1, 5)
    errs = difference_quotient_errors(s, v, lams)
    slopes = np.diff(np.log10(errs))
    assert np.allclose(slopes, -1.0, atol=0.05)
    for lam in lams:
        assert duhamel_remainder_check(s, v, lam).bound_holds


def test_radius_report_scalar_is_entire():
    ex = expand(gibbs([[1.0]]), [[0.7]], 8, beta_eff=0.1)
    rr = radius_report(ex)
    assert rr.entire_like
    assert rr.sufficiency_holds
    assert rr.radius_empirical == pytest.approx(8 / 0.7, rel=1e-12)
    with pytest.raises(InsufficientDataError):
        radius_report(expand(gibbs([[1.0]]), [[0.7]], 3))


def test_blowup_scan():
    lams = np.round(np.arange(1, 21) * 0.05, 10)
    osc = divergent_direction_scan(lambda n: 1.0 + np.arange(n), lams, DEFAULT_N_LIST)
    assert osc.blowup_lambda == pytest.approx(1.0)
    logs = divergent_direction_scan(lambda n: 1.0 + np.log(np.arange(n) + 1.0) / 0.6,
                                    lams, DEFAULT_N_LIST)
    assert logs.blowup_lambda == pytest.approx(0.4)
    assert not logs.divergent[:7].any() and logs.divergent[7:].all()


def test_central_difference_polynomials():
    f = lambda x: 3 * x ** 4 - x ** 3 + 2 * x  # noqa: E731
    assert central_difference(f, 1, 0.1, x0=0.5) == pytest.approx(12 * 0.125 - 0.75 + 2, rel=1e-12)
    assert central_difference(f, 2, 0.1, x0=0.5) == pytest.approx(36 * 0.25 - 3, rel=1e-12)
    assert central_difference(f, 3, 0.1, x0=0.5) == pytest.approx(72 * 0.5 - 6, rel=1e-10)
    assert central_difference(f, 4, 0.1) == pytest.approx(72, rel=1e-9)
    with pytest.raises(ValueError):
        central_difference(f, 5, 0.1)


def test_fd_step():
    assert fd_step(0.1, 0.2, 1) == pytest.approx(1e-3 * 4.5)
    assert fd_step(0.1, 0.2, 2) == fd_step(0.1, 0.2, 1)
    assert fd_step(0.1, 0.2, 3) == pytest.approx(4.5 * np.finfo(float).eps ** (1 / 7))
