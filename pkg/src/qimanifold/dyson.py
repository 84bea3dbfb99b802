"""Taylor expansion of ``Z(lambda) = Tr exp(-(H + lambda V))`` and its checks.

The ground truth for every comparison is the exact spectral evaluation of
the perturbed operator (:func:`direct_partition`), never the series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp, roots_legendre

from .bkm import BudgetError, cumulant_table, npoint_function, true_mean
from .gibbs import GibbsState
from .linalg import as_matrix, trace_norm
from .norms import PerturbationDirection

RATE_FLOOR = 0.05


class InsufficientDataError(ValueError):
    pass


def _direction(base: GibbsState, v) -> PerturbationDirection:
    if isinstance(v, PerturbationDirection):
        return v
    return PerturbationDirection.of(base, v)


def _perturbed_energies(base: GibbsState, v, lam: float) -> np.ndarray:
    h = as_matrix(base.hamiltonian) + lam * as_matrix(v)
    return np.linalg.eigvalsh(0.5 * (h + h.conj().T))


def direct_free_energy(base: GibbsState, v, lam: float) -> float:
    """``psi(lambda) = log Tr exp(-(H + lambda V))`` from the exact spectrum."""
    if isinstance(v, PerturbationDirection):
        v = v.operator
    return float(logsumexp(-_perturbed_energies(base, v, lam)))


def direct_partition(base: GibbsState, v, lam: float) -> float:
    return math.exp(direct_free_energy(base, v, lam))


@dataclass
class SeriesExpansion:
    """Coefficients ``c_k`` of ``Z(lambda) = sum_k c_k lambda^k``, ``c_0 = Z``."""

    base: GibbsState
    direction: PerturbationDirection
    order: int
    coefficients: np.ndarray
    beta_eff: float = float('nan')
    next_coefficient: float | None = None
    next_coefficient_exact: bool = False

    @property
    def radius_bound(self) -> float:
        """``(1 - beta_eff) / ||V||_omega``; nan without a ``beta_eff``."""
        if self.direction.omega_norm == 0:
            return float('inf')
        return (1.0 - self.beta_eff) / self.direction.omega_norm

    @property
    def ratio_estimates(self) -> np.ndarray:
        """``|c_(k-1) / c_k|`` for ``k = 1 .. order``."""
        c = np.abs(self.coefficients)
        with np.errstate(divide='ignore', invalid='ignore'):
            return c[:-1] / c[1:]

    @property
    def root_estimates(self) -> np.ndarray:
        """``(|c_k| / c_0)^(-1/k)`` for ``k = 1 .. order``."""
        c = np.abs(self.coefficients)
        k = np.arange(1, c.size)
        with np.errstate(divide='ignore'):
            return (c[1:] / c[0]) ** (-1.0 / k)

    @property
    def radius_empirical(self) -> float:
        """Ratio-test estimate from the two highest orders."""
        return float(self.ratio_estimates[-1])

    def evaluate(self, lam: float) -> float:
        return float(np.polynomial.polynomial.polyval(lam, self.coefficients))

    def next_term_estimate(self, lam: float) -> float:
        """Size of the leading omitted terms at ``lam``.

        The larger of ``|c_(n+1) lambda^(n+1)|`` (exact when affordable,
        otherwise extrapolated from the two highest coefficients) and the
        same-parity extrapolation ``|c_n lambda^n| |c_n / c_(n-2)| lambda^2``.
        The second guards against an accidentally small ``c_(n+1)`` when
        even and odd orders decay at different rates.
        """
        c = self.coefficients
        n = self.order
        if self.next_coefficient is not None:
            c_next = self.next_coefficient
        else:
            c_next = c[-1] * (c[-1] / c[-2]) if c[-2] != 0 else float('inf')
        est = abs(c_next * lam ** (n + 1))
        if n >= 2:
            parity = (abs(c[n] / c[n - 2]) * abs(c[n]) * lam ** (n + 2)
                      if c[n - 2] != 0 else float('inf'))
            est = max(est, abs(parity))
        return est

    def error(self, lam: float) -> tuple[float, float]:
        """``(|series - direct|, next-term estimate)`` at ``lam``."""
        direct = direct_partition(self.base, self.direction.operator, lam)
        return abs(self.evaluate(lam) - direct), self.next_term_estimate(lam)


def dyson_coefficient(base: GibbsState, v, k: int) -> float:
    """``c_k = (-1)^k M_k / k!``."""
    if k == 0:
        return base.partition
    m = npoint_function(base, [v] * k)
    return (-1) ** k * m / math.factorial(k)


def expand(base: GibbsState, v, order: int, *, beta_eff: float = float('nan'),
           next_term: bool = True) -> SeriesExpansion:
    """Taylor coefficients of the partition function up to ``order``.

    With ``next_term`` the coefficient of order ``order + 1`` is also
    computed when the n-point budget allows it.
    """
    if order < 1:
        raise ValueError('order must be at least 1')
    direction = _direction(base, v)
    op = direction.operator
    coeffs = np.array([dyson_coefficient(base, op, k) for k in range(order + 1)])
    nxt, exact = None, False
    if next_term:
        try:
            nxt, exact = dyson_coefficient(base, op, order + 1), True
        except BudgetError:
            pass
    return SeriesExpansion(base, direction, order, coeffs, beta_eff, nxt, exact)


@dataclass
class RadiusReport:
    ratio_estimates: np.ndarray
    root_estimates: np.ndarray
    radius_empirical: float
    radius_bound: float
    sufficiency_holds: bool
    entire_like: bool
    bound_ratios: np.ndarray
    flagged_orders: list[int] = field(default_factory=list)


def radius_report(expansion: SeriesExpansion, *, beta: float | None = None,
                  tol: float = 1e-10) -> RadiusReport:
    """Compare the empirical convergence radius with ``(1 - beta_eff)/||V||_w``.

    ``entire_like`` is set when the ratio estimates grow at every order, the
    signature of an entire function (every finite truncation is one).
    Bound ratios ``M_n / bound_n`` above one are listed, not raised.
    """
    c = expansion.coefficients
    if np.count_nonzero(np.isfinite(c)) < 4 or expansion.order < 4:
        raise InsufficientDataError('need at least four finite coefficients')
    ratios = expansion.ratio_estimates
    finite = ratios[np.isfinite(ratios)]
    entire_like = finite.size >= 3 and bool(np.all(np.diff(finite) > 0))
    radius = expansion.radius_empirical
    bound = expansion.radius_bound
    holds = bool(np.isnan(bound) or radius >= bound - tol)
    beta = expansion.beta_eff if beta is None else beta
    if 0.0 < beta < 1.0:
        table = cumulant_table(expansion.base, expansion.direction.operator,
                               expansion.order, beta)
        bound_ratios, flagged = table.bound_ratios, table.flagged_orders()
    else:
        bound_ratios, flagged = np.full(expansion.order, np.nan), []
    return RadiusReport(ratios, expansion.root_estimates, radius, bound, holds,
                        entire_like, bound_ratios, flagged)


@dataclass(frozen=True)
class BlowupScan:
    lambdas: np.ndarray
    n_list: np.ndarray
    free_energies: np.ndarray
    divergent: np.ndarray

    @property
    def blowup_lambda(self) -> float:
        """Smallest scanned ``lambda`` at which ``psi_N(lambda)`` diverges in ``N``."""
        hits = np.flatnonzero(self.divergent)
        return float(self.lambdas[hits[0]]) if hits.size else float('inf')


def divergent_direction_scan(family: Callable[[int], np.ndarray],
                             lambdas: Sequence[float], n_list: Sequence[int], *,
                             tol: float = 1e-8, rate_floor: float = RATE_FLOOR
                             ) -> BlowupScan:
    """Scan ``psi_N(lambda)`` along ``V = -H`` over a truncation family.

    ``H + lambda V = (1 - lambda) H``, so the spectrum alone suffices.  At a
    fixed ``lambda`` the partial sums of ``Tr exp(-(1 - lambda) H)`` either
    settle as ``N`` doubles or keep growing; the first growing ``lambda``
    marks the singularity of the infinite-dimensional free energy.
    """
    lams = np.asarray(lambdas, dtype=float)
    ns = np.asarray(n_list, dtype=int)
    spectra = [np.asarray(family(int(n)), dtype=float) for n in ns]
    psi = np.array([[logsumexp(-(1.0 - lam) * e) for e in spectra] for lam in lams])
    # Log of the increments of the partial sums between successive N.
    with np.errstate(divide='ignore', invalid='ignore'):
        log_incr = psi[:, 1:] + np.log1p(-np.exp(psi[:, :-1] - psi[:, 1:]))
        rel = np.exp(log_incr[:, -1] - psi[:, -1])
        rates = -(log_incr[:, -1] - log_incr[:, -2]) / np.log(2.0)
    settled = (rel <= tol) | (np.isfinite(log_incr[:, -2]) & (rates >= rate_floor))
    return BlowupScan(lams, ns, psi, ~settled)


@dataclass(frozen=True)
class DuhamelCheck:
    lam: float
    difference_quotient_error: float
    remainder_trace_norm: float
    remainder_trace: complex
    rounding: float = 0.0

    @property
    def bound_holds(self) -> bool:
        # ``rounding`` absorbs the cancellation error of the difference quotient.
        return self.difference_quotient_error <= (
            self.remainder_trace_norm * abs(self.lam) * (1 + 1e-8)
            + self.rounding + 1e-14)


def remainder_operator(base: GibbsState, v, lam: float, points: int = 32
                       ) -> np.ndarray:
    """Second-order Duhamel remainder.

    ``C = int_0^1 a da int_0^1 db exp(-ab(H + lam V)) V exp(-a(1-b) H) V exp(-(1-a) H)``

    evaluated with a tensor Gauss-Legendre rule; it satisfies
    ``(Z(lam) - Z(0)) / lam + Tr(exp(-H) V) = lam Tr C``.
    """
    v = as_matrix(v)
    h = as_matrix(base.hamiltonian)
    e0, u0 = np.linalg.eigh(h)
    hp = h + lam * v
    e1, u1 = np.linalg.eigh(0.5 * (hp + hp.conj().T))
    x, w = roots_legendre(points)
    x, w = 0.5 * (x + 1.0), 0.5 * w

    def expo(e, u, t):
        return (u * np.exp(-t * e)) @ u.conj().T

    c = np.zeros_like(h)
    for a, wa in zip(x, w):
        tail = v @ expo(e0, u0, 1.0 - a)
        for b, wb in zip(x, w):
            c += (wa * wb * a) * (expo(e1, u1, a * b) @ v
                                  @ expo(e0, u0, a * (1.0 - b)) @ tail)
    return c


def duhamel_remainder_check(base: GibbsState, v, lam: float, points: int = 32
                            ) -> DuhamelCheck:
    """Difference-quotient error of ``Z`` and the trace norm of its remainder.

    ``error = |(Z(lam) - Z(0)) / lam + Z Tr(rho V)|`` and the contract is
    ``error <= ||C||_1 |lam|``.
    """
    if lam == 0:
        raise ValueError('lambda must be nonzero')
    if isinstance(v, PerturbationDirection):
        v = v.operator
    v = as_matrix(v)
    z0 = base.partition
    z1 = direct_partition(base, v, lam)
    err = abs((z1 - z0) / lam + z0 * true_mean(base, v))
    c = remainder_operator(base, v, lam, points)
    rounding = 64.0 * np.finfo(float).eps * max(z0, z1) / abs(lam)
    return DuhamelCheck(lam, err, trace_norm(c), complex(np.trace(c)), rounding)


def difference_quotient_errors(base: GibbsState, v, lambdas: Sequence[float]
                               ) -> np.ndarray:
    """Difference-quotient errors alone (no remainder quadrature)."""
    if isinstance(v, PerturbationDirection):
        v = v.operator
    z0 = base.partition
    slope = z0 * true_mean(base, v)
    return np.array([abs((direct_partition(base, v, lam) - z0) / lam + slope)
                     for lam in lambdas])


_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5), 1),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0), 2),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5), 3),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0), 4),
}


def central_difference(f: Callable[[float], float], order: int, h: float,
                       x0: float = 0.0) -> float:
    """Central-difference ``f^(order)(x0)``, Richardson-extrapolated once.

    All stencils have error ``O(h^2)``; combining steps ``h`` and ``h/2``
    removes that term.
    """
    if order not in _STENCILS:
        raise ValueError(f'order {order} not supported')
    offsets, weights, power = _STENCILS[order]

    def d(step):
        return sum(w * f(x0 + o * step) for o, w in zip(offsets, weights)) / step ** power

    return (4.0 * d(h / 2) - d(h)) / 3.0


def fd_step(beta_eff: float, omega: float, order: int = 1) -> float:
    """Finite-difference step for the ``order``-th derivative of ``psi``.

    ``1e-3 L`` with ``L = (1 - beta_eff) / ||V||_omega`` for orders 1 and 2.
    Higher orders lose ``eps / h^order`` to rounding, so they use the
    balanced step ``L eps^(1 / (order + 4))`` of a once-extrapolated stencil.
    """
    length = (1.0 - beta_eff) / omega
    if order <= 2:
        return 1e-3 * length
    return length * np.finfo(float).eps ** (1.0 / (order + 4))
