"""Means, the Bogoliubov-Kubo-Mori metric and higher Kubo cumulants.

Everything is evaluated in the Hamiltonian eigenbasis.  The ``n``-point
functions contract matrix elements against :mod:`qimanifold.kernel`; the
metric uses the logarithmic mean of populations.

Normalization of the ``n``-point function: with ``d^n Z / d lambda^n`` the
derivatives of ``Z(lambda) = Tr exp(-(H + lambda V))``,

    M_n = (n - 1)! Z Tr int_simplex rho^a1 V_1 ... rho^an V_n da
        = (-1)^n d^n Z / d lambda^n          (all V_j equal to V)

so that ``Z(lambda) = sum_n (-lambda)^n M_n / n!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

from .gibbs import GibbsState, trace_rho_power
from .kernel import KernelCache
from .linalg import as_matrix
from .norms import omega_norm

IMAG_TOL = 1e-12
LOGMEAN_SERIES_CUTOFF = 1e-4

# Largest kernel tensor (entries) the n-point contraction will touch.
NPOINT_BUDGET = 2 ** 27


class BudgetError(RuntimeError):
    """Requested evaluation exceeds the desk-scale cost budget."""


class QuadratureError(RuntimeError):
    def __init__(self, estimate: float, error: float, tol: float):
        super().__init__(f'quadrature did not reach tol={tol:g}: '
                         f'estimate {estimate!r} +/- {error:.3e}')
        self.estimate = estimate
        self.error = error


def _real(value: complex, scale: float = 1.0) -> float:
    value = complex(value)
    if abs(value.imag) > IMAG_TOL * max(scale, abs(value.real), 1.0):
        raise ArithmeticError(f'expected a real value, got {value!r}')
    return value.real


def _check(rho: GibbsState, *ops) -> list[np.ndarray]:
    mats = [as_matrix(op) for op in ops]
    for m in mats:
        if m.shape != (rho.dim, rho.dim):
            raise ValueError(f'operator of shape {m.shape} does not act on a '
                             f'{rho.dim}-dimensional state')
    return mats


def _eigenbasis(rho: GibbsState, *ops) -> list[np.ndarray]:
    return [rho.spectrum_cache.to_eigenbasis(m) for m in _check(rho, *ops)]


def true_mean(rho: GibbsState, y) -> float:
    """``Tr(rho Y)``."""
    (y,) = _check(rho, y)
    return _real(np.trace(as_matrix(rho.density) @ y),
                 scale=float(np.abs(y).max(initial=0.0)))


def regularized_mean(rho: GibbsState, y, lam: float) -> float:
    """``Tr(rho^lam Y rho^(1 - lam))`` for ``lam`` in (0, 1)."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f'lambda must lie in (0, 1), got {lam}')
    (y,) = _check(rho, y)
    return _real(np.trace(rho.power(lam) @ y @ rho.power(1.0 - lam)),
                 scale=float(np.abs(y).max(initial=0.0)))


def score(rho: GibbsState, y) -> np.ndarray:
    """Centered observable ``Y - Tr(rho Y) I``."""
    (y,) = _check(rho, y)
    return y - true_mean(rho, y) * np.eye(rho.dim)


def log_mean_matrix(log_p: np.ndarray) -> np.ndarray:
    """``L(p_i, p_j) = (p_i - p_j) / (log p_i - log p_j)``, ``L(p, p) = p``."""
    li, lj = log_p[:, None], log_p[None, :]
    w = li - lj
    with np.errstate(divide='ignore', invalid='ignore'):
        direct = (np.exp(li) - np.exp(lj)) / w
    # sqrt(pq) sinh(w/2)/(w/2), expanded for nearly equal populations.
    series = np.exp(0.5 * (li + lj)) * (1.0 + w ** 2 / 24.0 + w ** 4 / 1920.0)
    return np.where(np.abs(w) < LOGMEAN_SERIES_CUTOFF, series, direct)


def bkm_metric(rho: GibbsState, y, z, centered: bool = False) -> float:
    """``int_0^1 Tr(rho^a Y rho^(1-a) Z) da`` in closed form.

    Equals ``sum_ij Y_ij Z_ji L(p_i, p_j)`` in the eigenbasis of ``rho``.
    With ``centered`` the scores of ``Y`` and ``Z`` are used.
    """
    if centered:
        y, z = score(rho, y), score(rho, z)
    yb, zb = _eigenbasis(rho, y, z)
    lm = log_mean_matrix(np.asarray(rho.log_probs))
    total = np.sum(yb * zb.T * lm)
    return _real(total, scale=float(np.abs(yb).max(initial=0) *
                                    np.abs(zb).max(initial=0)))


def bkm_metric_quadrature(rho: GibbsState, y, z, tol: float = 1e-11, *,
                          centered: bool = False, limit: int = 200) -> float:
    """Adaptive quadrature of ``a -> Tr(rho^a Y rho^(1-a) Z)`` on [0, 1].

    Only the real part is integrated; the imaginary part is odd under
    ``a -> 1 - a`` and integrates to zero.
    """
    if not tol > 0:
        raise ValueError('tol must be positive')
    if centered:
        y, z = score(rho, y), score(rho, z)
    y, z = _check(rho, y, z)

    def integrand(a):
        return np.real(np.trace(rho.power(a) @ y @ rho.power(1.0 - a) @ z))

    value, err = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=0.0,
                                limit=limit)
    if not err <= tol:
        raise QuadratureError(value, err, tol)
    return float(value)


def gram_matrix(rho: GibbsState, frame: Sequence) -> np.ndarray:
    """BKM Gram matrix of the scores of ``frame``."""
    scores = [score(rho, f) for f in frame]
    k = len(scores)
    g = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            g[i, j] = g[j, i] = bkm_metric(rho, scores[i], scores[j])
    return g


@lru_cache(maxsize=16)
def _kernel_cache(nodes_bytes: bytes, n: int) -> KernelCache:
    return KernelCache(np.frombuffer(nodes_bytes), n)


def _kernel_for(rho: GibbsState, n: int) -> KernelCache:
    # Nodes -log p_i = E_i + log Z fold the 1/Z of rho^a1 ... rho^an into K.
    nodes = np.ascontiguousarray(-np.asarray(rho.log_probs), dtype=float)
    return _kernel_cache(nodes.tobytes(), n)


def check_budget(dim: int, n: int):
    if n > 6 and dim > 12:
        raise BudgetError(f'order {n} at dimension {dim} exceeds the budget '
                          '(orders above 6 need dimension <= 12)')
    if dim ** n > NPOINT_BUDGET:
        raise BudgetError(f'order {n} at dimension {dim} needs {dim ** n} '
                          f'kernel entries (budget {NPOINT_BUDGET})')


def simplex_trace(rho: GibbsState, ops: Sequence) -> complex:
    """``Tr int_simplex rho^a1 V_1 ... rho^an V_n da`` via the kernel tensor."""
    n = len(ops)
    if n < 1:
        raise ValueError('need at least one operator')
    check_budget(rho.dim, n)
    vs = _eigenbasis(rho, *ops)
    cache = _kernel_for(rho, n)
    if n == 1:
        return complex(np.sum(np.diag(vs[0]) * cache.values))
    letters = 'abcdefghijklmnop'
    total = 0.0 + 0.0j
    for i in range(rho.dim):
        t = cache.slice(i) * vs[0][i].reshape((-1,) + (1,) * (n - 2))
        # t is indexed by (i_2, ..., i_n); fold in V_2 ... V_{n-1}, each
        # summing out its row index while keeping its column index.
        for k in range(1, n - 1):
            rest = letters[2:n - k]
            t = np.einsum(f'ab{rest},ab->b{rest}', t, vs[k])
        total += np.sum(t * vs[n - 1][:, i])
    return total


def npoint_function(rho: GibbsState, v_list: Sequence) -> float:
    """``M_n = (n - 1)! Z Tr int_simplex rho^a1 V_1 ... rho^an V_n da``.

    For ``n >= 3`` distinct non-commuting directions the ordered trace is
    complex, its conjugate being the trace of the reversed list.  The real
    part, i.e. the average over both orders, is returned; use
    :func:`simplex_trace` for the complex value.
    """
    n = len(v_list)
    value = simplex_trace(rho, v_list)
    return math.factorial(n - 1) * rho.partition * float(np.real(value))


def third_cumulant(rho: GibbsState, y, z, w, centered: bool = True) -> float:
    """Connected simplex integral ``int Tr(rho^a1 Y rho^a2 Z rho^a3 W)_c``.

    The connected part is the integral taken over the scores of the three
    inputs; the real part is returned (see :func:`npoint_function`).  For a
    single direction, ``d^3/dlambda^3 log Tr exp(-(H + lambda V)) = -2 t(V, V, V)``
    at zero.
    """
    ops = [score(rho, a) for a in (y, z, w)] if centered else [y, z, w]
    return float(np.real(simplex_trace(rho, ops)))


def third_cumulant_decomposition(rho: GibbsState, y, z, w) -> dict:
    """Raw simplex integral, its connected part, and their difference."""
    raw = third_cumulant(rho, y, z, w, centered=False)
    connected = third_cumulant(rho, y, z, w, centered=True)
    return {'raw': raw, 'connected': connected, 'disconnected': raw - connected}


def delta_schedule(n: int) -> np.ndarray:
    """Exponents ``delta_1 .. delta_n``: ``delta_j = 1 - j/n``, ``delta_n = 1``."""
    if n < 1:
        raise ValueError('n must be positive')
    d = 1.0 - np.arange(1, n + 1) / n
    d[-1] = 1.0
    return d


def npoint_bound(n: int, beta: float, partition: float, trace_rho_beta: float,
                 omega_norms: Sequence[float]) -> float:
    """``4 ||rho^beta||_1 Z^-beta n^2 n^n e^-n prod_j ||V_j||_w / (1 - beta)``."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f'beta must lie in (0, 1), got {beta}')
    if len(omega_norms) != n:
        raise ValueError('need one omega-norm per factor')
    prod = math.prod(float(w) / (1.0 - beta) for w in omega_norms)
    return (4.0 * trace_rho_beta * partition ** (-beta) * n ** 2 * float(n) ** n
            * math.exp(-n) * prod)


@dataclass
class CumulantTable:
    orders: np.ndarray
    m_values: np.ndarray
    signed_dyson: np.ndarray
    bound_values: np.ndarray
    bound_ratios: np.ndarray
    beta: float

    def flagged_orders(self) -> list[int]:
        return [int(k) for k, r in zip(self.orders, self.bound_ratios)
                if abs(r) > 1.0]


def cumulant_table(rho: GibbsState, v, n_max: int, beta: float) -> CumulantTable:
    """``M_1 .. M_nmax`` for ``V_j = V`` together with the per-order bound."""
    orders = np.arange(1, n_max + 1)
    w = omega_norm(rho, v)
    tr_beta = trace_rho_power(rho.energies, beta)
    m = np.array([npoint_function(rho, [v] * k) for k in orders])
    signed = np.array([(-1) ** k * mk / math.factorial(k)
                       for k, mk in zip(orders, m)])
    bounds = np.array([npoint_bound(int(k), beta, rho.partition, tr_beta, [w] * k)
                       for k in orders])
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(bounds > 0, m / bounds, np.nan)
    return CumulantTable(orders, m, signed, bounds, ratios, beta)
