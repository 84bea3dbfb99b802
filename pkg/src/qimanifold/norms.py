"""Norms of perturbations measured relative to a Hamiltonian ``H >= I``.

With ``R = H^(-1)``, the omega-norm is ``||R V||`` (operator-bounded
perturbations) and the form norm is ``||R^(1/2) V R^(1/2)||`` (form-bounded
perturbations).  The checks here return both sides of each operator
inequality so callers can assert or report them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gibbs import GibbsState
from .linalg import HermitianOperator, as_matrix, operator_norm

INEQUALITY_SLACK = 1e-10


def _resolvent(state: GibbsState) -> np.ndarray:
    return state.resolvent_power(1.0)


def omega_norm(base: GibbsState, v) -> float:
    """``||R V||`` in operator norm."""
    return operator_norm(_resolvent(base) @ as_matrix(v))


def form_norm(base: GibbsState, v) -> float:
    """``||R^(1/2) V R^(1/2)||`` with the positive square root of ``R``."""
    half = base.resolvent_power(0.5)
    return operator_norm(half @ as_matrix(v) @ half)


@dataclass(frozen=True)
class PerturbationDirection:
    """A symmetric perturbation with its norms relative to ``base``."""

    operator: HermitianOperator
    base: GibbsState
    omega_norm: float
    form_norm: float

    @classmethod
    def of(cls, base: GibbsState, v) -> 'PerturbationDirection':
        v = HermitianOperator(v)
        return cls(v, base, omega_norm(base, v), form_norm(base, v))

    def scaled(self, factor: float) -> 'PerturbationDirection':
        return PerturbationDirection(
            HermitianOperator(factor * np.asarray(self.operator)), self.base,
            abs(factor) * self.omega_norm, abs(factor) * self.form_norm)


def _check_dims(base: GibbsState, *ops):
    for op in ops:
        if as_matrix(op).shape != (base.dim, base.dim):
            raise ValueError(
                f'dimension mismatch: operator {as_matrix(op).shape} vs '
                f'state of dimension {base.dim}')


def interpolation_bound_check(base: GibbsState, v, delta: float
                              ) -> tuple[float, float]:
    """``(||R^delta V R^(1-delta)||, ||R V||)``; the first never exceeds the second."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f'delta must lie in [0, 1], got {delta}')
    _check_dims(base, v)
    v = as_matrix(v)
    lhs = operator_norm(base.resolvent_power(delta) @ v
                        @ base.resolvent_power(1.0 - delta))
    return lhs, omega_norm(base, v)


@dataclass(frozen=True)
class ResolventCheck:
    product_residual: float
    bound_lhs: float
    bound_rhs: float
    relative_size: float

    @property
    def in_hypothesis(self) -> bool:
        return self.relative_size < 1.0


def resolvent_identity_check(base_x: GibbsState, y) -> ResolventCheck:
    """Check ``(I + Y R_X)(H_X R_{X+Y}) = I`` and ``||H_X R_{X+Y}|| <= 1/(1 - ||Y R_X||)``.

    ``R_{X+Y}`` is the inverse of ``H_X + Y`` without renormalization.  The
    bound side is only meaningful when ``||Y R_X|| < 1``; outside that region
    ``bound_rhs`` is ``inf``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``H_X + Y`` is singular.
    """
    _check_dims(base_x, y)
    y = as_matrix(y)
    h = as_matrix(base_x.hamiltonian)
    r_x = _resolvent(base_x)
    hy = h + y
    w = np.linalg.eigvalsh(0.5 * (hy + hy.conj().T))
    if np.min(np.abs(w)) <= 1e-12 * max(np.max(np.abs(w)), 1.0):
        raise np.linalg.LinAlgError(
            'H_X + Y is singular; the perturbed resolvent does not exist')
    r_xy = np.linalg.inv(hy)
    size = operator_norm(y @ r_x)
    eye = np.eye(base_x.dim)
    product = (eye + y @ r_x) @ (h @ r_xy)
    residual = operator_norm(product - eye)
    lhs = operator_norm(h @ r_xy)
    rhs = 1.0 / (1.0 - size) if size < 1.0 else float('inf')
    return ResolventCheck(residual, lhs, rhs, size)


def equivalence_constants(rho0: GibbsState, rho_x: GibbsState) -> tuple[float, float]:
    """``m = ||(H_X + I) R_0||^-1`` and ``M = ||(H_0 + I) R_X||``.

    For every ``Y``: ``m ||Y R_0|| <= ||Y R_X|| <= M ||R_0 Y||``.
    """
    if rho0.dim != rho_x.dim:
        raise ValueError('states have different dimensions')
    eye = np.eye(rho0.dim)
    h0, hx = as_matrix(rho0.hamiltonian), as_matrix(rho_x.hamiltonian)
    m = 1.0 / operator_norm((hx + eye) @ _resolvent(rho0))
    big_m = operator_norm((h0 + eye) @ _resolvent(rho_x))
    return m, big_m


def equivalence_sandwich(rho0: GibbsState, rho_x: GibbsState, y,
                         constants: tuple[float, float] | None = None) -> dict:
    """All three terms of the norm-equivalence sandwich for one ``Y``."""
    m, big_m = constants or equivalence_constants(rho0, rho_x)
    y = as_matrix(y)
    r0, rx = _resolvent(rho0), _resolvent(rho_x)
    return {
        'lower': m * operator_norm(y @ r0),
        'middle': operator_norm(y @ rx),
        'middle_left': operator_norm(rx @ y),
        'upper': big_m * operator_norm(r0 @ y),
        'upper_right': big_m * operator_norm(y @ r0),
    }
