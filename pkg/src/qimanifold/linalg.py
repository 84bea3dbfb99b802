"""Dense Hermitian linear algebra.

Eigendecomposition, spectral matrix functions, Schatten quasinorms and the
trace Hölder inequality.  Every other module builds on these primitives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

MAX_DIM = 256

# Inputs further than this from Hermitian are treated as bugs, not rounding.
MAX_DEVIATION = 1e-8


class EigenDecompositionError(np.linalg.LinAlgError):
    """Raised when the dense eigensolver fails to converge."""

    def __init__(self, dim: int, condition: float):
        super().__init__(
            f'eigendecomposition failed for a {dim}x{dim} operator '
            f'(condition estimate {condition:.3e})')
        self.dim = dim
        self.condition = condition


class DomainError(ValueError):
    """A scalar function is undefined or non-finite at some eigenvalue."""

    def __init__(self, eigenvalue: float, value):
        super().__init__(
            f'function is not finite at eigenvalue {eigenvalue!r} '
            f'(got {value!r})')
        self.eigenvalue = eigenvalue


class HermitianOperator:
    """Dense self-adjoint matrix.

    The input is symmetrized as ``(A + A^H) / 2``; the relative deviation of
    the raw input from Hermitian is kept in ``deviation``.

    Parameters
    ----------
    entries : array_like
        Square matrix.
    max_deviation : float
        Largest tolerated relative deviation ``max|A - A^H| / max|A|``.
    """

    __slots__ = ('_entries', 'deviation')

    def __init__(self, entries, *, max_deviation: float = MAX_DEVIATION):
        if isinstance(entries, HermitianOperator):
            self._entries = entries._entries
            self.deviation = entries.deviation
            return
        a = np.array(entries, dtype=complex)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f'expected a square matrix, got shape {a.shape}')
        if a.shape[0] < 1:
            raise ValueError('dimension must be at least 1')
        if a.shape[0] > MAX_DIM:
            raise ValueError(
                f'dimension {a.shape[0]} exceeds the dense cap of {MAX_DIM}')
        if not np.all(np.isfinite(a)):
            raise ValueError('operator has non-finite entries')
        scale = np.max(np.abs(a))
        dev = np.max(np.abs(a - a.conj().T))
        dev = float(dev / scale) if scale > 0 else 0.0
        if dev > max_deviation:
            raise ValueError(
                f'operator is not Hermitian (relative deviation {dev:.3e})')
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        self._entries = a
        self.deviation = dev

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._entries
        return self._entries.astype(dtype)

    def __repr__(self):
        return f'HermitianOperator(dim={self.dim}, deviation={self.deviation:.1e})'


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D complex array (no Hermiticity check)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    return m


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and a unitary matrix of eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.apply(self.eigenvalues)

    def apply(self, values) -> np.ndarray:
        """``U diag(values) U^H`` as a plain array."""
        u = self.eigenvectors
        return (u * np.asarray(values)) @ u.conj().T

    def to_eigenbasis(self, a) -> np.ndarray:
        """Matrix elements ``U^H A U`` of ``a`` in this eigenbasis."""
        u = self.eigenvectors
        return u.conj().T @ as_matrix(a) @ u


def eig(a) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""
    m = np.asarray(HermitianOperator(a))
    try:
        w, u = np.linalg.eigh(m)
    except np.linalg.LinAlgError:
        try:
            cond = float(np.linalg.cond(m))
        except np.linalg.LinAlgError:
            cond = float('inf')
        raise EigenDecompositionError(m.shape[0], cond) from None
    w.setflags(write=False)
    u.setflags(write=False)
    return SpectralDecomposition(w, u)


def matrix_function(decomp: SpectralDecomposition,
                    f: Callable[[np.ndarray], np.ndarray]) -> HermitianOperator:
    """Apply a real scalar function spectrally: ``U diag(f(w)) U^H``.

    Raises
    ------
    DomainError
        If ``f`` is not finite at one of the eigenvalues.
    """
    w = decomp.eigenvalues
    with np.errstate(all='ignore'):
        values = np.asarray(f(w), dtype=float)
    values = np.broadcast_to(values, w.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DomainError(float(w[i]), float(values[i]))
    return HermitianOperator(decomp.apply(values))


def singular_values(a) -> np.ndarray:
    return scipy.linalg.svdvals(as_matrix(a))


def operator_norm(a) -> float:
    """Largest singular value."""
    return float(singular_values(a)[0])


def schatten_quasinorm(a, p: float) -> float:
    """``[Tr (A^H A)^(p/2)]^(1/p)``; ``p = inf`` gives the operator norm.

    For ``0 < p < 1`` this is only a quasinorm.
    """
    p = float(p)
    if not p > 0:
        raise ValueError(f'p must be positive, got {p}')
    s = singular_values(a)
    smax = s[0] if s.size else 0.0
    if p == np.inf:
        return float(smax)
    if smax == 0:
        return 0.0
    with np.errstate(over='raise', under='ignore'):
        try:
            total = np.sum((s / smax) ** p)
            value = smax * total ** (1.0 / p)
        except FloatingPointError:
            raise OverflowError(f'Schatten {p}-quasinorm overflows') from None
    if not np.isfinite(value):
        raise OverflowError(f'Schatten {p}-quasinorm overflows')
    return float(value)


def trace_norm(a) -> float:
    return float(np.sum(singular_values(a)))


def holder_product_bound(factors: Sequence, exponents: Sequence[float],
                         *, tol: float = 1e-12) -> tuple[float, float]:
    """Both sides of the trace Hölder inequality.

    ``||A_1 ... A_n||_1 <= prod_i ||A_i||_{1/alpha_i}`` whenever the
    ``alpha_i > 0`` sum to one.

    Returns
    -------
    lhs, rhs : float
    """
    if len(factors) != len(exponents) or not factors:
        raise ValueError('need one exponent per factor')
    alphas = np.asarray(exponents, dtype=float)
    if np.any(alphas <= 0):
        raise ValueError('exponents must be positive')
    if abs(alphas.sum() - 1.0) > tol:
        raise ValueError(f'exponents sum to {alphas.sum()!r}, not 1')
    product = as_matrix(factors[0])
    for f in factors[1:]:
        product = product @ as_matrix(f)
    lhs = trace_norm(product)
    rhs = 1.0
    for f, alpha in zip(factors, alphas):
        rhs *= schatten_quasinorm(f, 1.0 / alpha)
    return lhs, float(rhs)


def commutator_norm(a, b) -> float:
    a, b = as_matrix(a), as_matrix(b)
    return float(np.linalg.norm(a @ b - b @ a))
