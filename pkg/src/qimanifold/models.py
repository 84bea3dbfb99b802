"""Hamiltonian families with designed spectral growth, and perturbations.

Spectra (level ``k = 0, 1, ...``):

* ``oscillator``    ``E_k = 1 + k``
* ``power_law``     ``E_k = 1 + k^s``
* ``log_spectrum``  ``E_k = 1 + log(k + 1) / beta0``, so that
  ``Tr exp(-beta H) ~ sum (k + 1)^(-beta/beta0)`` is finite iff ``beta > beta0``
* ``random_dense``  a seeded GUE matrix, rescaled and shifted to ``H >= I``

Randomness comes from numpy's PCG64 (``numpy.random.default_rng``) seeded
with ``[seed, stream]``, so the Hamiltonian and the perturbation of one
spec draw from independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .gibbs import GibbsState, gibbs, normalize_hamiltonian
from .linalg import HermitianOperator
from .norms import PerturbationDirection, omega_norm

RNG_NAME = 'numpy.random.PCG64'

FAMILIES = ('oscillator', 'power_law', 'log_spectrum', 'random_dense')
PERTURBATIONS = ('commuting_scale', 'random_target_omega', 'off_diagonal_coupling')

_HAMILTONIAN_STREAM = 0
_SCRAMBLE_STREAM = 1
_PERTURBATION_STREAM = 2


@dataclass(frozen=True)
class ModelSpec:
    family: str = 'oscillator'
    dim: int = 8
    seed: int = 0
    s: float = 1.0
    beta0: float = 0.5
    scramble: bool = False
    perturbation: str = 'random_target_omega'
    r: float = 0.2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f'unknown family {self.family!r}; expected one of {FAMILIES}')
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f'unknown perturbation {self.perturbation!r}; '
                             f'expected one of {PERTURBATIONS}')
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f'dim must be a positive integer, got {self.dim}')
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError('seed must be a 64-bit unsigned integer')
        if self.family == 'power_law' and not self.s > 0:
            raise ValueError(f'power_law needs s > 0, got {self.s}')
        if self.family == 'log_spectrum' and not 0 < self.beta0 < 1:
            raise ValueError(f'log_spectrum needs beta0 in (0, 1), got {self.beta0}')
        if not self.r > 0:
            raise ValueError(f'perturbation size r must be positive, got {self.r}')

    def with_dim(self, dim: int) -> 'ModelSpec':
        return replace(self, dim=dim)

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), stream])


def _gue(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def family_spectrum(spec: ModelSpec, n: int | None = None) -> np.ndarray:
    """Eigenvalues of the truncation of ``spec``'s family to ``n`` levels."""
    n = spec.dim if n is None else n
    k = np.arange(n, dtype=float)
    if spec.family == 'oscillator':
        return 1.0 + k
    if spec.family == 'power_law':
        return 1.0 + k ** spec.s
    if spec.family == 'log_spectrum':
        return 1.0 + np.log(k + 1.0) / spec.beta0
    return np.linalg.eigvalsh(np.asarray(_random_dense(spec.with_dim(n))))


def _random_dense(spec: ModelSpec) -> HermitianOperator:
    n = spec.dim
    g = _gue(spec.rng(_HAMILTONIAN_STREAM), n)
    # Semicircle of radius ~ 2 sqrt(n) stretched to a spread of ~ 2n.
    h, _ = normalize_hamiltonian(g * np.sqrt(n) / 2.0)
    return h


def scrambling_unitary(spec: ModelSpec) -> np.ndarray:
    """Orthogonal factor of a seeded Gaussian matrix (Haar distributed)."""
    a = spec.rng(_SCRAMBLE_STREAM).standard_normal((spec.dim, spec.dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def hamiltonian(spec: ModelSpec) -> HermitianOperator:
    """The family's Hamiltonian at ``spec.dim``; diagonal unless scrambled."""
    if spec.family == 'random_dense':
        return _random_dense(spec)
    h = np.diag(family_spectrum(spec)).astype(complex)
    if spec.scramble:
        q = scrambling_unitary(spec)
        h = q @ h @ q.T
    return HermitianOperator(h)


def truncation_family(spec: ModelSpec):
    """``N -> spectrum`` callable for :func:`qimanifold.gibbs.schatten_membership`."""
    return lambda n: family_spectrum(spec, n)


def _rescale(base: GibbsState, v: np.ndarray, r: float) -> PerturbationDirection:
    w = omega_norm(base, v)
    if w == 0:
        raise ValueError('generated perturbation vanishes')
    v = v * (r / w)
    direction = PerturbationDirection.of(base, v)
    if abs(direction.omega_norm - r) > 1e-10 * max(r, 1.0):
        raise ArithmeticError('failed to reach the requested omega-norm')
    return direction


def perturbation(spec: ModelSpec, h=None, base: GibbsState | None = None
                 ) -> PerturbationDirection:
    """Perturbation of kind ``spec.perturbation`` with omega-norm ``spec.r``.

    * ``commuting_scale``: ``V = r H``
    * ``random_target_omega``: seeded random Hermitian, rescaled
    * ``off_diagonal_coupling``: couples the lowest and highest eigenmodes,
      rescaled; it has the smallest form-norm to omega-norm ratio
    """
    if base is None:
        base = gibbs(hamiltonian(spec) if h is None else h)
    hm = np.asarray(base.hamiltonian)
    n = base.dim
    if spec.perturbation == 'commuting_scale':
        return PerturbationDirection.of(base, spec.r * hm)
    if spec.perturbation == 'random_target_omega':
        return _rescale(base, _gue(spec.rng(_PERTURBATION_STREAM), n), spec.r)
    if n < 2:
        raise ValueError('off-diagonal coupling needs dimension >= 2')
    u = base.spectrum_cache.eigenvectors
    lo, hi = u[:, :1], u[:, -1:]
    v = lo @ hi.conj().T
    return _rescale(base, v + v.conj().T, spec.r)


def build(spec: ModelSpec) -> tuple[GibbsState, PerturbationDirection]:
    """Base Gibbs state and perturbation direction for ``spec``."""
    base = gibbs(hamiltonian(spec))
    return base, perturbation(spec, base=base)
