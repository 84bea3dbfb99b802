"""Gibbs states ``rho = exp(-H) / Z`` for Hamiltonians normalized to ``H >= I``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

from .linalg import (HermitianOperator, SpectralDecomposition, as_matrix, eig,
                     matrix_function)

SPECTRUM_FLOOR_TOL = 1e-12

DEFAULT_BETA_GRID = tuple(np.round(np.arange(1, 11) / 10, 10))
DEFAULT_N_LIST = (32, 64, 128, 256, 512, 1024, 2048, 4096)


def normalize_hamiltonian(h_raw) -> tuple[HermitianOperator, float]:
    """Shift ``h_raw`` by a constant so that its smallest eigenvalue is 1.

    Returns the shifted operator and the shift ``c`` (possibly negative).
    """
    h = HermitianOperator(h_raw)
    w = np.linalg.eigvalsh(np.asarray(h))
    c = 1.0 - float(w[0])
    shifted = np.asarray(h) + c * np.eye(h.dim)
    return HermitianOperator(shifted), c


@dataclass(frozen=True)
class GibbsState:
    """A normalized Gibbs state and the data it was built from.

    ``log_probs`` holds ``log p_i = -E_i - log_partition`` in the Hamiltonian
    eigenbasis; it is the accurate route to ``rho^alpha`` when some weights
    underflow.
    """

    hamiltonian: HermitianOperator
    shift_c: float
    log_partition: float
    density: HermitianOperator
    spectrum_cache: SpectralDecomposition
    log_probs: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def partition(self) -> float:
        return float(np.exp(self.log_partition))

    @property
    def energies(self) -> np.ndarray:
        return self.spectrum_cache.eigenvalues

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def power(self, alpha: float) -> np.ndarray:
        """``rho^alpha`` computed spectrally."""
        return self.spectrum_cache.apply(np.exp(alpha * self.log_probs))

    def resolvent_power(self, delta: float) -> np.ndarray:
        """``R^delta = H^(-delta)``."""
        return self.spectrum_cache.apply(self.energies ** (-delta))


def gibbs(h, *, normalize: bool = False) -> GibbsState:
    """Build the Gibbs state of ``h``.

    ``h`` must satisfy ``H >= I`` unless ``normalize`` is set, in which case
    it is shifted first and the shift is recorded in ``shift_c``.
    """
    if normalize:
        h, c = normalize_hamiltonian(h)
    else:
        h, c = HermitianOperator(h), 0.0
    decomp = eig(h)
    w = decomp.eigenvalues
    if w[0] < 1.0 - SPECTRUM_FLOOR_TOL:
        raise ValueError(
            f'Hamiltonian must satisfy H >= I; smallest eigenvalue is {w[0]!r} '
            '(use normalize=True)')
    # Gaps above the ground energy keep log p accurate for large energies.
    gaps = w - w[0]
    log_z_rel = float(logsumexp(-gaps))
    log_z = log_z_rel - float(w[0])
    if not np.isfinite(log_z):
        raise FloatingPointError(
            'every Boltzmann weight underflows; rescale the Hamiltonian')
    log_p = -gaps - log_z_rel
    log_p.setflags(write=False)
    rho = HermitianOperator(decomp.apply(np.exp(log_p)))
    return GibbsState(h, c, log_z, rho, decomp, log_p)


def _density_spectrum(state) -> np.ndarray:
    if isinstance(state, GibbsState):
        return state.probabilities
    p = np.linalg.eigvalsh(np.asarray(HermitianOperator(state)))
    if p[0] < -1e-12 or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError('not a density matrix')
    return np.clip(p, 0.0, None)


def von_neumann_entropy(state) -> float:
    """``S = -sum p_i log p_i`` with ``0 log 0 = 0``.

    ``state`` is a :class:`GibbsState` or any density matrix.
    """
    if isinstance(state, GibbsState):
        p, log_p = state.probabilities, state.log_probs
        return float(max(-np.sum(p * log_p), 0.0))
    p = _density_spectrum(state)
    return float(max(-np.sum(xlogy(p, p)), 0.0))


def entropy_via_matrix_log(state: GibbsState) -> float:
    """``-Tr(rho log rho)`` through an explicit matrix logarithm."""
    decomp = eig(state.density)
    log_rho = matrix_function(decomp, np.log)
    return float(-np.real(np.trace(as_matrix(state.density)
                                   @ np.asarray(log_rho))))


@dataclass
class ClassMembershipReport:
    """Schatten-class diagnostics of a truncation family.

    ``trace_values[b, k]`` is ``Tr rho_N^beta`` for ``beta_grid[b]`` and
    ``n_list[k]``.  ``cauchy[b]`` says whether that row settles as ``N``
    doubles; ``effective_beta`` is the smallest settling grid value.
    """

    beta_grid: np.ndarray
    n_list: np.ndarray
    trace_values: np.ndarray
    increments: np.ndarray
    decay_rates: np.ndarray
    cauchy: np.ndarray
    effective_beta: float
    warnings: list[str] = field(default_factory=list)

    @property
    def truncation_curve(self) -> dict[int, np.ndarray]:
        return {int(n): self.trace_values[:, k]
                for k, n in enumerate(self.n_list)}

    def limit(self, beta: float) -> float:
        i = int(np.argmin(np.abs(self.beta_grid - beta)))
        return float(self.trace_values[i, -1])


def _spectrum_of(family: Callable, n: int) -> np.ndarray:
    out = family(n)
    if isinstance(out, tuple):
        out = out[0]
    arr = np.asarray(out)
    if arr.ndim == 2:
        arr = np.linalg.eigvalsh(np.asarray(HermitianOperator(arr)))
    return np.sort(np.asarray(arr, dtype=float))


def trace_rho_power(energies, beta: float) -> float:
    """``Tr rho^beta = sum_i p_i^beta`` for the Gibbs state of ``energies``."""
    e = np.asarray(energies, dtype=float)
    log_p = -e - logsumexp(-e)
    return float(np.exp(logsumexp(beta * log_p)))


def schatten_membership(family: Callable, beta_grid: Sequence[float] = DEFAULT_BETA_GRID,
                        n_list: Sequence[int] = DEFAULT_N_LIST, *,
                        tol: float = 1e-8, rate_floor: float = 0.05
                        ) -> ClassMembershipReport:
    """Diagnose ``rho in C_beta`` along a truncation family.

    Every finite truncation is trace class, so membership is read off from
    how ``Tr rho_N^beta`` behaves as ``N`` doubles.  A row counts as Cauchy
    when its last relative increment is below ``tol``, or when successive
    increments shrink like ``N^(-a)`` with ``a >= rate_floor`` (a summable
    tail).  Constant or growing increments mean divergence.

    Parameters
    ----------
    family : callable
        ``family(N)`` returns a spectrum (1-D) or a Hamiltonian (2-D) with
        ``H >= I``.
    beta_grid, n_list : sequences
        ``n_list`` should be successive doublings.
    """
    betas = np.asarray(sorted(beta_grid), dtype=float)
    if np.any(betas <= 0) or np.any(betas > 1):
        raise ValueError('beta grid must lie in (0, 1]')
    ns = np.asarray(n_list, dtype=int)
    if ns.size < 3 or np.any(np.diff(ns) <= 0):
        raise ValueError('need at least three increasing truncation sizes')
    notes = []
    spectra = [_spectrum_of(family, int(n)) for n in ns]
    for n, s in zip(ns, spectra):
        if s[0] < 1.0 - SPECTRUM_FLOOR_TOL:
            raise ValueError(f'family violates H >= I at N={n}')
    for (n0, s0), (n1, s1) in zip(zip(ns, spectra), zip(ns[1:], spectra[1:])):
        if s1.size < s0.size or not np.allclose(s1[:s0.size], s0,
                                                rtol=1e-12, atol=1e-12):
            notes.append(f'non-monotone truncation family between N={n0} '
                         f'and N={n1}')
    if notes:
        warnings.warn('; '.join(notes), RuntimeWarning, stacklevel=2)

    values = np.array([[trace_rho_power(s, b) for s in spectra] for b in betas])
    incr = np.abs(np.diff(values, axis=1)) / np.maximum(np.abs(values[:, 1:]),
                                                        np.finfo(float).tiny)
    # Tail rate from the unnormalized sums Tr exp(-beta H): the slowly
    # settling normalization Z^beta would otherwise mask divergence.
    raw = np.array([[np.exp(logsumexp(-b * s)) for s in spectra] for b in betas])
    raw_incr = np.abs(np.diff(raw, axis=1))
    with np.errstate(divide='ignore', invalid='ignore'):
        rates = -np.log2(raw_incr[:, -1] / raw_incr[:, -2])
    cauchy = (incr[:, -1] <= tol) | ((incr[:, -2] > tol) & (rates >= rate_floor))
    # Settling must persist for every larger beta.
    settled = np.array([bool(np.all(cauchy[i:])) for i in range(betas.size)])
    effective = float(betas[np.argmax(settled)]) if settled.any() else float('nan')
    return ClassMembershipReport(betas, ns, values, incr, rates, cauchy,
                                 effective, notes)
