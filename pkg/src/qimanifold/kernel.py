"""Simplex integrals of exponentials, i.e. divided differences of ``exp(-x)``.

``K(x_1..x_n) = int_{simplex} exp(-sum_k a_k x_k) da`` over
``{a_k >= 0, sum a_k = 1}`` with Lebesgue measure on the first ``n - 1``
coordinates.  By Hermite-Genocchi this is ``g[-x_1, ..., -x_n]`` for
``g = exp``, and Opitz' theorem reads it off the top-right entry of
``expm(J)``, ``J`` bidiagonal with ``-x`` on the diagonal and ones above it.
Equal nodes need no special casing.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import comb

import mpmath
import numpy as np

# Node spreads above this go through extended precision.
WIDE_SPAN = 40.0
MP_DPS = 50
TAYLOR_DEGREE = 18


def _opitz_matrices(nodes: np.ndarray) -> np.ndarray:
    """Stack of bidiagonal matrices, one per row of ``nodes``."""
    m, n = nodes.shape
    j = np.zeros((m, n, n))
    idx = np.arange(n)
    j[:, idx, idx] = -nodes
    j[:, idx[:-1], idx[1:]] = 1.0
    return j


def expm_stack(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack of small matrices.

    Scaling and squaring around a degree-18 Taylor polynomial, with the
    scaling chosen per matrix so that ``||A / 2^s||_1 <= 1/2``.
    """
    a = np.asarray(a, dtype=float)
    norms = np.abs(a).sum(axis=-2).max(axis=-1)
    with np.errstate(divide='ignore'):
        s = np.maximum(0, np.ceil(np.log2(norms / 0.5))).astype(int)
    out = np.empty_like(a)
    eye = np.eye(a.shape[-1])
    for steps in np.unique(s):
        sel = s == steps
        b = a[sel] / 2.0 ** steps
        p = np.broadcast_to(eye, b.shape).copy()
        for k in range(TAYLOR_DEGREE, 0, -1):
            p = eye + (b @ p) / k
        for _ in range(steps):
            p = p @ p
        out[sel] = p
    return out


def _kernel_mp(nodes) -> float:
    with mpmath.workdps(MP_DPS):
        n = len(nodes)
        j = mpmath.zeros(n, n)
        for i, x in enumerate(nodes):
            j[i, i] = -mpmath.mpf(float(x))
            if i + 1 < n:
                j[i, i + 1] = 1
        return float(mpmath.expm(j)[0, n - 1])


def simplex_kernels(nodes) -> np.ndarray:
    """Vectorized :func:`simplex_kernel` over the rows of an ``(m, n)`` array."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    m, n = nodes.shape
    if n == 0:
        raise ValueError('need at least one node')
    lo = nodes.min(axis=1)
    shifted = nodes - lo[:, None]
    out = np.empty(m)
    if n == 1:
        out[:] = 1.0
    else:
        wide = shifted.max(axis=1) > WIDE_SPAN
        narrow = ~wide
        if narrow.any():
            e = expm_stack(_opitz_matrices(shifted[narrow]))
            out[narrow] = e[:, 0, n - 1]
        for i in np.flatnonzero(wide):
            out[i] = _kernel_mp(shifted[i])
    return out * np.exp(-lo)


def simplex_kernel(nodes) -> float:
    """``int_{simplex} exp(-sum a_k x_k) da`` for the given nodes.

    >>> round(simplex_kernel([2.0, 2.0, 2.0]) / np.exp(-2.0), 12)
    0.5
    """
    return float(simplex_kernels(np.asarray(nodes, dtype=float)[None, :])[0])


def _multiset_rank(sorted_idx: np.ndarray) -> np.ndarray:
    """Colex rank of sorted index tuples among multisets of their size."""
    n = sorted_idx.shape[-1]
    c = sorted_idx + np.arange(n)
    top = int(c.max()) + 1 if c.size else 1
    table = np.array([[comb(v, k + 1) for k in range(n)] for v in range(top)],
                     dtype=np.int64)
    return sum(table[c[..., k], k] for k in range(n))


@lru_cache(maxsize=32)
def rank_tensor(d: int, n: int) -> np.ndarray:
    """Multiset rank of every index tuple in ``range(d) ** n``.

    Depends only on the shape, so it is shared by all spectra of size ``d``.
    """
    dtype = np.int32 if comb(d + n - 1, n) < 2 ** 31 else np.int64
    out = np.empty((d,) * n, dtype=dtype)
    if n == 1:
        out[:] = np.arange(d)
        out.setflags(write=False)
        return out
    rest = np.indices((d,) * (n - 1)).reshape(n - 1, -1).T
    for first in range(d):
        grids = np.concatenate([np.full((rest.shape[0], 1), first), rest], axis=1)
        out[first] = _multiset_rank(np.sort(grids, axis=1)).reshape((d,) * (n - 1))
    out.setflags(write=False)
    return out


class KernelCache:
    """Kernel values of every node multiset drawn from one spectrum.

    Each distinct multiset is evaluated once; :meth:`slice` gathers the
    ordered tensor ``K[i_1 = first, i_2, ..., i_n]`` from the cache.
    """

    def __init__(self, energies, n: int):
        if n < 1:
            raise ValueError('order must be at least 1')
        self.energies = np.asarray(energies, dtype=float)
        self.n = n
        d = self.energies.size
        combos = np.array(
            list(itertools.combinations_with_replacement(range(d), n)),
            dtype=np.int64)
        self.values = np.empty(comb(d + n - 1, n))
        self.values[_multiset_rank(combos)] = simplex_kernels(self.energies[combos])
        self._ranks = rank_tensor(d, n)

    def slice(self, first: int) -> np.ndarray:
        return self.values[self._ranks[first]]

    def tensor(self) -> np.ndarray:
        return self.values[self._ranks]


def kernel_tensor(energies, n: int) -> np.ndarray:
    """``K[i_1, ..., i_n] = simplex_kernel(E_{i_1}, ..., E_{i_n})``."""
    return KernelCache(energies, n).tensor()
