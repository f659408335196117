"""Largest-eigenvalue computations.

Dense Hermitian matrices go through cyclic Jacobi (complex input via the real
embedding ``[[A, -B], [B, A]]`` of ``A + iB``). For the band/off-diagonal
witness pair the matrices ``M_l`` split into the span of ``|i,i>`` and its
complement. On the first sector ``M_l`` is a rank-one update ``e_l e_l^T - y Q``
of a fixed band matrix, so one decomposition of ``Q`` serves every ``l``
through the secular equation. On the complement it is diagonal.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from hdqkd import kernels
from hdqkd.errors import SymmetryError

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class SpectralResult:
    value: float
    vector: np.ndarray
    residual: float


def _check_hermitian(m, tol):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {m.shape}")
    defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if defect > tol:
        raise SymmetryError(f"matrix is not Hermitian (defect {defect:.3e})")
    return 0.5 * (m + m.conj().T)


def _embed(m):
    a, b = m.real, m.imag
    return np.block([[a, -b], [b, a]])


def eigh(m, tol=HERMITIAN_TOL):
    """Eigenvalues (ascending) and eigenvectors of a real symmetric matrix."""
    m = _check_hermitian(m, tol)
    if np.iscomplexobj(m):
        raise TypeError("eigh handles real symmetric input; use eigvalsh or matrix_function")
    w, v, _ = kernels.jacobi_eigh(m)
    order = np.argsort(w)
    return w[order], v[:, order]


def eigvalsh(m, tol=HERMITIAN_TOL):
    """Eigenvalues of a Hermitian matrix, ascending."""
    m = _check_hermitian(m, tol)
    if np.iscomplexobj(m) and np.any(m.imag != 0.0):
        w, _, _ = kernels.jacobi_eigh(_embed(m))
        return np.sort(w)[::2]
    w, _, _ = kernels.jacobi_eigh(np.real(m))
    return np.sort(w)


def matrix_function(m, func, tol=HERMITIAN_TOL):
    """Apply ``func`` to the spectrum of a Hermitian matrix."""
    m = _check_hermitian(m, tol)
    if np.iscomplexobj(m) and np.any(m.imag != 0.0):
        n = m.shape[0]
        w, v, _ = kernels.jacobi_eigh(_embed(m))
        big = (v * func(w)) @ v.T
        return big[:n, :n] + 1j * big[n:, :n]
    w, v, _ = kernels.jacobi_eigh(np.real(m))
    out = (v * func(w)) @ v.T
    return out.astype(m.dtype) if np.iscomplexobj(m) else out


def lambda_max_dense(m, tol=HERMITIAN_TOL):
    """Largest eigenvalue of a Hermitian matrix with its eigenvector and residual."""
    m = _check_hermitian(m, tol)
    complex_input = np.iscomplexobj(m) and np.any(m.imag != 0.0)
    if complex_input:
        n = m.shape[0]
        w, v, _ = kernels.jacobi_eigh(_embed(m))
        top = int(np.argmax(w))
        vec = v[:n, top] + 1j * v[n:, top]
    else:
        w, v, _ = kernels.jacobi_eigh(np.real(m))
        top = int(np.argmax(w))
        vec = v[:, top].astype(m.dtype)
    vec = vec / np.linalg.norm(vec)
    value = float(w[top])
    residual = float(np.linalg.norm(m @ vec - value * vec))
    return SpectralResult(value, vec, residual)


def lambda_max_blockwise(m, tol=HERMITIAN_TOL):
    """Largest eigenvalue of a dense Hermitian matrix, solved per connected block.

    Exact: the sparsity graph of ``m`` is split into connected components and
    each principal block is diagonalised separately.
    """
    from scipy.sparse.csgraph import connected_components

    m = _check_hermitian(m, tol)
    ncomp, labels = connected_components(m != 0, directed=False)
    best = -np.inf
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        if idx.size == 1:
            best = max(best, float(np.real(m[idx[0], idx[0]])))
        else:
            best = max(best, float(eigvalsh(m[np.ix_(idx, idx)])[-1]))
    return best


def band_matrix(q):
    """Symmetric Toeplitz matrix ``Q[i, j] = q[|i - j|]``."""
    q = np.asarray(q, dtype=np.float64)
    i = np.arange(q.size)
    return q[np.abs(i[:, None] - i[None, :])]


class BlockedSpectrum:
    """``max_l`` spectra of ``|l><l| (x) 1 - y W1 - t W2`` for the band/off-diagonal pair.

    ``q`` are the band coefficients of ``W1`` (``None`` if absent) and ``p``
    the coefficient of ``W2`` (``None`` if absent); ``dim`` is required when
    ``q`` is absent.
    """

    def __init__(self, q=None, p=None, dim=None):
        if q is None and dim is None:
            raise ValueError("dim is required without band coefficients")
        self.q = None if q is None else tuple(float(x) for x in q)
        self.p = None if p is None else float(p)
        self.dim = len(self.q) if self.q is not None else int(dim)
        if self.q is not None:
            self.eigvals, self.weights = _band_decomposition(self.q)

    def diag_sector(self, y):
        """Largest eigenvalue of ``e_l e_l^T - y Q`` for every ``l``."""
        if self.q is None or y == 0.0:
            return np.ones(self.dim)
        return kernels.secular_max_root(-y * self.eigvals, self.weights)

    def off_sector(self, t):
        """The two eigenvalues on the ``|i,j>, i != j`` sector: rows with and without ``i = l``."""
        pt = 0.0 if self.p is None else self.p * t
        return 1.0 - pt, -pt

    def lambda_max(self, y=0.0, t=0.0):
        with_l, without_l = self.off_sector(t)
        return np.maximum(self.diag_sector(y), max(with_l, without_l))


@lru_cache(maxsize=64)
def _band_decomposition(q):
    lam, vec = eigh(band_matrix(q))
    return lam, np.ascontiguousarray(vec**2)


def lambda_max_blocked(ell, q, p, y1, tau):
    """``lambda_max(M_ell)`` for the pair (W1 with band ``q``, W2 with weight ``p``)."""
    spec = BlockedSpectrum(q, p)
    if not 0 <= ell < spec.dim:
        raise IndexError(f"ell={ell} outside 0..{spec.dim - 1}")
    diag = spec.diag_sector(y1)[ell]
    with_l, without_l = spec.off_sector(tau)
    return float(max(diag, with_l, without_l))
