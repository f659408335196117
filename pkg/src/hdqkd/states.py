"""Bipartite qudit states on the temporal space of Alice and Bob.

Basis states ``|i,j>`` are stored at flat index ``i * d + j``. Two
representations share one read interface (``dim``, ``entries``,
``diagonal``, ``to_matrix``): :class:`DensityMatrix` holds the dense
``d^2 x d^2`` matrix, :class:`IsotropicState` evaluates the noise model
entry by entry so that large ``d`` never needs the dense matrix.
"""
from dataclasses import dataclass, field

import numpy as np

from hdqkd import spectra
from hdqkd.errors import DomainError, EmptySubspaceError, InvalidDimensionError

TRACE_TOL = 1e-12
PSD_TOL = 1e-10
HERMITIAN_TOL = 1e-12
EMPTY_WEIGHT = 1e-14


def _check_dim(d):
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"local dimension must be an integer >= 2, got {d}")
    return int(d)


def _check_visibility(v):
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {v}")
    return v


def pair_index(i, j, d):
    return np.asarray(i) * d + np.asarray(j)


class DensityMatrix:
    """Dense density matrix of a ``d x d`` bipartite system."""

    def __init__(self, dim, matrix):
        matrix = np.array(matrix, dtype=np.complex128)
        n = dim * dim
        if matrix.shape != (n, n):
            raise InvalidDimensionError(f"expected a {n}x{n} matrix for d={dim}, got {matrix.shape}")
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        self.dim = int(dim)
        self.matrix = matrix

    @property
    def is_real(self):
        return not np.any(self.matrix.imag)

    def entries(self, rows, cols):
        return self.matrix[np.asarray(rows), np.asarray(cols)]

    def diagonal(self):
        return self.matrix.diagonal().real.copy()

    def to_matrix(self):
        return self.matrix

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True)
class IsotropicState:
    """``v |Phi><Phi| + (1 - v) 1 / d^2`` with ``|Phi> = sum_k |kk> / sqrt(d)``."""

    dim: int
    visibility: float

    def __post_init__(self):
        object.__setattr__(self, "dim", _check_dim(self.dim))
        object.__setattr__(self, "visibility", _check_visibility(self.visibility))

    is_real = True

    def entries(self, rows, cols):
        d, v = self.dim, self.visibility
        rows, cols = np.asarray(rows), np.asarray(cols)
        i, j = np.divmod(rows, d)
        k, l = np.divmod(cols, d)
        coherent = (i == j) & (k == l)
        out = v / d * coherent + (1.0 - v) / d**2 * (rows == cols)
        return out.astype(np.complex128)

    def diagonal(self):
        n = self.dim * self.dim
        idx = np.arange(n)
        return self.entries(idx, idx).real

    def to_matrix(self):
        d = self.dim
        phi = np.zeros(d * d)
        phi[pair_index(np.arange(d), np.arange(d), d)] = 1.0 / np.sqrt(d)
        m = self.visibility * np.outer(phi, phi) + (1.0 - self.visibility) / d**2 * np.eye(d * d)
        return m.astype(np.complex128)

    def to_density_matrix(self):
        return DensityMatrix(self.dim, self.to_matrix())


@dataclass(frozen=True)
class NoiseModelSpec:
    visibility: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "dim", _check_dim(self.dim))
        object.__setattr__(self, "visibility", _check_visibility(self.visibility))

    def state(self):
        return IsotropicState(self.dim, self.visibility)


@dataclass(frozen=True)
class SubspacePartition:
    dim: int
    block_size: int
    blocks: tuple = field(default=())

    def __post_init__(self):
        d, size = int(self.dim), int(self.block_size)
        if size < 1 or d % size:
            raise DomainError(f"block size {size} does not divide d={d}")
        blocks = self.blocks or tuple(tuple(range(m * size, (m + 1) * size)) for m in range(d // size))
        blocks = tuple(tuple(int(x) for x in b) for b in blocks)
        flat = sorted(x for b in blocks for x in b)
        if flat != list(range(d)):
            raise DomainError("blocks must partition {0, ..., d-1}")
        if any(len(b) != size for b in blocks):
            raise DomainError("all blocks must have the common block size")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "block_size", size)
        object.__setattr__(self, "blocks", blocks)

    @property
    def count(self):
        return len(self.blocks)

    @classmethod
    def from_blocks(cls, dim, blocks):
        blocks = [tuple(b) for b in blocks]
        return cls(dim, len(blocks[0]) if blocks else 0, tuple(blocks))


def max_entangled(d):
    """``|Phi><Phi|`` with ``|Phi> = sum_k |kk> / sqrt(d)``."""
    d = _check_dim(d)
    return IsotropicState(d, 1.0).to_density_matrix()


def isotropic(d, v):
    """Dense isotropic state ``v |Phi><Phi| + (1 - v) 1 / d^2``."""
    return IsotropicState(d, v).to_density_matrix()


def project_subspace(rho, block):
    """Condition ``rho`` on both parties landing in ``block``.

    Returns ``(weight, conditional)`` with the conditional state re-indexed to
    local dimension ``len(block)``.
    """
    block = np.asarray(sorted(int(b) for b in block))
    d = rho.dim
    if block.size == 0 or block.min() < 0 or block.max() >= d:
        raise DomainError(f"block {block.tolist()} not inside 0..{d - 1}")
    size = block.size
    if isinstance(rho, IsotropicState):
        v = rho.visibility
        weight = v * size / d + (1.0 - v) * size**2 / d**2
        if weight < EMPTY_WEIGHT:
            raise EmptySubspaceError(f"subspace weight {weight:.3e} too small to renormalise")
        if size == 1:
            return weight, DensityMatrix(1, [[1.0]])
        return weight, IsotropicState(size, v * size / d / weight)
    idx = pair_index(block[:, None], block[None, :], d).ravel()
    sub = rho.to_matrix()[np.ix_(idx, idx)]
    weight = float(np.trace(sub).real)
    if weight < EMPTY_WEIGHT:
        raise EmptySubspaceError(f"subspace weight {weight:.3e} too small to renormalise")
    return weight, DensityMatrix(size, sub / weight)


@dataclass(frozen=True)
class Diagnostics:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    passed: bool


def validate(rho):
    """Report Hermiticity, trace and positivity defects of a state or raw matrix."""
    m = np.asarray(rho.to_matrix() if hasattr(rho, "to_matrix") else rho)
    herm = float(np.max(np.abs(m - m.conj().T)))
    trace = float(abs(np.trace(m).real - 1.0) + abs(np.trace(m).imag))
    min_eig = float(spectra.eigvalsh(0.5 * (m + m.conj().T))[0])
    passed = herm <= HERMITIAN_TOL and trace <= TRACE_TOL and min_eig >= -PSD_TOL
    return Diagnostics(herm, trace, min_eig, passed)
