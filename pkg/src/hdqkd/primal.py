"""Feasible primal values for the guessing-probability problem.

Any POVM ``{K_l}`` on the joint space splits the observed state as
``rho = sum_l sigma_l`` with ``sigma_l = sqrt(rho) K_l sqrt(rho) >= 0``. The
decomposition reproduces every witness value generated from ``rho``, so
``sum_l Tr[sigma_l (|l><l| (x) 1)]`` is an achievable guessing probability
and must not exceed any dual bound built from the same data.
"""
from dataclasses import dataclass

import numpy as np

from hdqkd import spectra
from hdqkd.errors import ConfigError

SANDWICH_TOL = 1e-7


@dataclass(frozen=True)
class PrimalSample:
    value: float
    seed: object = None
    outcomes: int = 0


@dataclass(frozen=True)
class SandwichReport:
    bound: float
    n_samples: int
    max_sample: float
    gap: float
    violations: int
    seed: int

    @property
    def passed(self):
        return self.violations == 0


def _inv_sqrt(m):
    return spectra.matrix_function(m, lambda w: 1.0 / np.sqrt(w))


def sqrt_psd(m):
    """Square root of a PSD matrix, negative roundoff eigenvalues clamped to 0."""
    return spectra.matrix_function(m, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def random_povm(dim, outcomes, seed):
    """``outcomes`` random PSD operators on ``C^dim`` summing to the identity.

    Wishart draws ``A_l`` are normalised as ``S^-1/2 A_l S^-1/2`` with
    ``S = sum_l A_l``; the last element is taken as the remainder.
    """
    if outcomes < 1:
        raise ConfigError("a POVM needs at least one outcome")
    if outcomes == 1:
        return [np.eye(dim, dtype=np.complex128)]
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        draws.append(g @ g.conj().T)
    s_inv = _inv_sqrt(sum(draws))
    out = [s_inv @ a @ s_inv for a in draws[:-1]]
    out = [0.5 * (k + k.conj().T) for k in out]
    # the last element absorbs the roundoff so the sum is the identity
    out.append(np.eye(dim) - sum(out))
    return out


def basis_povm(d):
    """``|l><l| (x) 1`` for ``l = 0..d-1``."""
    out = []
    for ell in range(d):
        proj = np.zeros((d, d))
        proj[ell, ell] = 1.0
        out.append(np.kron(proj, np.eye(d)).astype(np.complex128))
    return out


def uniform_povm(d):
    return [np.eye(d * d, dtype=np.complex128) / d for _ in range(d)]


def _value(root, povm, d):
    total = 0.0
    for ell, k in enumerate(povm):
        sigma = root @ k @ root
        idx = np.arange(ell * d, (ell + 1) * d)
        total += float(np.trace(sigma[np.ix_(idx, idx)]).real)
    return total


def primal_sample_value(rho, povm, seed=None, root=None):
    """Guessing probability of the decomposition induced by ``povm``."""
    d = rho.dim
    if len(povm) != d:
        raise ConfigError(f"need {d} POVM elements, got {len(povm)}")
    if any(np.shape(k) != (d * d, d * d) for k in povm):
        raise ConfigError(f"POVM elements must be {d * d}x{d * d}")
    if root is None:
        root = sqrt_psd(np.asarray(rho.to_matrix()))
    return PrimalSample(_value(root, povm, d), seed, len(povm))


def sandwich_check(bound, rho, n_samples, seed, tol=SANDWICH_TOL):
    """Compare a dual bound against ``n_samples`` random primal values."""
    value = float(getattr(bound, "p_guess_ub", bound))
    d = rho.dim
    root = sqrt_psd(np.asarray(rho.to_matrix()))
    seeds = np.random.SeedSequence(seed).spawn(n_samples)
    samples = [primal_sample_value(rho, random_povm(d * d, d, s), s, root).value for s in seeds]
    best = max(samples) if samples else 0.0
    violations = sum(s > value + tol for s in samples)
    return SandwichReport(value, n_samples, best, value - best, int(violations), seed)
