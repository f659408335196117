"""Witness observables and the constraints they induce.

``W1 = q0 sum_i |ii><ii| + sum_{z>=1} q_z sum_i (|ii><i+z,i+z| + h.c.)`` acts
on the span of ``|i,i>`` as the band matrix ``Q[i,j] = q_|i-j|``.
``W2 = p sum_{i != j} |ij><ij|`` is ``p`` times the projector onto the
complementary sector. The expectation of ``W2`` follows from the arrival
table alone; ``W1`` needs the real parts of the ``|kk>`` coherences, of
which only the first band is measured and the rest is bounded by completion.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from hdqkd import completion
from hdqkd.errors import ConfigError, DataError, PresetDimensionError
from hdqkd.spectra import band_matrix
from hdqkd.states import pair_index

NORM_TOL = 1e-9


class AmbiguousPresetWarning(UserWarning):
    """A preset leaves a coefficient unspecified and a default was used."""


@dataclass(frozen=True)
class BandDiagonalPairWitness:
    dim: int
    q: tuple

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        if len(q) != self.dim:
            raise ConfigError(f"need {self.dim} band coefficients, got {len(q)}")
        if not all(math.isfinite(x) for x in q):
            raise ConfigError("band coefficients must be finite")
        object.__setattr__(self, "q", q)

    def sector(self):
        return band_matrix(self.q)

    def dense(self):
        d = self.dim
        idx = pair_index(np.arange(d), np.arange(d), d)
        out = np.zeros((d * d, d * d))
        out[np.ix_(idx, idx)] = self.sector()
        return out

    def norm_bound(self):
        return float(np.max(np.sum(np.abs(self.sector()), axis=1)))


@dataclass(frozen=True)
class OffDiagonalProjectorWitness:
    dim: int
    p: float

    def __post_init__(self):
        if not math.isfinite(self.p):
            raise ConfigError("p must be finite")
        object.__setattr__(self, "p", float(self.p))

    def dense(self):
        d = self.dim
        mask = ~np.eye(d, dtype=bool)
        return np.diag(self.p * mask.ravel().astype(float))

    def norm_bound(self):
        return abs(self.p)


@dataclass(frozen=True)
class GenericWitness:
    dim: int
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.array(self.matrix)
        n = self.dim * self.dim
        if m.shape != (n, n):
            raise ConfigError(f"witness must be {n}x{n}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ConfigError("witness matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def dense(self):
        return self.matrix

    def norm_bound(self):
        return float(np.linalg.norm(self.matrix))


@dataclass(frozen=True)
class Equality:
    value: float


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float


@dataclass(frozen=True)
class WitnessConstraint:
    operator: object
    kind: object

    def __post_init__(self):
        bound = self.operator.norm_bound() + NORM_TOL
        if isinstance(self.kind, Equality):
            values = (self.kind.value,)
        elif isinstance(self.kind, Interval):
            if self.kind.lower > self.kind.upper:
                raise DataError(f"interval [{self.kind.lower}, {self.kind.upper}] is empty")
            values = (self.kind.lower, self.kind.upper)
        else:
            raise ConfigError(f"unknown constraint kind {self.kind!r}")
        # an interval may be wider than the attainable range, but not disjoint from it
        if isinstance(self.kind, Equality) and abs(values[0]) > bound:
            raise DataError(f"expectation {values[0]:.6g} exceeds the operator norm bound {bound:.6g}")
        if isinstance(self.kind, Interval) and (self.kind.lower > bound or self.kind.upper < -bound):
            raise DataError("interval lies outside the operator norm bound")

    @property
    def is_equality(self):
        return isinstance(self.kind, Equality)

    @property
    def dim(self):
        return self.operator.dim


def expectation(operator, rho):
    """``Tr[rho W]`` evaluated directly on a state."""
    d = rho.dim
    if isinstance(operator, BandDiagonalPairWitness):
        idx = pair_index(np.arange(d), np.arange(d), d)
        sub = rho.entries(idx[:, None].repeat(d, 1), idx[None, :].repeat(d, 0))
        return float(np.real(np.sum(operator.sector() * sub.T)))
    if isinstance(operator, OffDiagonalProjectorWitness):
        diag = np.asarray(rho.diagonal()).reshape(d, d)
        return float(operator.p * (diag.sum() - np.trace(diag)))
    return float(np.real(np.trace(rho.to_matrix() @ operator.dense())))


def _apply_overrides(q, overrides):
    q = list(q)
    for z, value in (overrides or {}).items():
        z = int(z)
        if not 0 <= z < len(q):
            raise ConfigError(f"override index {z} outside 0..{len(q) - 1}")
        q[z] = float(value)
    return q


def kh1_preset(d=16, q_overrides=None, p=1.0):
    """Band witness with ``q0=-1, q2=1, q3=2.7, q4=0.47`` and zero beyond; ``q1`` defaults to 0."""
    if d != 16:
        raise PresetDimensionError(f"KH1 is defined for d=16, got d={d}")
    q = [-1.0, 0.0, 1.0, 2.7, 0.47] + [0.0] * 11
    overrides = {int(k): v for k, v in (q_overrides or {}).items()}
    if 1 not in overrides:
        warnings.warn("KH1 leaves q1 unspecified; using q1=0", AmbiguousPresetWarning, stacklevel=2)
    return BandDiagonalPairWitness(d, tuple(_apply_overrides(q, overrides))), OffDiagonalProjectorWitness(d, p)


def kh2_preset(d=16, q_overrides=None, p=1.0):
    """Band witness with ``q0=0``, ``q1..q11=1`` and ``q12..q15=0``."""
    if d != 16:
        raise PresetDimensionError(f"KH2 is defined for d=16, got d={d}")
    q = [0.0] + [1.0] * 11 + [0.0] * 4
    return BandDiagonalPairWitness(d, tuple(_apply_overrides(q, q_overrides))), OffDiagonalProjectorWitness(d, p)


def khexp_preset(d, c=0.75, s=4.0, q0=0.0, q_overrides=None, p=1.0):
    """Exponential band witness ``q_z = exp(-c (z - s))`` for ``z >= 1``."""
    if int(d) != d or d < 2:
        raise ConfigError(f"KHexp needs d >= 2, got {d}")
    q = [float(q0)] + [math.exp(-c * (z - s)) for z in range(1, int(d))]
    return BandDiagonalPairWitness(int(d), tuple(_apply_overrides(q, q_overrides))), OffDiagonalProjectorWitness(
        int(d), p
    )


PRESETS = {"kh1": kh1_preset, "kh2": kh2_preset, "khexp": khexp_preset}


def witness_pair(config, d):
    """Build ``(W1, W2)`` from a preset mapping such as ``{"name": "khexp", "c": 0.75}``."""
    config = dict(config)
    name = str(config.pop("name", config.pop("preset", ""))).lower()
    if name not in PRESETS:
        raise ConfigError(f"unknown witness preset {name!r}; choose from {sorted(PRESETS)}")
    config.pop("d", None)
    config.pop("label", None)
    allowed = {"kh1": {"q_overrides", "p"}, "kh2": {"q_overrides", "p"}, "khexp": {"c", "s", "q0", "q_overrides", "p"}}
    extra = set(config) - allowed[name]
    if extra:
        raise ConfigError(f"unexpected keys for preset {name}: {sorted(extra)}")
    return PRESETS[name](d, **config)


def expectation_w2(tt, p):
    """Equality constraint for ``W2`` from the arrival table."""
    tt = np.asarray(tt, dtype=np.float64)
    d = tt.shape[0]
    value = float(p) * float(tt.sum() - np.trace(tt))
    return WitnessConstraint(OffDiagonalProjectorWitness(d, p), Equality(value))


def sector_matrix(extracted):
    """Partially known real part of the ``|k,k>`` block.

    The diagonal comes from ``TT(k, k)``; the first band from the
    superposition data at ``i = j``: exact when both phase settings were
    recorded, otherwise ``[x-only lower bound, sqrt(TT TT)]``.
    """
    tt = extracted.diag
    d = tt.shape[0]
    r = completion.PartialRealSymmetric(np.clip(np.diag(tt), 0.0, None))
    for k in range(1, d):
        cs = math.sqrt(r.diag[k] * r.diag[k - 1])
        if (k, k) in extracted.re_offdiag_nn:
            value = extracted.re_offdiag_nn[(k, k)][0]
            r.set_known(k - 1, k, min(max(value, -cs), cs) if abs(value) <= cs + completion.CS_TOL else value)
        elif (k, k) in extracted.lower_bounds:
            lo = extracted.lower_bounds[(k, k)]
            r.set_interval(k - 1, k, min(max(lo, -cs), cs), cs)
    return r


def expectation_interval_w1(w1, tt, extracted=None, completed=None, max_passes=100):
    """Interval constraint for ``W1``.

    Band terms use the completed sector: with ``q_z >= 0`` a term contributes
    ``[2 q_z lo, 2 q_z hi]``, with ``q_z < 0`` the ends swap.
    """
    tt = np.asarray(tt, dtype=np.float64)
    d = w1.dim
    if completed is None:
        if extracted is None:
            raise ConfigError("need extracted elements or a completed sector")
        completed = completion.complete(sector_matrix(extracted), max_passes=max_passes)
    q = w1.q
    base = q[0] * float(np.trace(tt))
    lower = upper = base
    for z in range(1, d):
        if q[z] == 0.0:
            continue
        for i in range(d - z):
            lo, hi = completed.bounds(i, i + z)
            if q[z] > 0.0:
                lower += 2.0 * q[z] * lo
                upper += 2.0 * q[z] * hi
            else:
                lower += 2.0 * q[z] * hi
                upper += 2.0 * q[z] * lo
    return WitnessConstraint(w1, Interval(lower, upper))
