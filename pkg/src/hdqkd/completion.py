"""Interval completion of a partially known real PSD matrix.

For a PSD matrix ``r`` every 3x3 principal minor on ``(j, k, l)`` is
nonnegative. Seen as a function of ``r_jl`` the determinant is a downward
parabola, so known ``r_jk``, ``r_kl`` and diagonals confine ``r_jl`` to the
interval between its two roots

    (r_jk r_kl -+ sqrt((r_jj r_kk - r_jk^2)(r_kk r_ll - r_kl^2))) / r_kk.

Applying this over all pivots and iterating propagates information from the
measured band outward.
"""
import math

import numpy as np

from hdqkd import kernels
from hdqkd._pykernels import COS_PAD, angle_pad
from hdqkd.errors import DataError, InconsistentDataError, PivotDegenerateError

KNOWN = "known"
INTERVAL = "interval"
UNKNOWN = "unknown"

PIVOT_TOL = 1e-14
CS_TOL = 1e-10


class PartialRealSymmetric:
    """Symmetric matrix whose off-diagonal entries are Known, Interval or Unknown.

    The diagonal is always Known and nonnegative.
    """

    def __init__(self, diag):
        diag = np.asarray(diag, dtype=np.float64)
        if diag.ndim != 1:
            raise DataError("diagonal must be a vector")
        if np.any(diag < 0.0):
            raise DataError(f"diagonal entries must be >= 0, got min {diag.min():.3e}")
        n = diag.size
        self.n = n
        self.diag = diag
        self.lo = np.full((n, n), -np.inf)
        self.hi = np.full((n, n), np.inf)
        self.known = np.eye(n, dtype=bool)
        self.avail = np.eye(n, dtype=bool)
        np.fill_diagonal(self.lo, diag)
        np.fill_diagonal(self.hi, diag)
        self.passes = 0

    @classmethod
    def from_matrix(cls, matrix, mask=None):
        """Known entries of ``matrix`` where ``mask`` is true (all if omitted)."""
        matrix = np.asarray(matrix, dtype=np.float64)
        out = cls(np.diag(matrix))
        mask = np.ones_like(matrix, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        for j, l in zip(*np.nonzero(np.triu(mask | mask.T, 1))):
            out.set_known(j, l, matrix[j, l])
        return out

    def copy(self):
        out = PartialRealSymmetric.__new__(PartialRealSymmetric)
        out.n = self.n
        out.diag = self.diag.copy()
        out.lo, out.hi = self.lo.copy(), self.hi.copy()
        out.known, out.avail = self.known.copy(), self.avail.copy()
        out.passes = self.passes
        return out

    def _cs(self, j, l):
        return math.sqrt(self.diag[j] * self.diag[l])

    def set_known(self, j, l, value):
        if j == l:
            raise DataError("diagonal entries are fixed at construction")
        value = float(value)
        if abs(value) > self._cs(j, l) + CS_TOL:
            raise DataError(f"entry ({j},{l})={value:.6g} violates |r_jl| <= sqrt(r_jj r_ll)")
        for a, b in ((j, l), (l, j)):
            self.lo[a, b] = self.hi[a, b] = value
            self.known[a, b] = self.avail[a, b] = True

    def set_interval(self, j, l, lo, hi):
        if j == l:
            raise DataError("diagonal entries are fixed at construction")
        lo, hi = float(lo), float(hi)
        if lo > hi:
            raise DataError(f"interval for ({j},{l}) has lo > hi ({lo} > {hi})")
        for a, b in ((j, l), (l, j)):
            self.lo[a, b], self.hi[a, b] = lo, hi
            self.known[a, b] = False
            self.avail[a, b] = True

    def status(self, j, l):
        if self.known[j, l]:
            return KNOWN
        return INTERVAL if self.avail[j, l] else UNKNOWN

    def bounds(self, j, l):
        """Interval for ``r_jl``; Unknown entries get the 2x2-minor bound."""
        cs = self._cs(j, l)
        if not self.avail[j, l]:
            return -cs, cs
        return max(self.lo[j, l], -cs), min(self.hi[j, l], cs)

    def rows(self):
        """``(j, l, lo, hi, status)`` for ``j <= l``."""
        for j in range(self.n):
            for l in range(j, self.n):
                lo, hi = self.bounds(j, l)
                yield j, l, lo, hi, self.status(j, l)

    def total_width(self):
        lo = np.array([[self.bounds(j, l)[0] for l in range(self.n)] for j in range(self.n)])
        hi = np.array([[self.bounds(j, l)[1] for l in range(self.n)] for j in range(self.n)])
        return float(np.sum(hi - lo))


def minor_bounds(r, j, k, l):
    """Interval for ``r_jl`` implied by the ``(j, k, l)`` principal minor.

    Interval inputs give the envelope over their boxes.
    """
    if len({j, k, l}) < 3:
        raise ValueError("minor_bounds needs three distinct indices")
    if r.diag[k] <= PIVOT_TOL:
        raise PivotDegenerateError(f"pivot r[{k},{k}]={r.diag[k]:.3e} too small")
    for a, b in ((j, k), (k, l)):
        if not r.avail[a, b]:
            raise DataError(f"entry ({a},{b}) is unknown")
        cs = r._cs(a, b)
        if r.lo[a, b] > cs + CS_TOL or r.hi[a, b] < -cs - CS_TOL:
            raise InconsistentDataError(
                f"entry ({a},{b}) outside its 2x2 PSD range (negative radicand)", (j, k, l)
            )

    def angles(a, b):
        cs = r._cs(a, b)
        if cs == 0.0:
            return 0.0, math.pi
        ch = min(1.0, max(-1.0, r.hi[a, b] / cs))
        cl = min(1.0, max(-1.0, r.lo[a, b] / cs))
        pad_h, pad_l = float(angle_pad(ch)), float(angle_pad(cl))
        return max(math.acos(ch) - pad_h, 0.0), min(math.acos(cl) + pad_l, math.pi)

    a_min, a_max = angles(j, k)
    b_min, b_max = angles(k, l)
    s_min, s_max = a_min + b_min, a_max + b_max
    c_lo = -1.0 if s_min <= math.pi <= s_max else min(math.cos(s_min), math.cos(s_max))
    d_min, d_max = a_min - b_max, a_max - b_min
    c_hi = 1.0 if d_min <= 0.0 <= d_max else max(math.cos(d_min), math.cos(d_max))
    scale = r._cs(j, l)
    return scale * max(c_lo - COS_PAD, -1.0), scale * min(c_hi + COS_PAD, 1.0)


def complete(r, max_passes=100, tol=1e-12):
    """Propagate minor bounds to a fixpoint.

    Passes are synchronous: each one reads only the previous pass's state.
    Stops when no entry became available and no bound moved by more than
    ``tol``, or after ``max_passes``.
    """
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    out = r.copy()
    for n_pass in range(1, max_passes + 1):
        lo, hi, avail, bad = kernels.completion_pass(out.lo, out.hi, out.avail, out.known, out.diag, PIVOT_TOL)
        if bad is not None:
            j, k, l = bad
            raise InconsistentDataError(f"empty interval for entry ({j},{l}) via pivot {k}", bad)
        newly = np.any(avail & ~out.avail)
        was = out.avail & avail
        moved = 0.0
        if np.any(was):
            moved = max(
                float(np.max(np.abs(lo[was] - out.lo[was]))),
                float(np.max(np.abs(hi[was] - out.hi[was]))),
            )
        out.lo, out.hi, out.avail = lo, hi, avail
        out.passes = n_pass
        if not newly and moved <= tol:
            break
    return out
