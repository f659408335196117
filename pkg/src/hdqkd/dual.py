"""Dual bound on the guessing probability.

A dual point assigns a multiplier ``y_k`` to every equality witness and a
pair ``zL_j, zU_j >= 0`` to every interval witness. With

    M_l = |l><l| (x) 1 - sum_k y_k conj(W_k) - sum_j (zU_j - zL_j) conj(W_j)

and ``y0 = max_l lambda_max(M_l)`` the value

    y0 + sum_k y_k w_k + sum_j (zU_j wU_j - zL_j wL_j)

upper-bounds the guessing probability at every point, so minimisation can
stop anywhere. For a fixed net coefficient ``s = zU - zL`` the cheapest
split puts all weight on one side, which makes the interval cost
``s wU`` for ``s >= 0`` and ``s wL`` otherwise.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _nelder_mead
from scipy.optimize import minimize_scalar

from hdqkd import kernels, spectra
from hdqkd.errors import ConfigError, InconsistentDataError, InfeasiblePointError, InvariantViolation
from hdqkd.witnesses import BandDiagonalPairWitness, OffDiagonalProjectorWitness

FEAS_TOL = 1e-9
OBJ_TOL = 1e-10
SLOPE_TOL = 1e-12
# full d^2 x d^2 check up to this d, sector-wise beyond
DENSE_VERIFY_MAX_DIM = 8


@dataclass(frozen=True)
class DualPoint:
    y: tuple = ()
    zL: tuple = ()
    zU: tuple = ()

    def __post_init__(self):
        for name in ("y", "zL", "zU"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if len(self.zL) != len(self.zU):
            raise ConfigError("zL and zU must have the same length")


@dataclass(frozen=True)
class GuessBound:
    p_guess_ub: float
    point: DualPoint
    lambda_per_ell: tuple
    objective_trace: tuple = ()
    y0: float = math.nan


@dataclass(frozen=True)
class SolverOptions:
    seed: int = 0
    starts: int = 8
    max_evals: int = 2000
    tol: float = 1e-8
    fast_path: bool = True

    def __post_init__(self):
        if self.starts < 1:
            raise ConfigError("starts must be >= 1")
        if self.max_evals < 1:
            raise ConfigError("max_evals must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


@dataclass
class CertificateReport:
    passed: bool
    max_lambda: float
    objective: float
    violations: list = field(default_factory=list)


def _split(constraints):
    eq = [c for c in constraints if c.is_equality]
    iv = [c for c in constraints if not c.is_equality]
    return eq, iv


def _dim(constraints, dim):
    dims = {c.dim for c in constraints}
    if dim is not None:
        dims.add(int(dim))
    if len(dims) != 1:
        raise ConfigError(f"inconsistent or missing dimensions: {sorted(dims)}")
    return dims.pop()


def _check_point(point, constraints):
    eq, iv = _split(constraints)
    if len(point.y) != len(eq) or len(point.zL) != len(iv):
        raise ConfigError(
            f"point has {len(point.y)} y and {len(point.zL)} z entries for {len(eq)} equality "
            f"and {len(iv)} interval constraints"
        )
    if any(z < 0.0 for z in point.zL + point.zU):
        raise InfeasiblePointError("interval multipliers must be nonnegative")


def _coefficients(point, constraints):
    """Net coefficient of every constraint, in constraint order."""
    y, zl, zu = iter(point.y), iter(point.zL), iter(point.zU)
    return [next(y) if c.is_equality else next(zu) - next(zl) for c in constraints]


def _linear_term(point, constraints):
    eq, iv = _split(constraints)
    total = sum(yk * c.kind.value for yk, c in zip(point.y, eq))
    total += sum(u * c.kind.upper - l * c.kind.lower for l, u, c in zip(point.zL, point.zU, iv))
    return float(total)


def assemble_M(ell, constraints, point, dim=None):
    """Dense ``M_l`` for the given dual point."""
    d = _dim(constraints, dim)
    _check_point(point, constraints)
    if not 0 <= ell < d:
        raise ConfigError(f"ell={ell} outside 0..{d - 1}")
    proj = np.zeros(d)
    proj[ell] = 1.0
    m = np.kron(np.diag(proj), np.eye(d)).astype(np.complex128)
    for coeff, c in zip(_coefficients(point, constraints), constraints):
        if coeff != 0.0:
            m -= coeff * np.conj(c.operator.dense())
    return m if np.any(m.imag) else m.real


def _structured(constraints):
    return all(isinstance(c.operator, (BandDiagonalPairWitness, OffDiagonalProjectorWitness)) for c in constraints)


def _lambdas_structured(coeffs, constraints, d):
    q_eff = np.zeros(d)
    p_eff = 0.0
    bands = []
    for coeff, c in zip(coeffs, constraints):
        if isinstance(c.operator, BandDiagonalPairWitness):
            q_eff += coeff * np.asarray(c.operator.q)
            bands.append((coeff, c.operator.q))
        else:
            p_eff += coeff * c.operator.p
    if len(bands) == 1:
        diag = spectra.BlockedSpectrum(bands[0][1], dim=d).diag_sector(bands[0][0])
    elif bands:
        lam, vec = spectra.eigh(spectra.band_matrix(q_eff))
        diag = kernels.secular_max_root(-lam, np.ascontiguousarray(vec**2))
    else:
        diag = np.ones(d)
    # |i,j>, i != j: rows with i = l see 1 - p, the others -p
    return np.maximum(diag, max(1.0 - p_eff, -p_eff))


def _lambdas_dense(point, constraints, d):
    return np.array([spectra.lambda_max_dense(assemble_M(ell, constraints, point, d)).value for ell in range(d)])


def lambdas(point, constraints, dim=None, structured=True):
    """``lambda_max(M_l)`` for every ``l``."""
    d = _dim(constraints, dim)
    _check_point(point, constraints)
    if structured and _structured(constraints):
        return _lambdas_structured(_coefficients(point, constraints), constraints, d)
    return _lambdas_dense(point, constraints, d)


def objective(point, constraints, dim=None, structured=True):
    """Dual objective with ``y0 = max_l lambda_max(M_l)``."""
    lam = lambdas(point, constraints, dim, structured)
    return float(np.max(lam)) + _linear_term(point, constraints)


def _point_from_coefficients(coeffs, constraints):
    y, zl, zu = [], [], []
    for s, c in zip(coeffs, constraints):
        if c.is_equality:
            y.append(s)
        else:
            zu.append(max(s, 0.0))
            zl.append(max(-s, 0.0))
    return DualPoint(tuple(y), tuple(zl), tuple(zu))


def _cost(s, c):
    if c.is_equality:
        return s * c.kind.value
    return s * (c.kind.upper if s >= 0.0 else c.kind.lower)


def _tails(c):
    if c.is_equality:
        return c.kind.value, c.kind.value
    return c.kind.lower, c.kind.upper


def _eliminate_offdiag(a, c2):
    """``min_t max(a, 1 - p t) + cost(t)`` over the off-diagonal multiplier.

    The function is convex and piecewise linear with kinks at ``t = 0`` and
    ``t = (1 - a) / p``, so its minimum sits at one of them provided both
    tails rise.
    """
    if c2 is None or c2.operator.p == 0.0:
        return max(a, 1.0), 0.0
    p = c2.operator.p
    w_lo, w_hi = _tails(c2)
    slope_right = (-p if p < 0.0 else 0.0) + w_hi
    slope_left = (-p if p > 0.0 else 0.0) + w_lo
    if slope_right < -SLOPE_TOL or slope_left > SLOPE_TOL:
        raise InconsistentDataError("off-diagonal witness value admits no state; dual is unbounded")
    best = None
    for t in (0.0, (1.0 - a) / p):
        val = max(a, 1.0 - p * t, -p * t) + _cost(t, c2)
        if best is None or val < best[0]:
            best = (val, t)
    return best


class _FastPath:
    """One band witness plus at most one off-diagonal witness, reduced to one variable."""

    def __init__(self, constraints, d):
        self.constraints = constraints
        self.band = next((c for c in constraints if isinstance(c.operator, BandDiagonalPairWitness)), None)
        self.off = next((c for c in constraints if isinstance(c.operator, OffDiagonalProjectorWitness)), None)
        self.spectrum = spectra.BlockedSpectrum(self.band.operator.q, dim=d) if self.band is not None else None
        self.evals = 0

    @classmethod
    def applies(cls, constraints):
        bands = sum(isinstance(c.operator, BandDiagonalPairWitness) for c in constraints)
        offs = sum(isinstance(c.operator, OffDiagonalProjectorWitness) for c in constraints)
        return bands + offs == len(constraints) and bands <= 1 and offs <= 1 and len(constraints) > 0

    def scale(self):
        if self.band is None:
            return 1.0
        return 1.0 / max(float(np.max(np.abs(self.spectrum.eigvals))), 1e-300)

    def value(self, s):
        self.evals += 1
        a = float(np.max(self.spectrum.diag_sector(s))) if self.band is not None else 1.0
        val, t = _eliminate_offdiag(a, self.off)
        if self.band is not None:
            val += _cost(s, self.band)
        return val, t

    def coefficients(self, s, t):
        return [s if c is self.band else t for c in self.constraints]


def _nm_options(opts, n_vars, scale):
    return {"maxfev": opts.max_evals, "fatol": opts.tol, "xatol": opts.tol * scale, "disp": False}


def _minimize_fast(constraints, d, opts):
    fp = _FastPath(constraints, d)
    trace = []
    if fp.band is None:
        val, t = fp.value(0.0)
        trace.append(("closed-form", 1, val))
        return fp.coefficients(0.0, t), trace

    sc = fp.scale()
    f = lambda x: fp.value(float(np.atleast_1d(x)[0]))[0]
    grid = np.linspace(-4.0 * sc, 4.0 * sc, 17)
    seed_x = float(grid[int(np.argmin([f(x) for x in grid]))])
    rng = np.random.default_rng(opts.seed)
    starts = [0.0, sc, -sc, seed_x]
    while len(starts) < opts.starts:
        starts.append(float(rng.uniform(-4.0 * sc, 4.0 * sc)))
    starts = starts[: opts.starts]

    best_x, best_f = 0.0, f(0.0)
    for n, x0 in enumerate(starts):
        before = fp.evals
        res = _nelder_mead(
            f,
            np.array([x0]),
            method="Nelder-Mead",
            options=dict(_nm_options(opts, 1, sc), initial_simplex=np.array([[x0], [x0 + 0.5 * sc]])),
        )
        x, fx = float(res.x[0]), float(res.fun)
        trace.append((f"start-{n}", fp.evals - before, fx))
        if fx < best_f:
            best_x, best_f = x, fx

    # convex in s: a bounded Brent search around the simplex result sharpens it
    width = max(0.05 * abs(best_x), 0.01 * sc)
    before = fp.evals
    res = minimize_scalar(f, bounds=(best_x - width, best_x + width), method="bounded", options={"xatol": 1e-12})
    trace.append(("polish", fp.evals - before, float(res.fun)))
    if float(res.fun) < best_f:
        best_x, best_f = float(res.x), float(res.fun)
    _, t = fp.value(best_x)
    return fp.coefficients(best_x, t), trace


def _minimize_generic(constraints, d, opts):
    structured = opts.fast_path and _structured(constraints)
    n = len(constraints)
    evals = [0]

    def f(x):
        evals[0] += 1
        point = _point_from_coefficients(list(x), constraints)
        return objective(point, constraints, d, structured)

    scales = np.array([1.0 / max(c.operator.norm_bound(), 1e-300) for c in constraints])
    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(n)]
    # coarse line search along each coordinate
    grid = np.linspace(-4.0, 4.0, 9)
    for k in range(n):
        vals = []
        for g in grid:
            x = np.zeros(n)
            x[k] = g * scales[k]
            vals.append(f(x))
        x = np.zeros(n)
        x[k] = grid[int(np.argmin(vals))] * scales[k]
        starts.append(x)
    for k in range(n):
        for sign in (1.0, -1.0):
            x = np.zeros(n)
            x[k] = sign * scales[k]
            starts.append(x)
    while len(starts) < opts.starts:
        starts.append(rng.uniform(-2.0, 2.0, n) * scales)
    starts = starts[: opts.starts]

    trace = []
    best_x, best_f = np.zeros(n), f(np.zeros(n))
    for idx, x0 in enumerate(starts):
        before = evals[0]
        simplex = np.vstack([x0] + [x0 + 0.5 * scales[k] * np.eye(n)[k] for k in range(n)])
        res = _nelder_mead(
            f,
            x0,
            method="Nelder-Mead",
            options=dict(_nm_options(opts, n, float(np.min(scales))), initial_simplex=simplex),
        )
        trace.append((f"start-{idx}", evals[0] - before, float(res.fun)))
        if res.fun < best_f:
            best_x, best_f = np.array(res.x), float(res.fun)
    return list(best_x), trace


def minimize(constraints, dim=None, options=None):
    """Minimise the dual objective; the returned bound is certified."""
    opts = options or SolverOptions()
    constraints = list(constraints)
    d = _dim(constraints, dim)
    if not constraints:
        point = DualPoint()
        lam = tuple(float(x) for x in np.ones(d))
        bound = GuessBound(1.0, point, lam, (("trivial", 0, 1.0),), 1.0)
    else:
        if opts.fast_path and _FastPath.applies(constraints):
            coeffs, trace = _minimize_fast(constraints, d, opts)
        else:
            coeffs, trace = _minimize_generic(constraints, d, opts)
        point = _point_from_coefficients(coeffs, constraints)
        zero = _point_from_coefficients([0.0] * len(constraints), constraints)
        structured = opts.fast_path and _structured(constraints)
        lam = lambdas(point, constraints, d, structured)
        value = float(np.max(lam)) + _linear_term(point, constraints)
        if value > 1.0:
            # every visited point is feasible; never report worse than the trivial bound
            point, lam, value = zero, lambdas(zero, constraints, d, structured), 1.0
        y0 = float(np.max(lam))
        value = y0 + _linear_term(point, constraints)
        if value <= 0.0:
            raise InconsistentDataError(f"dual objective reached {value:.3e}; the witness data admit no state")
        bound = GuessBound(value, point, tuple(float(x) for x in lam), tuple(trace), y0)
    report = verify_certificate(bound, constraints, d)
    if not report.passed:
        raise InvariantViolation("emitted bound failed its certificate: " + "; ".join(report.violations))
    return bound


def _sector_parts(point, constraints, d):
    q_eff = np.zeros(d)
    p_eff = 0.0
    for coeff, c in zip(_coefficients(point, constraints), constraints):
        if isinstance(c.operator, BandDiagonalPairWitness):
            q_eff += coeff * np.asarray(c.operator.q)
        else:
            p_eff += coeff * c.operator.p
    return -spectra.band_matrix(q_eff), p_eff


def _check_sectors(y0, point, constraints, d):
    """Per-sector feasibility test for large ``d``.

    ``M_l`` is block diagonal over the ``|i,i>`` span and its complement. On
    the first block ``(y0 + tol) 1 - M_l`` must admit a Cholesky factor; the
    complement is diagonal. Returns ``{l: lambda_max}`` for failing ``l`` only.
    """
    sector, p_eff = _sector_parts(point, constraints, d)
    failing = {}
    shift = y0 + FEAS_TOL
    off = max(1.0 - p_eff, -p_eff)
    for ell in range(d):
        m = -sector
        m[np.diag_indices(d)] += shift
        m[ell, ell] -= 1.0
        try:
            np.linalg.cholesky(m)
            ok = shift >= off
        except np.linalg.LinAlgError:
            ok = False
        if not ok:
            block = sector.copy()
            block[ell, ell] += 1.0
            failing[ell] = max(spectra.lambda_max_dense(block).value, off)
    return failing


def verify_certificate(bound, constraints, dim=None):
    """Recompute every ``lambda_max(M_l)`` and check the emission contract."""
    constraints = list(constraints)
    d = _dim(constraints, dim)
    violations = []
    point = bound.point
    if any(z < 0.0 for z in point.zL + point.zU):
        violations.append("negative interval multiplier")
        return CertificateReport(False, math.nan, math.nan, violations)
    try:
        _check_point(point, constraints)
    except ConfigError as exc:
        return CertificateReport(False, math.nan, math.nan, [str(exc)])
    y0 = bound.y0 if not math.isnan(bound.y0) else float(np.max(bound.lambda_per_ell))
    if not constraints:
        lam = dict(enumerate(np.ones(d)))
    elif d <= DENSE_VERIFY_MAX_DIM or not _structured(constraints):
        lam = dict(enumerate(_lambdas_dense(point, constraints, d)))
    else:
        lam = _check_sectors(y0, point, constraints, d)
    for ell, value in lam.items():
        if y0 < value - FEAS_TOL:
            violations.append(f"y0={y0:.12g} below lambda_max(M_{ell})={value:.12g}")
    max_lambda = max(lam.values()) if lam else float(np.max(bound.lambda_per_ell))
    obj = y0 + _linear_term(point, constraints)
    if abs(obj - bound.p_guess_ub) > OBJ_TOL:
        violations.append(f"objective {obj:.15g} does not reproduce p_guess_ub={bound.p_guess_ub:.15g}")
    if not 0.0 < bound.p_guess_ub <= 1.0 + FEAS_TOL:
        violations.append(f"p_guess_ub={bound.p_guess_ub} outside (0, 1]")
    return CertificateReport(not violations, float(max_lambda), obj, violations)
