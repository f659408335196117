"""Time-of-arrival and temporal-superposition click statistics.

``TT(i, j)`` is the joint arrival probability of bins ``i`` and ``j``.
``SS[a, b, i, j, phiA, phiB]`` is the temporal-superposition click for
detector pair ``(a, b)``. Each party's interferometer mixes bin ``i`` with
bin ``i - 1`` at phase ``phi``. SS values use the normalisation in which the
four outcomes of one setting sum to the four ``TT`` cells they involve.

The real parts of the neighbouring coherences are recovered from the signed
combination ``D = SS11 - SS12 - SS21 + SS22`` at phases ``(0, 0)`` and
``(pi/2, pi/2)``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from hdqkd.errors import EmptySubspaceError, IncompleteSettingError
from hdqkd.states import pair_index

X_SETTING = (0.0, 0.0)
Y_SETTING = (math.pi / 2, math.pi / 2)
PHASE_TOL = 1e-6
OUTCOMES = ((1, 1), (1, 2), (2, 1), (2, 2))


def _same_phase(x, y):
    return abs(math.remainder(x - y, 2 * math.pi)) <= PHASE_TOL


@dataclass
class ClickTables:
    dim: int
    tt: np.ndarray
    ss: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tt = np.asarray(self.tt, dtype=np.float64)
        if self.tt.shape != (self.dim, self.dim):
            raise ValueError(f"TT must be {self.dim}x{self.dim}, got {self.tt.shape}")
        self._index = None

    def _build_index(self):
        index = {}
        for (a, b, i, j, pa, pb), value in self.ss.items():
            index.setdefault((i, j), []).append((pa, pb, a, b, value))
        self._index = index

    def pairs(self):
        """Bin pairs ``(i, j)`` with any temporal-superposition data."""
        if self._index is None:
            self._build_index()
        return sorted(self._index)

    def setting(self, i, j, phase_a, phase_b):
        """``{(a, b): SS}`` recorded at ``(i, j)`` for the given phases."""
        if self._index is None:
            self._build_index()
        return {
            (a, b): value
            for pa, pb, a, b, value in self._index.get((i, j), ())
            if _same_phase(pa, phase_a) and _same_phase(pb, phase_b)
        }


@dataclass
class ExtractedElements:
    dim: int
    diag: np.ndarray
    # (i, j) -> (Re<i,j|rho^T|i-1,j-1>, Re<i,j-1|rho^T|i-1,j>)
    re_offdiag_nn: dict = field(default_factory=dict)
    # (i, j) -> lower bound on Re<i,j|rho^T|i-1,j-1> from the x setting alone
    lower_bounds: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def toa_table(rho):
    """``TT(i, j) = <i,j|rho|i,j>``."""
    d = rho.dim
    return np.asarray(rho.diagonal(), dtype=np.float64).reshape(d, d)


def _check_bins(d, i, j):
    if not (1 <= i <= d - 1 and 1 <= j <= d - 1):
        raise IndexError(f"superposition bins need 1 <= i, j <= {d - 1}, got ({i}, {j})")


def _amplitudes(a, b, phase_a, phase_b):
    sa = 1.0 if a == 1 else -1.0
    sb = 1.0 if b == 1 else -1.0
    ca = {0: 1.0, 1: sa * np.exp(-1j * phase_a)}
    cb = {0: 1.0, 1: sb * np.exp(-1j * phase_b)}
    return ca, cb


def tsup_click(rho, a, b, i, j, phase_a, phase_b, transpose=True):
    """``SS_{a,b}(i, j, phiA, phiB)`` from the 16-term expansion divided by 4.

    Every term ``<X|rho^T|Y>`` carries ``c(X) conj(c(Y))`` with ``c = 1`` on
    bin ``i`` and ``+-exp(-i phi)`` on bin ``i - 1`` (sign from the detector).
    ``transpose=False`` uses ``rho`` in place of ``rho^T``.
    """
    d = rho.dim
    _check_bins(d, i, j)
    if a not in (1, 2) or b not in (1, 2):
        raise ValueError(f"detector labels must be 1 or 2, got ({a}, {b})")
    ca, cb = _amplitudes(a, b, phase_a, phase_b)
    total = 0.0 + 0.0j
    for xa in (0, 1):
        for xb in (0, 1):
            for ya in (0, 1):
                for yb in (0, 1):
                    bra = pair_index(i - xa, j - xb, d)
                    ket = pair_index(i - ya, j - yb, d)
                    coeff = ca[xa] * cb[xb] * np.conj(ca[ya] * cb[yb])
                    if transpose:
                        elem = rho.entries([ket], [bra])[0]
                    else:
                        elem = rho.entries([bra], [ket])[0]
                    total += coeff * elem
    return float(total.real) / 4.0


def _psi_tilde(x, i, phase, d):
    """``(|H,i> + (-1)^(x-1) exp(-i phase) |V,i-1>) / sqrt(2)`` on polarisation (x) time."""
    vec = np.zeros((2, d), dtype=np.complex128)
    vec[0, i] = 1.0
    vec[1, i - 1] = (-1.0) ** (x - 1) * np.exp(-1j * phase)
    return vec.ravel() / np.sqrt(2.0)


def tsup_click_oracle(rho, a, b, i, j, phase_a, phase_b):
    """Born rule on the polarisation (x) time space with ``|DD><DD| (x) rho``.

    The detector projector is built explicitly from the single-party
    superposition states; the factor 4 converts the Born probability to the
    normalisation of :func:`tsup_click`.
    """
    d = rho.dim
    _check_bins(d, i, j)
    psi = np.kron(_psi_tilde(a, i, phase_a, d), _psi_tilde(b, j, phase_b, d))
    # reorder (polA, tA, polB, tB) -> (polA, polB, tA, tB)
    psi = psi.reshape(2, d, 2, d).transpose(0, 2, 1, 3).ravel()
    diag_pol = np.array([1.0, 1.0]) / np.sqrt(2.0)
    dd = np.kron(diag_pol, diag_pol)
    state = np.kron(np.outer(dd, dd), np.asarray(rho.to_matrix()))
    prob = np.vdot(psi, state @ psi)
    return 4.0 * float(prob.real)


def d_combination(values):
    """``SS11 - SS12 - SS21 + SS22`` for one setting, given ``{(a, b): SS}``."""
    missing = [o for o in OUTCOMES if o not in values]
    if missing:
        raise IncompleteSettingError(f"setting lacks outcomes {missing}")
    return values[(1, 1)] - values[(1, 2)] - values[(2, 1)] + values[(2, 2)]


def extract_re_offdiag(d_x, d_y):
    """Real parts of the neighbouring coherences from the x and y combinations.

    Returns ``(Re<i,j|rho^T|i-1,j-1>, Re<i,j-1|rho^T|i-1,j>)``.
    """
    return 0.25 * (d_x - d_y), 0.25 * (d_x + d_y)


def xonly_lower_bound(d_x, tt, i, j):
    """Lower bound on ``Re<i,j|rho^T|i-1,j-1>`` from the x setting alone.

    ``D(0,0) = 2 Re<i,j|.|i-1,j-1> + 2 Re<i,j-1|.|i-1,j>`` and the second
    coherence is at most ``sqrt(TT(i,j-1) TT(i-1,j))`` in modulus.
    """
    if i < 1 or j < 1:
        raise IndexError(f"bins must be >= 1, got ({i}, {j})")
    prod = max(0.0, float(tt[i - 1, j]) * float(tt[i, j - 1]))
    return 0.5 * d_x - math.sqrt(prod)


def _pairs_for(d, which):
    if which == "all":
        return [(i, j) for i in range(1, d) for j in range(1, d)]
    if which == "diagonal":
        return [(i, i) for i in range(1, d)]
    return [tuple(p) for p in which]


def simulate_clicks(rho, pairs="diagonal", settings=(X_SETTING, Y_SETTING), transpose=True):
    """Noise-free click tables for ``rho``.

    ``pairs`` is ``"diagonal"`` (``i = j``, enough for band witnesses),
    ``"all"`` or an explicit list of ``(i, j)``.
    """
    d = rho.dim
    tt = toa_table(rho)
    plist = _pairs_for(d, pairs)
    ss = {}
    if plist:
        ij = np.array(plist)
        i, j = ij[:, 0], ij[:, 1]
        comps = [(0, 0), (0, 1), (1, 0), (1, 1)]
        flat = np.stack([pair_index(i - x, j - y, d) for x, y in comps], axis=1)
        rows = np.repeat(flat[:, :, None], 4, axis=2)
        cols = np.repeat(flat[:, None, :], 4, axis=1)
        # sub[p, X, Y] = <X|rho^T|Y> (or <X|rho|Y>)
        sub = rho.entries(cols, rows) if transpose else rho.entries(rows, cols)
        for phase_a, phase_b in settings:
            for a, b in OUTCOMES:
                ca, cb = _amplitudes(a, b, phase_a, phase_b)
                c = np.array([ca[x] * cb[y] for x, y in comps])
                vals = np.einsum("x,pxy,y->p", c, sub, np.conj(c)).real / 4.0
                for (pi, pj), val in zip(plist, vals):
                    ss[(a, b, int(pi), int(pj), float(phase_a), float(phase_b))] = float(val)
    return ClickTables(d, tt, ss, {"source": "simulated", "transpose": transpose})


def extract_elements(tables):
    """Recover diagonal elements and neighbouring real parts from click tables.

    Pairs with both phase settings give exact real parts; pairs with only the
    x setting give a lower bound (and a warning).
    """
    out = ExtractedElements(tables.dim, tables.tt.copy())
    for i, j in tables.pairs():
        x_vals = tables.setting(i, j, *X_SETTING)
        y_vals = tables.setting(i, j, *Y_SETTING)
        x_ok = all(o in x_vals for o in OUTCOMES)
        y_ok = all(o in y_vals for o in OUTCOMES)
        if x_ok and y_ok:
            out.re_offdiag_nn[(i, j)] = extract_re_offdiag(d_combination(x_vals), d_combination(y_vals))
        elif x_ok:
            out.lower_bounds[(i, j)] = xonly_lower_bound(d_combination(x_vals), tables.tt, i, j)
            out.warnings.append(f"pair ({i},{j}): y setting missing, using x-only lower bound")
    return out


def condition_tables(tables, block):
    """Tables conditioned on both parties landing in ``block``, re-indexed locally.

    Returns ``(weight, tables)`` where ``weight`` is the block's share of the
    ``TT`` mass.
    """
    block = sorted(int(b) for b in block)
    local = {g: n for n, g in enumerate(block)}
    idx = np.asarray(block)
    sub = tables.tt[np.ix_(idx, idx)]
    weight = float(sub.sum())
    if weight <= 0.0:
        raise EmptySubspaceError(f"block {block} carries no TT mass")
    ss = {}
    for (a, b, i, j, pa, pb), value in tables.ss.items():
        if all(x in local for x in (i, j, i - 1, j - 1)):
            ss[(a, b, local[i], local[j], pa, pb)] = value / weight
    meta = dict(tables.metadata, block=block)
    return weight, ClickTables(len(block), sub / weight, ss, meta)
