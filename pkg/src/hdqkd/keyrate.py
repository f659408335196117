"""Key rates from guessing-probability bounds.

The asymptotic rate is ``H(X|E) - H(X|Y)`` with ``H(X|E)`` lower-bounded by
the min-entropy ``-log2 p_guess``. With subspace postselection each block of
``D`` outcomes is treated as its own ``D``-dimensional protocol and the
block rates are averaged with the block probabilities.
"""
import contextlib
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from hdqkd import clicks, completion, dual, states, witnesses
from hdqkd.errors import DomainError, HDQKDError, InvariantViolation, MalformedTableError, StageError

SUM_TOL = 1e-6
INV_TOL = 1e-9


def cond_entropy_xy(tt):
    """``H(X|Y)`` in bits for the joint table ``tt[x, y]``."""
    tt = np.asarray(tt, dtype=np.float64)
    if tt.ndim != 2 or tt.shape[0] != tt.shape[1]:
        raise MalformedTableError(f"TT must be square, got shape {tt.shape}")
    if np.any(tt < 0.0):
        raise MalformedTableError("TT has negative entries")
    total = tt.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise MalformedTableError(f"TT sums to {total:.9g}, not 1")
    tt = tt / total
    p_y = tt.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_xy = -np.sum(np.where(tt > 0.0, tt * np.log2(tt), 0.0))
        h_y = -np.sum(np.where(p_y > 0.0, p_y * np.log2(p_y), 0.0))
    return float(max(h_xy - h_y, 0.0))


def devetak_winter(p_guess_ub, leak):
    """``(rate, clamped_rate)`` with ``rate = -log2 p_guess - leak``."""
    if not 0.0 < p_guess_ub <= 1.0 + INV_TOL:
        raise DomainError(f"p_guess must lie in (0, 1], got {p_guess_ub}")
    if leak < 0.0:
        raise DomainError(f"leak must be >= 0, got {leak}")
    rate = -math.log2(min(p_guess_ub, 1.0)) - leak
    return rate, max(0.0, rate)


def subspace_rate(partition, pairs, clamp=True):
    """``sum_m P_m K_m`` over the blocks of ``partition``.

    ``pairs`` holds one ``(P_m, K_m)`` per block. With ``clamp`` each
    ``K_m`` is replaced by ``max(0, K_m)`` first.
    """
    pairs = list(pairs)
    if len(pairs) != partition.count:
        raise DomainError(f"{len(pairs)} (P, K) pairs for {partition.count} blocks")
    probs = np.array([p for p, _ in pairs], dtype=np.float64)
    rates = np.array([k for _, k in pairs], dtype=np.float64)
    if np.any(probs < 0.0):
        raise DomainError("block probabilities must be >= 0")
    if probs.sum() > 1.0 + INV_TOL:
        raise DomainError(f"block probabilities sum to {probs.sum():.12g} > 1")
    if clamp:
        rates = np.maximum(rates, 0.0)
    return float(probs @ rates)


@dataclass
class BlockRate:
    block: tuple
    weight: float
    p_guess_ub: float
    hmin_bits: float
    leak_bits: float
    rate_bits: float
    clamped_rate: float


@dataclass
class RateReport:
    """One pipeline result.

    For partitioned runs the entropies are the weighted block sums,
    ``p_guess_ub`` is ``2 ** -hmin_bits`` and ``clamped_rate`` is the sum of
    per-block clamped rates.
    """

    d: int
    D: int
    visibility: float
    preset: str
    p_guess_ub: float
    hmin_bits: float
    leak_bits: float
    rate_bits: float
    clamped_rate: float
    blocks: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def check(self):
        problems = []
        if abs(self.hmin_bits + math.log2(self.p_guess_ub)) > 1e-12:
            problems.append("hmin_bits != -log2(p_guess_ub)")
        if abs(self.rate_bits - (self.hmin_bits - self.leak_bits)) > 1e-12:
            problems.append("rate_bits != hmin_bits - leak_bits")
        if self.clamped_rate < 0.0 or self.clamped_rate < self.rate_bits - 1e-12:
            problems.append("clamped_rate below max(0, rate_bits)")
        if not self.blocks and abs(self.clamped_rate - max(0.0, self.rate_bits)) > 1e-12:
            problems.append("clamped_rate != max(0, rate_bits)")
        if not -INV_TOL <= self.hmin_bits <= math.log2(self.d) + INV_TOL:
            problems.append(f"hmin_bits={self.hmin_bits} outside [0, log2 d]")
        if self.clamped_rate > math.log2(self.d) + INV_TOL:
            problems.append("clamped_rate above log2 d")
        if problems:
            raise InvariantViolation("rate report: " + "; ".join(problems))
        return self

    def row(self):
        return {
            "d": self.d,
            "D": self.D,
            "v": self.visibility,
            "preset": self.preset,
            "p_guess_ub": self.p_guess_ub,
            "hmin_bits": self.hmin_bits,
            "leak_bits": self.leak_bits,
            "rate_bits": self.rate_bits,
            "clamped_rate": self.clamped_rate,
        }


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except HDQKDError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise
    except Exception as exc:  # anything else is a bug in that stage
        raise StageError(name, exc) from exc


def preset_label(config):
    if callable(config):
        return getattr(config, "__name__", "custom")
    label = config.get("label")
    if label:
        return str(label)
    name = str(config.get("name", config.get("preset", "")))
    if name.lower() == "khexp":
        return f"KHexp(c={config.get('c', 0.75):g},s={config.get('s', 4.0):g})"
    if name.lower() == "kh1" and config.get("q_overrides"):
        q1 = {int(k): v for k, v in config["q_overrides"].items()}.get(1)
        return "KH1" if q1 is None else f"KH1(q1={q1:g})"
    return name.upper()


def _witnesses_for(config, d):
    return config(d) if callable(config) else witnesses.witness_pair(config, d)


def _tables_for(source):
    if isinstance(source, clicks.ClickTables):
        return source, None
    if isinstance(source, states.NoiseModelSpec):
        source = source.state()
    visibility = getattr(source, "visibility", None)
    return clicks.simulate_clicks(source, pairs="diagonal"), visibility


def _rate_from_tables(tables, witness, options, log):
    d = tables.dim
    with _stage("witness"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            w1, w2 = _witnesses_for(witness, d)
        log["warnings"].extend(str(w.message) for w in caught)
    with _stage("extract"):
        extracted = clicks.extract_elements(tables)
        log["warnings"].extend(extracted.warnings)
    with _stage("complete"):
        sector = witnesses.sector_matrix(extracted)
        completed = completion.complete(sector)
        log["completion_passes"].append(completed.passes)
    with _stage("witness"):
        constraints = [
            witnesses.expectation_interval_w1(w1, tables.tt, completed=completed),
            witnesses.expectation_w2(tables.tt, w2.p),
        ]
    with _stage("dual"):
        bound = dual.minimize(constraints, d, options)
    with _stage("rate"):
        leak = cond_entropy_xy(tables.tt)
        hmin = -math.log2(bound.p_guess_ub)
        rate, clamped = devetak_winter(bound.p_guess_ub, leak)
    return bound, hmin, leak, rate, clamped


def full_pipeline(source, witness, partition=None, options=None):
    """Tables -> extraction -> completion -> witness values -> dual bound -> rate.

    ``source`` is a :class:`~hdqkd.states.NoiseModelSpec`, a state or a
    :class:`~hdqkd.clicks.ClickTables`. ``witness`` is a preset mapping or a
    callable ``d -> (W1, W2)``. ``partition`` is a
    :class:`~hdqkd.states.SubspacePartition`, a block size, or ``None``.
    """
    options = options or dual.SolverOptions()
    start = time.perf_counter()
    with _stage("simulate"):
        tables, visibility = _tables_for(source)
    d = tables.dim
    if isinstance(partition, int):
        partition = states.SubspacePartition(d, partition)
    log = {"warnings": [], "completion_passes": []}
    label = preset_label(witness)

    if partition is None or partition.block_size == d:
        bound, hmin, leak, rate, clamped = _rate_from_tables(tables, witness, options, log)
        report = RateReport(d, d, visibility, label, bound.p_guess_ub, hmin, leak, rate, clamped)
    else:
        if partition.dim != d:
            raise DomainError(f"partition is for d={partition.dim}, data has d={d}")
        blocks = []
        for block in partition.blocks:
            with _stage("condition"):
                weight, local = clicks.condition_tables(tables, block)
            bound, hmin, leak, rate, clamped = _rate_from_tables(local, witness, options, log)
            blocks.append(BlockRate(tuple(block), weight, bound.p_guess_ub, hmin, leak, rate, clamped))
        with _stage("rate"):
            pairs = [(b.weight, b.rate_bits) for b in blocks]
            hmin = float(sum(b.weight * b.hmin_bits for b in blocks))
            leak = float(sum(b.weight * b.leak_bits for b in blocks))
            rate = hmin - leak
            clamped = subspace_rate(partition, pairs, clamp=True)
        report = RateReport(
            d, partition.block_size, visibility, label, 2.0**-hmin, hmin, leak, rate, clamped, blocks
        )
        report.metadata["unclamped_rate"] = subspace_rate(partition, pairs, clamp=False)
    report.metadata.update(
        warnings=sorted(set(log["warnings"])),
        completion_passes=log["completion_passes"],
        seed=options.seed,
        wallclock_ms=1000.0 * (time.perf_counter() - start),
    )
    with _stage("rate"):
        report.check()
    return report


def _sweep_point(args):
    d, v, witness, block_size, options = args
    return full_pipeline(states.NoiseModelSpec(v, d), witness, block_size, options)


def sweep(d, visibilities, witness, block_size=None, options=None, jobs=1):
    """Reports for each visibility, in input order."""
    tasks = [(d, float(v), witness, block_size, options) for v in visibilities]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def positive_rate_threshold(d, witness, block_size=None, options=None, lo=0.5, hi=1.0, tol=1e-4):
    """Smallest visibility with a positive rate, by bisection.

    Assumes the rate is nondecreasing in ``v``. Returns ``nan`` when the rate
    at ``hi`` is not positive and ``lo`` when it is already positive there.
    """
    def positive(v):
        return _sweep_point((d, v, witness, block_size, options)).rate_bits > 0.0

    if not positive(hi):
        return math.nan
    if positive(lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            hi = mid
        else:
            lo = mid
    return hi


def report_dict(report):
    out = asdict(report)
    out["blocks"] = [asdict(b) for b in report.blocks]
    return out
