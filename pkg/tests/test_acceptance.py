"""Acceptance criteria; each test records one PASS/FAIL line in the summary.

Run alone with ``python tests/test_acceptance.py`` or ``pytest tests/test_acceptance.py``.
"""
import csv
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, constraints_for, random_density
from hdqkd import cli, clicks, completion, dual, keyrate, primal, states

KHEXP = {"name": "khexp", "c": 0.75, "s": 4.0}

CERT_TOL = 1e-9
SANDWICH_TOL = 1e-7
CLICK_TOL = 1e-12
COMPLETION_TOL = 1e-12
SUBSPACE_TOL = 1e-12
PERFECT_RATE_MIN = 1.9
PERFECT_P_WINDOW = 0.02
SCALING_RATIO_MAX = 10.0
SCALING_TOTAL_MAX_S = 300.0
BLOCKED_DENSE_TOL = 1e-10
MONOTONE_TOL = 1e-6


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, f"criterion {key}: {detail}"


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def curves(rows):
    out = {}
    for r in rows:
        out.setdefault((r["d"], r["D"], r["preset"]), []).append((float(r["v"]), float(r["clamped_rate"])))
    return {k: sorted(v) for k, v in out.items()}


@pytest.fixture(scope="session")
def fig1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig1")
    argv = ["simulate", "--d", "16", "--v-range", "0.8", "1.0", "21", "--preset", "kh1", "--preset", "kh2",
            "--q1-search", "0", "1", "--thresholds", "--no-timing", "--out", str(out)]
    assert cli.main(argv) == 0
    return out


@pytest.fixture(scope="session")
def fig2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2")
    base = ["simulate", "--v-range", "0.7", "1.0", "31", "--preset", "khexp:c=0.75,s=4", "--thresholds",
            "--no-timing"]
    assert cli.main(base + ["--d", "8", "16", "32", "--out", str(out / "full")]) == 0
    assert cli.main(base + ["--d", "32", "--block-size", "8", "--out", str(out / "sub")]) == 0
    return out


def test_criterion_1_certificates():
    failures, count = [], 0
    for d in (2, 3, 4, 8, 16, 32):
        for v in (0.0, 0.5, 0.7, 0.9, 1.0):
            for preset in (KHEXP, {"name": "kh2"}) if d == 16 else (KHEXP,):
                cons = constraints_for(d, v, preset)
                bound = dual.minimize(cons, d)
                rep = dual.verify_certificate(bound, cons, d)
                count += 1
                ok = (
                    rep.passed
                    and bound.y0 >= rep.max_lambda - CERT_TOL
                    and all(z >= 0.0 for z in bound.point.zL + bound.point.zU)
                    and abs(rep.objective - bound.p_guess_ub) <= 1e-10
                )
                if not ok:
                    failures.append((d, v, rep.violations))
    record("1", not failures, f"{count - len(failures)}/{count} bounds certified")


def test_criterion_2_sandwich():
    worst, violations, points = -math.inf, 0, 0
    for d in (2, 3, 4):
        for v in (0.7, 0.9, 1.0):
            bound = dual.minimize(constraints_for(d, v, KHEXP), d)
            rep = primal.sandwich_check(bound, states.isotropic(d, v), 500, seed=1000 * d + int(100 * v),
                                        tol=SANDWICH_TOL)
            violations += rep.violations
            worst = max(worst, rep.max_sample - rep.bound)
            points += 1
    record("2", violations == 0, f"{violations} violations over {points} points x 500 samples, "
                                 f"max(sample - bound) = {worst:.3e}")


def coherences(rho, i, j):
    d = rho.dim
    m = np.asarray(rho.to_matrix())
    return m[(i - 1) * d + (j - 1), i * d + j].real, m[(i - 1) * d + j, i * d + (j - 1)].real


def test_criterion_3_click_model():
    rng = np.random.default_rng(3)
    worst_click = worst_extract = 0.0
    for n in range(200):
        d = 2 + n % 3
        rho = random_density(d, rng, real=(n % 4 == 0), rank=int(rng.integers(1, d * d + 1)))
        for i in range(1, d):
            for j in range(1, d):
                for pa, pb in (clicks.X_SETTING, clicks.Y_SETTING):
                    for a, b in clicks.OUTCOMES:
                        diff = abs(clicks.tsup_click(rho, a, b, i, j, pa, pb)
                                   - clicks.tsup_click_oracle(rho, a, b, i, j, pa, pb))
                        worst_click = max(worst_click, diff)
        ex = clicks.extract_elements(clicks.simulate_clicks(rho, "all"))
        for (i, j), got in ex.re_offdiag_nn.items():
            want = coherences(rho, i, j)
            worst_extract = max(worst_extract, abs(got[0] - want[0]), abs(got[1] - want[1]))
    ok = worst_click <= CLICK_TOL and worst_extract <= CLICK_TOL
    record("3", ok, f"max click diff {worst_click:.2e}, max extraction diff {worst_extract:.2e}")


def test_criterion_4_completion():
    rng = np.random.default_rng(4)
    misses, intervals = 0, 0
    for trial in range(1000):
        rank = int(rng.integers(1, 7))
        g = rng.normal(size=(6, rank))
        m = g @ g.T
        mask = rng.uniform(size=(6, 6)) < 0.5
        mask = np.triu(mask, 1)
        mask[np.arange(5), np.arange(1, 6)] = True  # keep the first band so every pass has pivots
        r = completion.PartialRealSymmetric.from_matrix(m, mask)
        done = completion.complete(r)
        for j in range(6):
            for l in range(j + 1, 6):
                if mask[j, l]:
                    continue
                lo, hi = done.bounds(j, l)
                intervals += done.status(j, l) == completion.INTERVAL
                if not lo - COMPLETION_TOL <= m[j, l] <= hi + COMPLETION_TOL:
                    misses += 1
    ex = completion.PartialRealSymmetric([1.0, 1.0, 1.0])
    ex.set_known(0, 1, 0.9)
    ex.set_known(1, 2, 0.9)
    lo, hi = completion.complete(ex).bounds(0, 2)
    exact = abs(lo - 0.62) <= COMPLETION_TOL and abs(hi - 1.0) <= COMPLETION_TOL
    record("4", misses == 0 and exact,
           f"{misses} hidden entries outside ({intervals} intervals), worked example [{lo:.12f}, {hi:.12f}]")


def test_criterion_5a_perfect_state_d4():
    rep = keyrate.full_pipeline(states.NoiseModelSpec(1.0, 4), KHEXP)
    record("5a", rep.clamped_rate >= PERFECT_RATE_MIN,
           f"clamped rate {rep.clamped_rate:.4f} bits (need >= {PERFECT_RATE_MIN}), p_guess_ub {rep.p_guess_ub:.6f}")


def test_criterion_5b_perfect_state_d16():
    t0 = time.perf_counter()
    rep = keyrate.full_pipeline(states.NoiseModelSpec(1.0, 16), {"name": "kh2"})
    elapsed = time.perf_counter() - t0
    p = rep.p_guess_ub
    sound = p >= 1 / 16 - 1e-9
    inside = p <= 1 / 16 + PERFECT_P_WINDOW
    detail = f"p_guess_ub {p:.6f}, " + ("inside window" if inside else f"documented gap {p - 1 / 16:.4f} above 1/16")
    record("5b", sound and elapsed < 60.0, detail + f", {elapsed:.2f} s")


def test_criterion_6_subspace_law():
    worst = 0.0
    for v in (0.0, 0.3, 0.7, 1.0):
        rho = states.isotropic(8, v)
        for block in states.SubspacePartition(8, 4).blocks:
            _, cond = states.project_subspace(rho, block)
            v_cond = v / (v + (1 - v) / 2)
            want = states.isotropic(4, v_cond).to_matrix()
            worst = max(worst, float(np.max(np.abs(np.asarray(cond.to_matrix()) - want))))
    record("6", worst <= SUBSPACE_TOL, f"max entry difference {worst:.2e}")


def test_criterion_7_kh1_below_kh2(fig1_run):
    thr = {r["preset"]: float(r["v_threshold"]) for r in read_rows(fig1_run / "thresholds.csv")}
    kh1 = min(v for k, v in thr.items() if k.startswith("KH1") and not math.isnan(v))
    kh2 = thr["KH2"]
    rows = read_rows(fig1_run / "results.csv")
    emitted = len(rows) == 3 * 21
    record("7", kh1 < kh2 and emitted, f"thresholds {thr}; best KH1 {kh1:.5f} < KH2 {kh2:.5f}")


def test_criterion_8_dimension_and_subspace(fig2_run):
    thr = {int(r["d"]): float(r["v_threshold"]) for r in read_rows(fig2_run / "full" / "thresholds.csv")}
    nonincreasing = thr[8] >= thr[16] >= thr[32]
    full = dict(curves(read_rows(fig2_run / "full" / "results.csv"))[("32", "32", "KHexp(c=0.75,s=4)")])
    sub = dict(curves(read_rows(fig2_run / "sub" / "results.csv"))[("32", "8", "KHexp(c=0.75,s=4)")])
    gain = [v for v in full if full[v] == 0.0 and sub[v] > 0.0]
    record("8", nonincreasing and bool(gain),
           f"thresholds d=8 {thr[8]:.5f}, d=16 {thr[16]:.5f}, d=32 {thr[32]:.5f}; "
           f"D=8 positive where full d=32 is zero at {len(gain)} points (v {min(gain, default=math.nan):.2f}"
           f"..{max(gain, default=math.nan):.2f})")


def test_criterion_9_scaling():
    vis = np.linspace(0.0, 1.0, 21)
    times = {}
    for d in (16, 64):
        t0 = time.perf_counter()
        keyrate.sweep(d, vis, KHEXP)
        times[d] = time.perf_counter() - t0
    ratio = times[64] / times[16]
    worst = 0.0
    for d in (2, 4, 8, 16):
        cons = constraints_for(d, 0.8)
        rng = np.random.default_rng(d)
        for _ in range(5):
            s, t = rng.normal(size=2)
            point = dual.DualPoint((t,), (max(-s, 0.0),), (max(s, 0.0),))
            fast = dual.lambdas(point, cons, d, structured=True)
            dense = dual.lambdas(point, cons, d, structured=False)
            worst = max(worst, float(np.max(np.abs(fast - dense))))
    ok = ratio < SCALING_RATIO_MAX and times[64] + times[16] < SCALING_TOTAL_MAX_S and worst <= BLOCKED_DENSE_TOL
    record("9", ok, f"d=16 {times[16]:.2f} s, d=64 {times[64]:.2f} s, ratio {ratio:.2f}; "
                    f"blocked vs dense max diff {worst:.2e}")


def test_criterion_10_monotone_rates(fig1_run, fig2_run):
    rows = read_rows(fig1_run / "results.csv")
    rows += read_rows(fig2_run / "full" / "results.csv") + read_rows(fig2_run / "sub" / "results.csv")
    bad = []
    for key, pts in curves(rows).items():
        for (v0, r0), (v1, r1) in zip(pts, pts[1:]):
            if r1 < r0 - MONOTONE_TOL:
                bad.append((key, v0, v1, r0 - r1))
    record("10", not bad, f"{len(curves(rows))} curves, {len(bad)} decreases beyond {MONOTONE_TOL}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
