"""Command line entry point.

Subcommands: ``simulate`` (visibility sweeps on the noise model), ``rate``
(rate from click-table files), ``oracle`` (primal sandwich checks) and
``completion`` (interval completion of a partial matrix). A JSON config file
supplies defaults and command line flags override it.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal
invariant violation.
"""
import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hdqkd import clicks, completion, dataio, dual, kernels, keyrate, primal, states, witnesses
from hdqkd.errors import ConfigError, DataError, HDQKDError, InvariantViolation

RESULT_COLUMNS = (
    "d", "D", "v", "preset", "p_guess_ub", "hmin_bits", "leak_bits", "rate_bits", "clamped_rate", "wallclock_ms",
)
THRESHOLD_COLUMNS = ("d", "D", "preset", "v_threshold")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    mode: str = "simulate"
    d: list = field(default_factory=lambda: [16])
    visibility: object = field(default_factory=lambda: {"start": 0.9, "stop": 1.0, "steps": 11})
    presets: list = field(default_factory=lambda: [{"name": "kh1"}, {"name": "kh2"}])
    block_size: object = None
    q1_search: list = field(default_factory=list)
    optimizer: dict = field(default_factory=dict)
    thresholds: bool = False
    threshold_tol: float = 1e-4
    timing: bool = True
    plot: bool = True
    jobs: int = 1
    seed: int = 0
    out: str = "results"
    inputs: dict = field(default_factory=dict)
    samples: int = 500
    completion: dict = field(default_factory=dict)

    def visibilities(self):
        vis = self.visibility
        if isinstance(vis, dict):
            try:
                start, stop, steps = float(vis["start"]), float(vis["stop"]), int(vis["steps"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"visibility needs start, stop and steps: {exc}") from None
            if steps < 1:
                raise ConfigError("visibility steps must be >= 1")
            values = [start] if steps == 1 else list(np.linspace(start, stop, steps))
        else:
            values = [float(v) for v in (vis if isinstance(vis, (list, tuple)) else [vis])]
        values = [round(v, 12) for v in values]
        if not values or any(not 0.0 <= v <= 1.0 for v in values):
            raise ConfigError(f"visibilities must lie in [0, 1], got {values}")
        return values

    def solver_options(self):
        opts = dict(self.optimizer)
        opts.setdefault("seed", self.seed)
        unknown = set(opts) - {"seed", "starts", "max_evals", "tol", "fast_path"}
        if unknown:
            raise ConfigError(f"unknown optimizer keys {sorted(unknown)}")
        return dual.SolverOptions(**opts)

    def validate(self):
        if self.mode not in ("simulate", "rate", "oracle", "completion"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        self.d = [int(x) for x in (self.d if isinstance(self.d, (list, tuple)) else [self.d])]
        if any(x < 2 for x in self.d):
            raise ConfigError(f"dimensions must be >= 2, got {self.d}")
        if self.block_size is not None:
            sizes = self.block_size if isinstance(self.block_size, (list, tuple)) else [self.block_size]
            for size in sizes:
                for dim in self.d:
                    if size is not None and (int(size) < 1 or dim % int(size)):
                        raise ConfigError(f"block size {size} does not divide d={dim}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self.visibilities()
        self.solver_options()
        return self


def parse_preset(text):
    """``name[:key=value,...]``; ``qN=x`` entries become band overrides."""
    name, _, rest = text.partition(":")
    cfg = {"name": name.strip().lower()}
    overrides = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad preset parameter {item!r} in {text!r}")
        key = key.strip()
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"preset parameter {key} needs a number, got {value!r}") from None
        if key[:1] == "q" and key[1:].isdigit():
            overrides[int(key[1:])] = number
        else:
            cfg[key] = number
    if overrides:
        cfg["q_overrides"] = overrides
    return cfg


def _normalize_preset(cfg):
    cfg = dict(cfg)
    if "q_overrides" in cfg:
        cfg["q_overrides"] = {int(k): float(v) for k, v in cfg["q_overrides"].items()}
    if str(cfg.get("name", cfg.get("preset", ""))).lower() not in witnesses.PRESETS:
        raise ConfigError(f"unknown witness preset in {cfg}")
    return cfg


def _expand_presets(presets, q1_search):
    out = []
    for cfg in presets:
        cfg = _normalize_preset(cfg)
        if str(cfg.get("name")).lower() == "kh1" and q1_search and 1 not in cfg.get("q_overrides", {}):
            for q1 in q1_search:
                out.append(dict(cfg, q_overrides={**cfg.get("q_overrides", {}), 1: float(q1)}))
        else:
            out.append(cfg)
    return out


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else repr(float(x))
    return str(x)


def _write_csv(path, columns, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


PLOT_SCRIPT = '''"""Plot clamped key rate against visibility from results.csv."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
curves = defaultdict(list)
with (here / "results.csv").open() as fh:
    for row in csv.DictReader(fh):
        key = f"{row['preset']} d={row['d']}" + ("" if row["D"] == row["d"] else f" D={row['D']}")
        curves[key].append((float(row["v"]), float(row["clamped_rate"])))

fig, ax = plt.subplots(figsize=(6, 4))
for key, pts in sorted(curves.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=key)
ax.set_xlabel("visibility v")
ax.set_ylabel("key rate [bits per round]")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(here / "rates.png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''


def _metadata(cfg, extra):
    meta = {
        "mode": cfg.mode,
        "backend": kernels.BACKEND,
        "seeds": {"optimizer": cfg.solver_options().seed, "oracle": cfg.seed},
        "tolerances": {
            "certificate_feasibility": dual.FEAS_TOL,
            "certificate_objective": dual.OBJ_TOL,
            "optimizer_tol": cfg.solver_options().tol,
            "completion_pivot": completion.PIVOT_TOL,
            "sandwich": primal.SANDWICH_TOL,
            "threshold_bisection": cfg.threshold_tol,
        },
        "normalization": dict(dataio.NORMALIZATION),
        "timing": cfg.timing,
    }
    meta.update(extra)
    return meta


def _report_row(report, timing):
    row = report.row()
    row["wallclock_ms"] = round(report.metadata["wallclock_ms"], 3) if timing else None
    return row


def run_simulate(cfg, out):
    opts = cfg.solver_options()
    presets = _expand_presets(cfg.presets, cfg.q1_search)
    sizes = cfg.block_size if isinstance(cfg.block_size, (list, tuple)) else [cfg.block_size]
    vis = cfg.visibilities()
    rows, warnings_by_preset, thresholds = [], {}, []
    for d in cfg.d:
        for size in sizes:
            for preset in presets:
                label = keyrate.preset_label(preset)
                reports = keyrate.sweep(d, vis, preset, size, opts, cfg.jobs)
                for rep in reports:
                    rows.append(_report_row(rep, cfg.timing))
                    warnings_by_preset.setdefault(label, set()).update(rep.metadata["warnings"])
                if cfg.thresholds:
                    v_thr = keyrate.positive_rate_threshold(
                        d, preset, size, opts, lo=min(vis), hi=max(vis), tol=cfg.threshold_tol
                    )
                    thresholds.append({"d": d, "D": size or d, "preset": label, "v_threshold": v_thr})
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    extra = {
        "presets": presets,
        "dimensions": cfg.d,
        "block_sizes": sizes,
        "visibilities": vis,
        "warnings": {k: sorted(v) for k, v in sorted(warnings_by_preset.items())},
    }
    if cfg.thresholds:
        _write_csv(out / "thresholds.csv", THRESHOLD_COLUMNS, thresholds)
        extra["thresholds"] = thresholds
        extra["q1_choice"] = _q1_choice(thresholds)
    _write_json(out / "metadata.json", _metadata(cfg, extra))
    if cfg.plot:
        (out / "plot_rates.py").write_text(PLOT_SCRIPT)
    return rows


def _q1_choice(thresholds):
    """For KH1 variants, the override giving the lowest threshold per (d, D)."""
    best = {}
    for t in thresholds:
        if not t["preset"].startswith("KH1(q1="):
            continue
        key = f"d={t['d']},D={t['D']}"
        v = t["v_threshold"]
        if not math.isnan(v) and (key not in best or v < best[key]["v_threshold"]):
            best[key] = {"preset": t["preset"], "v_threshold": v}
    return best


def run_rate(cfg, out):
    tt = cfg.inputs.get("tt")
    if not tt:
        raise ConfigError("rate mode needs an arrival table (--tt or inputs.tt)")
    tables = dataio.load_click_csv(tt, cfg.inputs.get("ss"))
    rows, warnings_seen = [], set()
    for preset in _expand_presets(cfg.presets, cfg.q1_search):
        rep = keyrate.full_pipeline(tables, preset, cfg.block_size, cfg.solver_options())
        rows.append(_report_row(rep, cfg.timing))
        warnings_seen.update(rep.metadata["warnings"])
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    _write_json(
        out / "metadata.json",
        _metadata(cfg, {"inputs": cfg.inputs, "tables": tables.metadata, "warnings": sorted(warnings_seen)}),
    )
    return rows


def run_oracle(cfg, out):
    opts = cfg.solver_options()
    records, failures = [], 0
    for d in cfg.d:
        for preset in _expand_presets(cfg.presets, cfg.q1_search):
            for v in cfg.visibilities():
                state = states.IsotropicState(d, v)
                tables = clicks.simulate_clicks(state)
                w1, w2 = witnesses.witness_pair(preset, d)
                ex = clicks.extract_elements(tables)
                constraints = [
                    witnesses.expectation_interval_w1(w1, tables.tt, ex),
                    witnesses.expectation_w2(tables.tt, w2.p),
                ]
                bound = dual.minimize(constraints, d, opts)
                cert = dual.verify_certificate(bound, constraints, d)
                rep = primal.sandwich_check(bound, state.to_density_matrix(), cfg.samples, cfg.seed)
                ok = rep.passed and cert.passed
                failures += not ok
                records.append(
                    {
                        "d": d,
                        "v": v,
                        "preset": keyrate.preset_label(preset),
                        "p_guess_ub": bound.p_guess_ub,
                        "max_sample": rep.max_sample,
                        "gap": rep.gap,
                        "violations": rep.violations,
                        "certificate": cert.passed,
                        "passed": ok,
                    }
                )
                print(
                    f"{'PASS' if ok else 'FAIL'} d={d} v={v:g} {records[-1]['preset']}: "
                    f"bound={bound.p_guess_ub:.6f} max_sample={rep.max_sample:.6f} violations={rep.violations}"
                )
    _write_json(out / "oracle.json", _metadata(cfg, {"samples": cfg.samples, "checks": records}))
    if failures:
        raise InvariantViolation(f"{failures} oracle checks failed")
    return records


def run_completion(cfg, out):
    spec = dict(cfg.completion)
    path = cfg.inputs.get("matrix")
    if path:
        try:
            spec.update(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise DataError(f"{path}: file not found") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
    if "diag" not in spec:
        raise ConfigError("completion needs 'diag' plus 'known' and/or 'intervals' entries")
    r = completion.PartialRealSymmetric(spec["diag"])
    for j, l, value in spec.get("known", []):
        r.set_known(int(j), int(l), value)
    for j, l, lo, hi in spec.get("intervals", []):
        r.set_interval(int(j), int(l), lo, hi)
    done = completion.complete(r, max_passes=int(spec.get("max_passes", 100)))
    rows = [{"j": j, "l": l, "lo": float(lo), "hi": float(hi), "status": s} for j, l, lo, hi, s in done.rows()]
    _write_csv(out / "completion.csv", ("j", "l", "lo", "hi", "status"), rows)
    _write_json(out / "metadata.json", _metadata(cfg, {"passes": done.passes, "input": spec}))
    for row in rows:
        if row["j"] != row["l"]:
            print(f"r[{row['j']},{row['l']}] in [{row['lo']:.6f}, {row['hi']:.6f}] ({row['status']})")
    return rows


RUNNERS = {"simulate": run_simulate, "rate": run_rate, "oracle": run_oracle, "completion": run_completion}


def build_parser():
    parser = _Parser(prog="hdqkd", description="Witness-based key-rate bounds for time-bin qudits.")
    sub = parser.add_subparsers(dest="mode", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path)
    common.add_argument("--jobs", type=int)
    common.add_argument("--no-timing", action="store_true", help="leave wallclock_ms empty for byte-stable output")
    common.add_argument("--d", type=int, nargs="+", help="local dimension(s)")
    common.add_argument("--v", type=float, nargs="+", help="explicit visibilities")
    common.add_argument("--v-range", type=float, nargs=3, metavar=("START", "STOP", "STEPS"))
    common.add_argument(
        "--preset", action="append", help="witness preset, e.g. kh2, kh1:q1=1, khexp:c=0.75,s=4 (repeatable)"
    )
    common.add_argument("--q1-search", type=float, nargs="+", help="candidate q1 values for KH1")
    common.add_argument("--block-size", type=int, help="subspace block size D")
    common.add_argument("--starts", type=int)
    common.add_argument("--max-evals", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--dense", action="store_true", help="disable the blocked fast path")

    sim = sub.add_parser("simulate", parents=[common], help="sweep the isotropic noise model")
    sim.add_argument("--thresholds", action="store_true", help="bisect the positive-rate visibility")
    sim.add_argument("--no-plot", action="store_true")
    rate = sub.add_parser("rate", parents=[common], help="rate from click-table CSV files")
    rate.add_argument("--tt", type=Path)
    rate.add_argument("--ss", type=Path)
    orc = sub.add_parser("oracle", parents=[common], help="primal sandwich checks")
    orc.add_argument("--samples", type=int)
    comp = sub.add_parser("completion", parents=[common], help="complete a partial matrix from JSON")
    comp.add_argument("--matrix", type=Path, help="JSON with diag, known [[j,l,v]], intervals [[j,l,lo,hi]]")
    return parser


def load_config(args):
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"{args.config}: config file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = RunConfig(**raw)
    cfg.mode = args.mode
    cfg.optimizer = dict(cfg.optimizer)
    cfg.inputs = dict(cfg.inputs)
    if args.mode in ("oracle",) and "d" not in raw and args.d is None:
        cfg.d = [3]
    if args.mode in ("oracle",) and "presets" not in raw and args.preset is None:
        cfg.presets = [{"name": "khexp"}]
    if args.mode in ("oracle",) and "visibility" not in raw and args.v is None and args.v_range is None:
        cfg.visibility = [0.7, 0.9, 1.0]
    if args.mode == "rate" and "presets" not in raw and args.preset is None:
        cfg.presets = [{"name": "khexp"}]
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.optimizer["seed"] = args.seed
    if args.out is not None:
        cfg.out = str(args.out)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.no_timing:
        cfg.timing = False
    if args.d is not None:
        cfg.d = args.d
    if args.v is not None:
        cfg.visibility = args.v
    if args.v_range is not None:
        cfg.visibility = {"start": args.v_range[0], "stop": args.v_range[1], "steps": int(args.v_range[2])}
    if args.preset is not None:
        cfg.presets = [parse_preset(p) for p in args.preset]
    if args.q1_search is not None:
        cfg.q1_search = args.q1_search
    if args.block_size is not None:
        cfg.block_size = args.block_size
    for flag, key in (("starts", "starts"), ("max_evals", "max_evals"), ("tol", "tol")):
        if getattr(args, flag) is not None:
            cfg.optimizer[key] = getattr(args, flag)
    if args.dense:
        cfg.optimizer["fast_path"] = False
    if getattr(args, "thresholds", False):
        cfg.thresholds = True
    if getattr(args, "no_plot", False):
        cfg.plot = False
    if getattr(args, "tt", None) is not None:
        cfg.inputs["tt"] = str(args.tt)
    if getattr(args, "ss", None) is not None:
        cfg.inputs["ss"] = str(args.ss)
    if getattr(args, "samples", None) is not None:
        cfg.samples = args.samples
    if getattr(args, "matrix", None) is not None:
        cfg.inputs["matrix"] = str(args.matrix)
    return cfg.validate()


def run(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.mode](cfg, out)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
        start = time.perf_counter()
        run(cfg)
        if cfg.timing:
            print(f"done in {time.perf_counter() - start:.2f} s; outputs in {cfg.out}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        stage = getattr(exc, "stage", None)
        print(f"data error{f' [{stage}]' if stage else ''}: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except HDQKDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
