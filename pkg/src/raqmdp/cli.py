"""Command-line front end: single episodes and parameter sweeps.

    raqmdp run --config scenario.ini --seed 3 --out results/
    raqmdp sweep --spec sweep.ini --out results/ --parallel 4

``RAQMDP_OUT_DIR``, when set, overrides ``--out``. Exit status of ``run``:
0 for a clean episode, 1 when the episode ends in a crash (telemetry is still
written), 2 for configuration errors, 3 for planner failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import ConfigError, RunConfig, SweepSpec, load_scenario, load_sweep
from .idm import safe_distance
from .simulator import LimitedRangeSensor, run_episode
from .svg import scatter

OUT_ENV = "RAQMDP_OUT_DIR"
EXIT_OK, EXIT_CRASH, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2, 3

SUMMARY_COLUMNS = (
    "cell", "parameter", "value", "sensor_range", "planner", "alpha", "epsilon",
    "episodes", "crashes", "failures", "v_bar", "s_star", "max_abs_jerk", "max_abs_jerk_worst",
)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def _out_dir(arg: Optional[str]) -> Path:
    env = os.environ.get(OUT_ENV)
    chosen = env or arg
    if not chosen:
        raise ConfigError(f"no output directory: pass --out or set {OUT_ENV}")
    return Path(chosen)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(x):
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def _clean(value):
    """Replace non-finite floats so the summary stays strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


# --- run ---------------------------------------------------------------------------


def cmd_run(config: str, seed: Optional[int], out: Optional[str], planner: Optional[str] = None) -> int:
    try:
        rc = load_scenario(config)
        if planner is not None:
            rc = replace(rc, planner=replace(rc.planner, kind=planner))
        out_dir = _out_dir(out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"error: {config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    seed = rc.seed if seed is None else seed
    try:
        tel = run_episode(rc.scenario, rc.planner, seed)
    except Exception as e:  # report planner failures without a traceback dump
        print(f"error: planner failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    stem = f"{Path(config).stem}-{rc.planner.kind}-seed{seed}"
    write_atomic(out_dir / f"{stem}.csv", tel.to_csv())
    write_atomic(out_dir / f"{stem}.json", _dumps(_clean({"summary": tel.summary, "bp_ticks": tel.bp})))
    s = tel.summary
    print(
        f"{stem}: {s['end_reason']} after {s['duration']:g} s, v_bar={s['avg_velocity']:.3f} m/s, "
        f"max|jerk|={s['max_abs_jerk']:.3f} m/s^3 -> {out_dir}"
    )
    if s["crash"]:
        print(f"error: episode ended in a crash with {s.get('crash_with')}", file=sys.stderr)
        return EXIT_CRASH
    return EXIT_OK


# --- sweep -------------------------------------------------------------------------


def _cell_config(rc: RunConfig, parameter: str, value, sensor_range: Optional[float]) -> RunConfig:
    sc, pc = rc.scenario, rc.planner
    if sensor_range is not None or parameter == "sensor-range":
        if not isinstance(sc.sensor, LimitedRangeSensor):
            raise ConfigError("sensor-range sweeps need the stationary-object scenario")
        r = float(value) if parameter == "sensor-range" else sensor_range
        sc = replace(sc, sensor=replace(sc.sensor, range=r))
    if parameter == "alpha":
        pc = replace(pc, risk=replace(pc.risk, alpha=float(value)))
    elif parameter == "epsilon":
        pc = replace(pc, search=replace(pc.search, epsilon=float(value)))
    elif parameter == "planner":
        pc = replace(pc, kind=str(value))
    return replace(rc, scenario=sc, planner=pc)


def _cell_id(parameter: str, value, sensor_range: Optional[float]) -> str:
    vid = f"{parameter}={value}"
    return vid if sensor_range is None else f"range={sensor_range:g}_{vid}"


def run_cell(rc: RunConfig, parameter: str, value, sensor_range: Optional[float], seeds: Sequence[int], out_dir: str) -> Dict:
    """Run every seed of one sweep cell and write its results atomically."""
    cell = _cell_id(parameter, value, sensor_range)
    cdir = Path(out_dir) / "cells"
    v, j, crashes, failures = [], [], 0, []
    try:
        crc = _cell_config(rc, parameter, value, sensor_range)
    except (ConfigError, ValueError) as e:
        crc, failures = None, [{"seed": None, "error": str(e)}]
    for seed in seeds if crc is not None else ():
        try:
            tel = run_episode(crc.scenario, crc.planner, seed)
        except Exception as e:
            failures.append({"seed": seed, "error": f"{type(e).__name__}: {e}"})
            continue
        write_atomic(cdir / cell / f"seed{seed}.csv", tel.to_csv())
        v.append(tel.summary["avg_velocity"])
        j.append(tel.summary["max_abs_jerk"])
        crashes += bool(tel.summary["crash"])
    v_bar = math.fsum(v) / len(v) if v else None
    result = {
        "cell": cell,
        "parameter": parameter,
        "value": value,
        "sensor_range": sensor_range if sensor_range is not None else (
            crc.scenario.sensor.range if crc is not None and isinstance(crc.scenario.sensor, LimitedRangeSensor) else None
        ),
        "planner": crc.planner.kind if crc is not None else None,
        "alpha": crc.planner.risk.alpha if crc is not None else None,
        "epsilon": crc.planner.search.epsilon if crc is not None else None,
        "episodes": len(v),
        "crashes": crashes,
        "failures": failures,
        "v_bar": v_bar,
        "max_abs_jerk": math.fsum(j) / len(j) if j else None,
        "max_abs_jerk_worst": max(j) if j else None,
    }
    write_atomic(cdir / f"{cell}.json", _dumps(_clean(result)))
    return result


def _with_s_star(cell: Dict, rc: RunConfig) -> Dict:
    # s* is always derived from v_bar, never carried separately
    out = dict(cell)
    out["s_star"] = safe_distance(cell["v_bar"], 0.0, rc.scenario.idm) if cell["v_bar"] is not None else None
    return out


def summary_table(cells: List[Dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for c in cells:
        row = []
        for col in SUMMARY_COLUMNS:
            x = c.get(col)
            if col == "failures":
                x = len(x)
            row.append("" if x is None else (repr(float(x)) if isinstance(x, float) else x))
        w.writerow(row)
    return buf.getvalue()


def cmd_sweep(spec_path: str, out: Optional[str], parallel: int = 1) -> int:
    try:
        spec: SweepSpec = load_sweep(spec_path)
        rc = load_scenario(spec.scenario)
        out_dir = _out_dir(out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    ranges: Sequence[Optional[float]] = spec.ranges or (None,)
    jobs = [(r, v) for r in ranges for v in spec.values]
    args = [(rc, spec.parameter, v, r, spec.seeds, str(out_dir)) for r, v in jobs]
    if parallel > 1:
        with ProcessPoolExecutor(parallel) as pool:
            futures = [pool.submit(run_cell, *a) for a in args]
            cells = [f.result() for f in futures]
    else:
        cells = [run_cell(*a) for a in args]
    # fixed order by (range, value position) whatever the execution order
    cells = [_with_s_star(c, rc) for c in cells]
    write_atomic(out_dir / "summary.json", _dumps(_clean({"parameter": spec.parameter, "seeds": list(spec.seeds), "cells": cells})))
    write_atomic(out_dir / "summary.csv", summary_table(cells))

    groups: Dict[Optional[float], List[Dict]] = {}
    for c in cells:
        key = c["sensor_range"] if (spec.ranges or spec.parameter == "sensor-range") else None
        groups.setdefault(key, []).append(c)
    for key, group in groups.items():
        pts = [(c["v_bar"], c["max_abs_jerk"], f"{spec.parameter}={c['value']}") for c in group if c["v_bar"] is not None]
        if not pts:
            continue
        name = "scatter.svg" if key is None else f"scatter_range_{key:g}.svg"
        title = "Velocity vs jerk" + ("" if key is None else f" (sensor range {key:g} m)")
        write_atomic(out_dir / name, scatter(pts, title, "average velocity [m/s]", "max |jerk| [m/s^3]"))

    for c in cells:
        v = "n/a" if c["v_bar"] is None else f"{c['v_bar']:.3f}"
        jj = "n/a" if c["max_abs_jerk"] is None else f"{c['max_abs_jerk']:.3f}"
        print(f"{c['cell']}: v_bar={v} max|jerk|={jj} crashes={c['crashes']} failures={len(c['failures'])}")
    failed = sum(len(c["failures"]) for c in cells)
    if failed:
        print(f"error: {failed} episode(s) failed; see cells/*.json", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raqmdp", description="Risk-averse QMDP behavior planning on simulated highways.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one episode and write telemetry")
    r.add_argument("--config", required=True, help="scenario INI file")
    r.add_argument("--seed", type=int, default=None, help="episode seed (default: [scenario] seed)")
    r.add_argument("--out", default=None, help=f"output directory (overridden by ${OUT_ENV})")
    r.add_argument("--planner", default=None, help="override [planner] kind")
    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--spec", required=True, help="sweep INI file")
    s.add_argument("--out", default=None, help=f"output directory (overridden by ${OUT_ENV})")
    s.add_argument("--parallel", type=int, default=1, help="cells run in this many processes")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.seed, args.out, args.planner)
        return cmd_sweep(args.spec, args.out, args.parallel)
    except KeyboardInterrupt:
        return 130
    except Exception:
        traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
