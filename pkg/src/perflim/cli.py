"""perflim command line: closed-form sweeps, oracle certification, trend checks."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .config import PARAMETERS, RunConfig, load_config
from .errors import ConfigError, NotSISO, PerflimError, UsageError
from .perf_limits import theorem1_jstar

log = logging.getLogger("perflim")

EXIT_OK, EXIT_TREND, EXIT_SCHEMA, EXIT_NUMERIC = 0, 1, 2, 3
TREND_RTOL = 1e-9

TERM_COLUMNS = ["ju_zero_direction_term", "ju_szero_term", "ju_log_integral_term", "ju_star", "jv_star", "j_star"]
ORACLE_COLUMNS = ["oracle_j", "oracle_gap"]
MC_COLUMNS = ["mc_estimate", "mc_stderr"]
SNR_COLUMNS = ["snr_stabilizability", "snr_tracking_total"]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (list, tuple, np.ndarray)):
        return ";".join(fmt(v) for v in np.ravel(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def columns(cfg: RunConfig, oracle: bool) -> list:
    cols = list(PARAMETERS) + TERM_COLUMNS
    if oracle:
        cols += ORACLE_COLUMNS
        if cfg.oracle.monte_carlo is not None:
            cols += MC_COLUMNS
    return cols + SNR_COLUMNS + ["error"]


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate_point(task) -> dict:
    """One sweep point; every failure is reported in the row, never raised."""
    cfg, point, index, oracle, seed = task
    from . import oracle as orc
    from .snr_limits import snr_report

    row = {k: fmt(point[k]) for k in PARAMETERS}
    try:
        P = cfg.plant_at(point)
        ch = cfg.channel_at(point, P.cols)
        b = theorem1_jstar(P, ch, point["epsilon"], cfg.pole)
        for c in TERM_COLUMNS:
            row[c] = fmt(getattr(b, c))
        if P.shape == (1, 1):
            try:
                rep = snr_report(P, ch, pole=cfg.pole)
                row["snr_stabilizability"] = fmt(rep.stabilizability_snr)
                row["snr_tracking_total"] = fmt(rep.total)
            except NotSISO:
                pass
        if oracle:
            res = orc.optimize_finite_basis(P, ch, point["epsilon"], cfg.oracle.m, cfg.oracle.lam, cfg.pole,
                                            closed_form=b.j_star)
            row["oracle_j"] = fmt(res.j_value)
            row["oracle_gap"] = fmt(res.gap)
            mc = cfg.oracle.monte_carlo
            if mc is not None:
                est = orc.monte_carlo_j(P, ch, res.parameter.Q(), res.parameter.R(), mc.horizon, mc.step, mc.runs,
                                        _point_seed(seed, index), epsilon=point["epsilon"], pole=cfg.pole)
                row["mc_estimate"] = fmt(est.estimate)
                row["mc_stderr"] = fmt(est.stderr)
    except (PerflimError, ValueError, np.linalg.LinAlgError, ZeroDivisionError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def run_config(cfg: RunConfig, out_dir: Path, oracle: bool = False, jobs: int = 1,
               seed: Optional[int] = None) -> tuple:
    """Evaluate every sweep point and write <name>.csv; returns (path, rows, failures)."""
    seed = cfg.seed if seed is None else seed
    oracle = oracle or cfg.oracle.enable
    pts = cfg.points()
    tasks = [(cfg, pt, i, oracle, seed) for i, pt in enumerate(pts)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(evaluate_point, tasks))
    else:
        rows = [evaluate_point(t) for t in tasks]
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{cfg.name}.csv"
    cols = columns(cfg, oracle)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n", restval="")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    if cfg.plot_script:
        _write_plot_script(cfg, out_dir, path)
    failures = sum(1 for r in rows if r.get("error"))
    return path, rows, failures


def _write_plot_script(cfg: RunConfig, out_dir: Path, csv_path: Path):
    x = cfg.swept()[-1]
    cols = list(PARAMETERS) + TERM_COLUMNS
    xi, yi = cols.index(x) + 1, cols.index("j_star") + 1
    text = (f"set datafile separator ','\nset key autotitle columnhead\nset xlabel '{x}'\nset ylabel 'J*'\n"
            f"plot '{csv_path.name}' using {xi}:{yi} with linespoints\n")
    (out_dir / f"{cfg.name}.gp").write_text(text, encoding="utf-8")


def sweep_trend_check(csv_path, parameter: str, direction: str = "nondecreasing", rtol: float = TREND_RTOL):
    """Check monotonicity of j_star along `parameter` with the other parameters held fixed.

    Returns (ok, message).  Steps smaller than rtol * max(1, |j|) count as ties.
    """
    if parameter not in PARAMETERS:
        raise UsageError(f"unknown parameter {parameter!r}; choose from {', '.join(PARAMETERS)}")
    if direction not in ("nondecreasing", "nonincreasing"):
        raise UsageError(f"unknown direction {direction!r}")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh)]
    if rows and ("j_star" not in rows[0] or parameter not in rows[0]):
        raise UsageError(f"{csv_path} is not a perflim run CSV")
    groups = {}
    for r in rows:
        if r.get("error") or r[parameter] == "" or r["j_star"] == "":
            continue
        key = tuple(r[p] for p in PARAMETERS if p != parameter)
        groups.setdefault(key, []).append((float(r[parameter]), float(r["j_star"])))
    sign = 1.0 if direction == "nondecreasing" else -1.0
    checked = 0
    for key, pts in groups.items():
        pts.sort()
        for (x0, j0), (x1, j1) in zip(pts, pts[1:]):
            checked += 1
            if sign * (j1 - j0) < -rtol * max(1.0, abs(j0)):
                fixed = ", ".join(f"{p}={v}" for p, v in zip([p for p in PARAMETERS if p != parameter], key) if v)
                return False, (f"FAIL {parameter}: j_star {direction} violated between {parameter}={x0:g} "
                               f"(j={j0:.12g}) and {parameter}={x1:g} (j={j1:.12g}) at {fixed}")
    if checked == 0:
        return True, f"PASS {parameter}: no consecutive points vary {parameter} (nothing to compare)"
    return True, f"PASS {parameter}: j_star {direction} over {checked} consecutive pairs"


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get("PERFLIM_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perflim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a sweep configuration and write CSV")
    run.add_argument("config")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--oracle", action="store_true", help="also run the finite-basis oracle")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (default: $PERFLIM_JOBS or 1)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    tr = sub.add_parser("check-trend", help="check monotonicity of j_star in a CSV")
    tr.add_argument("csv")
    tr.add_argument("--param", required=True)
    tr.add_argument("--direction", default="nondecreasing", choices=["nondecreasing", "nonincreasing"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except (ConfigError, OSError) as exc:
            print(f"perflim: {args.config}: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        jobs = args.jobs if args.jobs is not None else _jobs_default()
        path, rows, failures = run_config(cfg, Path(args.out), args.oracle, max(1, jobs), args.seed)
        print(f"wrote {len(rows)} rows to {path}")
        if failures:
            print(f"perflim: {failures} sweep point(s) failed; see the error column", file=sys.stderr)
            return EXIT_NUMERIC
        return EXIT_OK
    try:
        ok, msg = sweep_trend_check(args.csv, args.param, args.direction)
    except (UsageError, OSError) as exc:
        print(f"perflim: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(msg)
    return EXIT_OK if ok else EXIT_TREND


if __name__ == "__main__":
    sys.exit(main())
