"""Run the fig3/fig4/fig5 sweeps and check the monotone trends."""

import argparse
import sys
from pathlib import Path

from perflim.cli import run_config, sweep_trend_check
from perflim.config import load_config

ROOT = Path(__file__).resolve().parent.parent
TRENDS = {"fig4": ["f", "h"], "fig5": ["sigma", "gamma"]}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--oracle", action="store_true")
    args = ap.parse_args(argv)
    out = Path(args.out)
    status = 0
    for name in ("fig3", "fig4", "fig5"):
        cfg = load_config(ROOT / "configs" / f"{name}.json")
        path, rows, failures = run_config(cfg, out, args.oracle, args.jobs)
        print(f"{name}: {len(rows)} rows, {failures} failed -> {path}")
        status |= bool(failures)
        for p in TRENDS.get(name, []):
            ok, msg = sweep_trend_check(path, p)
            print(f"  {msg}")
            status |= not ok
    return int(status)


if __name__ == "__main__":
    sys.exit(main())
