"""Full pipeline on a CSV pair: ramps, sizing of every mode, worst-case simulation, report.

    python scripts/make_synthetic_week.py --out data
    python scripts/run_case_study.py data/irradiance.csv data/load.csv --out study

Exits with the worst exit code of the pipeline steps.
"""

import argparse
import sys
from pathlib import Path

from fcsizing.cli import main as cli

MODES = ("Baseline", "NoFC", "StaticFC", "DynamicFC")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("irradiance")
    ap.add_argument("load")
    ap.add_argument("--out", default="study")
    ap.add_argument("--config")
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--time-limit", type=float)
    args = ap.parse_args()

    common = ["--out", args.out] + (["--config", args.config] if args.config else [])
    codes = [cli(["ramps", args.irradiance] + common)]
    size = ["size", "--irradiance", args.irradiance, "--load", args.load] + common
    if args.horizon:
        size += ["--horizon", str(args.horizon)]
    if args.time_limit:
        size += ["--time-limit", str(args.time_limit)]
    codes.append(cli(size))
    root = Path(args.out) / "size"
    for mode in MODES:
        schedule = root / mode / "schedule.json"
        if schedule.exists():
            print(f"-- {mode}")
            codes.append(cli(["simulate", str(schedule), "--hulls", str(root / "hulls.csv")] + common))
    codes.append(cli(["report", "--out", args.out]))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
