"""Write a synthetic irradiance CSV (1 s by default) and a matching hourly load CSV."""

import argparse
from datetime import timedelta
from pathlib import Path

from fcsizing.ramps import write_irradiance_csv
from fcsizing.synthetic import DEFAULT_CLOUDINESS, synthetic_irradiance, synthetic_load


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="output directory")
    ap.add_argument("--days", type=int, default=7)
    ap.add_argument("--dt", type=float, default=1.0, help="irradiance sample period in seconds")
    ap.add_argument("--seed", type=int, default=20210607)
    ap.add_argument("--load-seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = synthetic_irradiance(args.days, args.dt, args.seed, DEFAULT_CLOUDINESS)
    write_irradiance_csv(out / "irradiance.csv", series)
    load = synthetic_load(24 * args.days, args.load_seed)
    with open(out / "load.csv", "w") as fh:
        fh.write("timestamp,load_MW\n")
        for h, v in enumerate(load):
            fh.write(f"{(series.start_time + timedelta(hours=h)).isoformat()},{v}\n")
    print(f"wrote {out / 'irradiance.csv'} ({len(series)} samples) and {out / 'load.csv'} ({len(load)} hours)")


if __name__ == "__main__":
    main()
