"""Monte Carlo table for the four trend scenarios.

    python scripts/run_scenarios.py --n 2000 4000 --p 200 --reps 1000 --threads 8

Prints one row per (scenario, n) and optionally writes them to CSV.
"""

import argparse
import csv
import time
from dataclasses import fields

from trendtest.sim import SimulationConfig, SimulationSummary, run_monte_carlo

SCENARIOS = {
    "null": dict(),
    "beta_u": dict(beta_u=0.5),
    "beta_q": dict(beta_q=0.5),
    "beta_v0": dict(beta_v0=0.5),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 4000])
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--scenarios", nargs="+", choices=list(SCENARIOS), default=list(SCENARIOS))
    ap.add_argument("--csv", default=None, help="write rows here")
    args = ap.parse_args()

    cols = [f.name for f in fields(SimulationSummary)]
    print(f"{'scenario':>8} {'n':>5} " + " ".join(f"{c[:9]:>9}" for c in cols[:7]) + "  secs")
    rows = []
    for name in args.scenarios:
        for n in args.n:
            cfg = SimulationConfig(n=n, p=args.p, reps=args.reps, seed=args.seed,
                                   threads=args.threads, **SCENARIOS[name])
            t0 = time.perf_counter()
            summary, _ = run_monte_carlo(cfg)
            secs = time.perf_counter() - t0
            vals = summary.to_dict()
            print(f"{name:>8} {n:>5} " + " ".join(f"{vals[c]:9.3f}" for c in cols[:7])
                  + f"  {secs:.0f}", flush=True)
            rows.append({"scenario": name, "n": n, "p": args.p, **vals})
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
