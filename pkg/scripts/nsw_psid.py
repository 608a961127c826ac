"""Common-trend test and DiD effect on the NSW experimental treated vs PSID controls.

    python scripts/nsw_psid.py path/to/nsw_psid.csv [--seed 0]

Expects the usual Dehejia-Wahba column names (treat, age, education or educ,
black, hispanic, married, nodegree, re75, re78). Earnings in 1975 and 1978
are the pre- and post-treatment outcomes; an unemployed-in-1975 indicator is
derived from re75.
"""

import argparse
import csv
import json

import numpy as np

from trendtest.data import DesignSpec, PanelDataset, expand_design
from trendtest.dml import DMLConfig, analyze

RAW = ("age", "education", "nodegree", "black", "hispanic", "married", "u75")
DESIGN = DesignSpec(pairwise_interactions=True, squares_of=("age", "education"))


def load_nsw_psid(path) -> PanelDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    col = lambda name: np.array([float(r[name]) for r in rows])
    educ = "education" if "education" in rows[0] else "educ"
    re75 = col("re75")
    X = np.column_stack([col("age"), col(educ), col("nodegree"), col("black"),
                         col("hispanic"), col("married"), (re75 == 0).astype(float)])
    return PanelDataset(re75, col("re78"), col("treat"), X, RAW)


def run(path, seed=0):
    ds = expand_design(load_nsw_psid(path), DESIGN)
    test, atet = analyze(ds, DMLConfig(folds=2, trim=0.99, seed=seed))
    return ds, test, atet


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("path")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    ds, test, atet = run(args.path, args.seed)
    print(json.dumps({"n": ds.n, "n_treated": int(ds.d.sum()), "n_covariates": ds.p,
                      "test": test.to_dict(), "atet": atet.to_dict()}, indent=2))


if __name__ == "__main__":
    main()
