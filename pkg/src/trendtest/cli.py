"""Command-line interface; every subcommand prints one JSON document."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from trendtest import dml, simple_tests
from trendtest.data import ColumnMap, DesignSpec, expand_design, load_csv
from trendtest.sim import SimulationConfig, run_monte_carlo, write_records_csv


class UsageError(ValueError):
    pass


def parse_expand(text: str | None) -> DesignSpec | None:
    """``interactions,squares:age:education,y0`` -> DesignSpec."""
    if not text:
        return None
    spec = DesignSpec()
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        if token == "interactions":
            spec = replace(spec, pairwise_interactions=True)
        elif token.startswith("squares:"):
            cols = tuple(c for c in token.split(":")[1:] if c)
            spec = replace(spec, squares_of=spec.squares_of + cols)
        elif token == "y0":
            spec = replace(spec, include_pretreatment_outcome=True)
        else:
            raise UsageError(f"unknown --expand item {token!r}")
    return spec


def _column_map(args) -> ColumnMap:
    covs = None if args.covariates in (None, "all-others") else [
        c.strip() for c in args.covariates.split(",") if c.strip()
    ]
    return ColumnMap(y0=args.y0, y1=args.y1, d=args.d, covariates=covs, unit_id=args.id)


def _add_input_args(p: argparse.ArgumentParser, covariates: bool = True) -> None:
    p.add_argument("--input", required=True, help="panel CSV file with a header row")
    p.add_argument("--y0", default="y0", help="pre-treatment outcome column")
    p.add_argument("--y1", default="y1", help="post-treatment outcome column")
    p.add_argument("--d", default="d", help="0/1 treatment column")
    p.add_argument("--id", default=None, help="optional unit identifier column")
    if covariates:
        p.add_argument("--covariates", default="all-others",
                       help="comma-separated covariate columns, or 'all-others'")
        p.add_argument("--expand", default=None,
                       help="design expansion: 'interactions', 'squares:a:b', 'y0' (comma-separated)")
    p.add_argument("--output", default=None, help="also write the JSON result to this file")


def _add_dml_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", type=int, default=2, help="cross-fitting folds")
    p.add_argument("--trim", type=float, default=0.99, help="drop units with propensity above this")
    p.add_argument("--seed", type=int, default=0, help="seed for fold assignment and CV splits")
    p.add_argument("--cv-folds", type=int, default=10, help="folds for lasso penalty selection")
    p.add_argument("--grid-size", type=int, default=100, help="number of penalties on the lasso grid")
    p.add_argument("--threads", type=int, default=1, help="threads for cross-fitting folds")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="trendtest", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="DML test of conditional common trends", formatter_class=fmt)
    _add_input_args(p)
    _add_dml_args(p)

    p = sub.add_parser("atet", help="DML DiD effect on the treated", formatter_class=fmt)
    _add_input_args(p)
    _add_dml_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo study", formatter_class=fmt)
    p.add_argument("--n", type=int, default=1000, help="units per replication")
    p.add_argument("--p", type=int, default=200, help="number of covariates")
    p.add_argument("--beta-u", type=float, default=0.0, help="trend heterogeneity in the fixed effect")
    p.add_argument("--beta-q", type=float, default=0.0, help="time-varying confounding")
    p.add_argument("--beta-v0", type=float, default=0.0, help="pre-period shock loading")
    p.add_argument("--reps", type=int, default=1000, help="replications")
    p.add_argument("--seed", type=int, default=1, help="master seed")
    p.add_argument("--folds", type=int, default=2, help="cross-fitting folds")
    p.add_argument("--trim", type=float, default=0.99, help="propensity trimming threshold")
    p.add_argument("--alpha", type=float, default=0.05, help="test level")
    p.add_argument("--cv-folds", type=int, default=10, help="folds for lasso penalty selection")
    p.add_argument("--grid-size", type=int, default=100, help="number of penalties on the lasso grid")
    p.add_argument("--threads", type=int, default=1, help="parallel worker processes")
    p.add_argument("--records", default=None, help="write per-replication CSV here")
    p.add_argument("--output", default=None, help="also write the JSON summary to this file")

    p = sub.add_parser("pretrend-ols", help="t-test for binary Y0 among controls", formatter_class=fmt)
    _add_input_args(p, covariates=False)
    p.add_argument("--classical", action="store_true", help="classical instead of HC1 standard errors")

    p = sub.add_parser("pretrend-ftest", help="F-test for discrete Y0 among controls", formatter_class=fmt)
    _add_input_args(p, covariates=False)
    p.add_argument("--robust", action="store_true", help="HC1 Wald version of the F statistic")
    p.add_argument("--max-levels", type=int, default=50, help="maximum number of Y0 levels")
    return parser


def _dml_config(args) -> dml.DMLConfig:
    return dml.DMLConfig(folds=args.folds, trim=args.trim, seed=args.seed,
                         cv_folds=args.cv_folds, grid_size=args.grid_size, n_jobs=args.threads)


def _load(args, covariates: bool = True):
    ds = load_csv(args.input, _column_map(args) if covariates else
                  ColumnMap(y0=args.y0, y1=args.y1, d=args.d, covariates=[], unit_id=args.id))
    if covariates:
        spec = parse_expand(args.expand)
        if spec is not None:
            ds = expand_design(ds, spec)
    return ds


def run(args) -> dict:
    if args.command == "test":
        ds = _load(args)
        return {**dml.test_common_trends(ds, _dml_config(args)).to_dict(), "n_covariates": ds.p}
    if args.command == "atet":
        ds = _load(args)
        return {**dml.estimate_atet(ds, _dml_config(args)).to_dict(), "n_covariates": ds.p}
    if args.command == "simulate":
        config = SimulationConfig(
            n=args.n, p=args.p, beta_u=args.beta_u, beta_q=args.beta_q, beta_v0=args.beta_v0,
            reps=args.reps, seed=args.seed, folds=args.folds, trim=args.trim, alpha=args.alpha,
            cv_folds=args.cv_folds, grid_size=args.grid_size, threads=args.threads,
        )
        summary, records = run_monte_carlo(config)
        if args.records:
            write_records_csv(records, args.records)
        row = {k: getattr(config, k) for k in ("n", "p", "beta_u", "beta_q", "beta_v0", "reps", "seed")}
        return {**row, **summary.to_dict()}
    if args.command == "pretrend-ols":
        return simple_tests.pretrend_ols(_load(args, covariates=False), robust=not args.classical).to_dict()
    if args.command == "pretrend-ftest":
        ds = _load(args, covariates=False)
        return simple_tests.pretrend_ftest(ds, robust=args.robust, max_levels=args.max_levels).to_dict()
    raise UsageError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = run(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"trendtest: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"trendtest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(result, indent=2)
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
