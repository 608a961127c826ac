"""Monte Carlo study of the common-trend test and the DML DiD estimator.

Data generating process (true effect on the treated = 1)::

    X  ~ N(0, S),  S_ij = 0.5 ** |i - j|,   beta_X[i] = 0.7 / i
    U, Q, V0, V1 iid N(0, 1)
    Y0 = U + beta_v0 * V0
    D  = 1{X'beta_X + U + Q > 0}
    Y1 = 1 + D + X'beta_X + (1 + beta_u) * U - beta_q * Q + V1

beta_u, beta_q and beta_v0 switch on the three ways common trends can fail.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from trendtest.data import PanelDataset
from trendtest.dml import DMLConfig, analyze

log = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.05


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 1000
    p: int = 200
    beta_u: float = 0.0
    beta_q: float = 0.0
    beta_v0: float = 0.0
    reps: int = 1000
    seed: int = 1
    folds: int = 2
    trim: float = 0.99
    true_effect: float = 1.0
    alpha: float = 0.05
    cv_folds: int = 10
    grid_size: int = 100
    threads: int = 1

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.n < 4 * self.folds:
            raise ValueError("n must be at least 4 * folds")
        if not 0.0 < self.trim <= 1.0:
            raise ValueError("trim must lie in (0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass(frozen=True)
class RepRecord:
    rep: int
    theta_hat: float
    se: float
    pval: float
    atet_hat: float
    atet_se: float
    n_trimmed: int


@dataclass(frozen=True)
class SimulationSummary:
    mean_est: float
    std: float
    mean_se: float
    mean_pval: float
    rejection_rate: float
    bias: float
    rmse: float
    reps_completed: int
    reps_failed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=16)
def toeplitz_cholesky(p: int, rho: float = 0.5) -> np.ndarray:
    """Lower Cholesky factor of the covariance ``rho ** |i - j|``."""
    idx = np.arange(p)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SimulationError(f"covariance factorization failed for p={p}") from exc
    chol.setflags(write=False)
    return chol


def covariate_coefficients(p: int) -> np.ndarray:
    return 0.7 / np.arange(1, p + 1)


def rep_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep_index]))


def generate(config: SimulationConfig, rep_index: int) -> PanelDataset:
    rng = rep_rng(config.seed, rep_index)
    n, p = config.n, config.p
    X = rng.standard_normal((n, p)) @ toeplitz_cholesky(p).T
    u, q, v0, v1 = rng.standard_normal((4, n))
    index = X @ covariate_coefficients(p)
    y0 = u + config.beta_v0 * v0
    d = (index + u + q > 0).astype(float)
    y1 = config.true_effect + d * config.true_effect + index \
        + (1.0 + config.beta_u) * u - config.beta_q * q + v1
    return PanelDataset(y0, y1, d, X)


def _dml_seed(seed: int, rep_index: int) -> int:
    return int(np.random.SeedSequence([seed, rep_index, 1]).generate_state(1)[0])


def run_replication(config: SimulationConfig, rep_index: int) -> RepRecord:
    ds = generate(config, rep_index)
    dml_config = DMLConfig(folds=config.folds, trim=config.trim,
                           seed=_dml_seed(config.seed, rep_index),
                           cv_folds=config.cv_folds, grid_size=config.grid_size)
    test, atet = analyze(ds, dml_config)
    return RepRecord(rep_index, test.theta_hat, test.se, test.p_value,
                     atet.atet_hat, atet.se, test.n_trimmed)


def _safe_replication(args):
    config, rep = args
    try:
        return run_replication(config, rep)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return f"{type(exc).__name__}: {exc}"


def summarize(records: list[RepRecord], true_effect: float = 1.0, alpha: float = 0.05,
              reps_failed: int = 0) -> SimulationSummary:
    if not records:
        raise SimulationError("no completed replications to summarize")
    est = np.array([r.theta_hat for r in records])
    se = np.array([r.se for r in records])
    pv = np.array([r.pval for r in records])
    err = np.array([r.atet_hat for r in records]) - true_effect
    std = float(est.std(ddof=1)) if est.size > 1 else 0.0
    return SimulationSummary(
        mean_est=float(est.mean()),
        std=std,
        mean_se=float(se.mean()),
        mean_pval=float(pv.mean()),
        rejection_rate=float((pv <= alpha).mean()),
        bias=float(err.mean()),
        rmse=float(math.sqrt((err ** 2).mean())),
        reps_completed=len(records),
        reps_failed=reps_failed,
    )


def run_monte_carlo(config: SimulationConfig) -> tuple[SimulationSummary, list[RepRecord]]:
    """Run ``config.reps`` replications and summarize them in rep order.

    Failed replications are excluded; more than 5% failures is an error.
    Results do not depend on ``config.threads``.
    """
    jobs = [(config, r) for r in range(config.reps)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(_safe_replication, jobs, chunksize=1))
    else:
        outcomes = [_safe_replication(j) for j in jobs]
    records = [o for o in outcomes if isinstance(o, RepRecord)]
    failures = [(r, o) for r, o in enumerate(outcomes) if not isinstance(o, RepRecord)]
    for rep, msg in failures:
        log.warning("replication %d failed: %s", rep, msg)
    if len(failures) > MAX_FAILURE_SHARE * config.reps:
        raise SimulationError(
            f"{len(failures)} of {config.reps} replications failed (first: {failures[0][1]})"
        )
    return summarize(records, config.true_effect, config.alpha, len(failures)), records


def write_records_csv(records: list[RepRecord], path) -> None:
    names = [f.name for f in fields(RepRecord)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rep", "theta_hat", "se", "pval", "atet_hat", "atet_se", "n_trimmed"])
        for r in records:
            w.writerow([repr(getattr(r, k)) if isinstance(getattr(r, k), float) else getattr(r, k)
                        for k in names])
