"""Cross-fitted doubly robust estimation of the common-trend test statistic
and of the DiD effect on the treated.

Nuisance functions (all lasso, penalty by cross-validation):

* ``mu_y0x``  E[Y1 - Y0 | Y0, X, D=0]   (linear, controls only)
* ``mu_x``    E[Y1 - Y0 | X, D=0]       (linear, controls only)
* ``p_y0x``   Pr(D=1 | Y0, X)           (logistic, all units)
* ``p_x``     Pr(D=1 | X)               (logistic, all units)

The test statistic is the difference of two doubly robust estimates of the
mean trend among treated units, one adjusting for (Y0, X) and one for X only.
Inverse-probability weights of controls are odds ``p / (1 - p)`` normalized
to sum to one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from trendtest import glm
from trendtest.data import DesignSpec, PanelDataset, expand_design
from trendtest.stats import two_sided_normal_pvalue


class FoldError(ValueError):
    pass


class ScoreError(ValueError):
    pass


@dataclass(frozen=True)
class DMLConfig:
    folds: int = 2
    trim: float = 0.99
    seed: int = 0
    cv_folds: int = 10
    grid_size: int = 100
    n_jobs: int = 1
    design: DesignSpec | None = None

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 cross-fitting folds")
        if not 0.0 < self.trim <= 1.0:
            raise ValueError("trim must lie in (0, 1]")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be positive")


@dataclass(frozen=True)
class NuisanceSet:
    mu_y0x: glm.LassoFit | None
    mu_x: glm.LassoFit
    p_y0x: glm.LassoFit | None
    p_x: glm.LassoFit
    fold_id: int


@dataclass(frozen=True)
class Predictions:
    """Out-of-fold nuisance predictions, one entry per unit."""

    mu_x: np.ndarray
    p_x: np.ndarray
    mu_y0x: np.ndarray | None = None
    p_y0x: np.ndarray | None = None
    fold_id: np.ndarray | None = None


@dataclass(frozen=True)
class ScoreVector:
    psi: np.ndarray
    retained: np.ndarray
    n_trimmed: int
    pr_d1: float
    estimate: float
    weights: tuple[np.ndarray, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    theta_hat: float
    se: float
    t_stat: float
    p_value: float
    n_used: int
    n_trimmed: int
    folds: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AtetResult:
    atet_hat: float
    se: float
    t_stat: float
    p_value: float
    n_used: int
    n_trimmed: int
    folds: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _cv_seed(seed: int, fold: int) -> int:
    # the same CV split seed is shared by the (Y0, X) and X-only fits so that
    # an uninformative Y0 leaves both fits identical
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _with_y0(y0: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.column_stack([y0, X]))


def _fit_fold(ds: PanelDataset, ids: np.ndarray, fold: int, seed: int, which: str,
              cv_folds: int, grid_size: int):
    train = ids != fold
    test = ~train
    d_tr = ds.d[train]
    ctrl = train & (ds.d == 0)
    cv_seed = _cv_seed(seed, fold)
    kw = dict(k=cv_folds, grid_size=grid_size, seed=cv_seed)

    mu_x = glm.fit_lasso_cv(ds.X[ctrl], ds.dy[ctrl], "linear", **kw)
    p_x = glm.fit_lasso_cv(ds.X[train], d_tr, "logistic", **kw)
    mu_y0x = p_y0x = None
    if which == "theta":
        mu_y0x = glm.fit_lasso_cv(_with_y0(ds.y0[ctrl], ds.X[ctrl]), ds.dy[ctrl], "linear", **kw)
        p_y0x = glm.fit_lasso_cv(_with_y0(ds.y0[train], ds.X[train]), d_tr, "logistic", **kw)

    X_te = np.ascontiguousarray(ds.X[test])
    preds = {"mu_x": glm.predict(mu_x, X_te), "p_x": glm.predict(p_x, X_te)}
    if which == "theta":
        Z_te = _with_y0(ds.y0[test], X_te)
        preds["mu_y0x"] = glm.predict(mu_y0x, Z_te)
        preds["p_y0x"] = glm.predict(p_y0x, Z_te)
    return NuisanceSet(mu_y0x, mu_x, p_y0x, p_x, fold), test, preds


def crossfit(ds: PanelDataset, folds: int = 2, seed: int = 0,
             which: Literal["theta", "atet"] = "theta", *, cv_folds: int = 10,
             grid_size: int = 100, n_jobs: int = 1) -> tuple[list[NuisanceSet], Predictions]:
    """Train nuisances on each fold's complement and predict out of fold.

    Folds may be trained on ``n_jobs`` threads; the output does not depend
    on the thread count.
    """
    if which not in ("theta", "atet"):
        raise ValueError(f"unknown target {which!r}")
    if folds < 2:
        raise FoldError("need at least 2 cross-fitting folds")
    if ds.n < 2 * folds:
        raise FoldError(f"n={ds.n} is too small for {folds} folds")
    ids = glm.fold_ids(ds.n, folds, seed)
    for f in range(folds):
        train = ids != f
        n_treated = int(ds.d[train].sum())
        n_control = int(train.sum()) - n_treated
        if n_treated == 0 or n_control < 2:
            raise FoldError(
                f"training part of fold {f} has {n_treated} treated and {n_control} control "
                "units; use fewer folds"
            )

    def work(f):
        return _fit_fold(ds, ids, f, seed, which, cv_folds, grid_size)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, range(folds)))
    else:
        results = [work(f) for f in range(folds)]

    keys = ["mu_x", "p_x"] + (["mu_y0x", "p_y0x"] if which == "theta" else [])
    out = {k: np.empty(ds.n) for k in keys}
    for _, test, preds in results:
        for k in keys:
            out[k][test] = preds[k]
    return [r[0] for r in results], Predictions(fold_id=ids, **out)


def _normalized_odds(p: np.ndarray) -> np.ndarray:
    odds = p / (1.0 - p)
    w = odds / odds.sum()
    if abs(w.sum() - 1.0) > 1e-12:
        raise ScoreError("normalized weights do not sum to one")
    return w


def _retained_groups(ds: PanelDataset, keep: np.ndarray, props: list[np.ndarray]):
    if not keep.any():
        raise ScoreError("every unit was trimmed")
    treated = ds.d[keep] == 1
    n1 = int(treated.sum())
    if n1 == 0 or n1 == treated.size:
        raise ScoreError("trimming left no treated or no control units")
    for p in props:
        if (1.0 - p[keep]).min() < 1e-12:
            raise ScoreError("propensity score numerically equal to one after trimming")
    return treated, n1


def _dr_term(dy, mu, p, treated, n1):
    """Per-unit integrand of a normalized DR estimate of E[mu | D=1].

    Its mean over retained units equals mean_treated(mu) + sum_controls w*(dy - mu).
    """
    size = dy.shape[0]
    ctrl = ~treated
    w = _normalized_odds(p[ctrl])
    psi = np.zeros(size)
    psi[treated] = mu[treated] * (size / n1)
    psi[ctrl] = size * w * (dy[ctrl] - mu[ctrl])
    estimate = float(mu[treated].mean() + np.dot(w, dy[ctrl] - mu[ctrl]))
    return psi, w, estimate


def theta_scores(ds: PanelDataset, pred: Predictions, trim: float = 0.99) -> ScoreVector:
    """Trim on either propensity, then form the test-statistic scores."""
    if pred.mu_y0x is None or pred.p_y0x is None:
        raise ValueError("theta scores need (Y0, X) nuisance predictions")
    keep = (pred.p_y0x <= trim) & (pred.p_x <= trim)
    treated, n1 = _retained_groups(ds, keep, [pred.p_y0x, pred.p_x])
    dy = ds.dy[keep]
    psi1, w1, est1 = _dr_term(dy, pred.mu_y0x[keep], pred.p_y0x[keep], treated, n1)
    psi2, w2, est2 = _dr_term(dy, pred.mu_x[keep], pred.p_x[keep], treated, n1)
    return ScoreVector(psi1 - psi2, np.flatnonzero(keep), int((~keep).sum()),
                       float(ds.d.mean()), est1 - est2, (w1, w2))


def atet_scores(ds: PanelDataset, pred: Predictions, trim: float = 0.99) -> ScoreVector:
    """Doubly robust DiD scores for the effect on the treated, outcome Y1 - Y0."""
    keep = pred.p_x <= trim
    treated, n1 = _retained_groups(ds, keep, [pred.p_x])
    dy = ds.dy[keep]
    size = dy.shape[0]
    psi_adj, w, adj = _dr_term(dy, pred.mu_x[keep], pred.p_x[keep], treated, n1)
    psi = -psi_adj
    psi[treated] += dy[treated] * (size / n1)
    est = float(dy[treated].mean() - adj)
    return ScoreVector(psi, np.flatnonzero(keep), int((~keep).sum()), float(ds.d.mean()),
                       est, (w,))


def _inference(scores: ScoreVector):
    psi = scores.psi
    n_used = psi.shape[0]
    se = math.sqrt(float(np.var(psi, ddof=1)) / n_used) if n_used > 1 else float("nan")
    est = scores.estimate
    if se > 0:
        t = est / se
    else:
        t = 0.0 if est == 0 else math.copysign(math.inf, est)
    return est, se, t, two_sided_normal_pvalue(t), n_used


def _prepare(ds: PanelDataset, config: DMLConfig) -> PanelDataset:
    return expand_design(ds, config.design) if config.design is not None else ds


def _test_result(scores: ScoreVector, config: DMLConfig) -> TestResult:
    est, se, t, pv, n_used = _inference(scores)
    return TestResult(est, se, t, pv, n_used, scores.n_trimmed, config.folds, config.seed)


def _atet_result(scores: ScoreVector, config: DMLConfig) -> AtetResult:
    est, se, t, pv, n_used = _inference(scores)
    return AtetResult(est, se, t, pv, n_used, scores.n_trimmed, config.folds, config.seed)


def _crossfit(ds, config, which):
    return crossfit(ds, config.folds, config.seed, which, cv_folds=config.cv_folds,
                    grid_size=config.grid_size, n_jobs=config.n_jobs)


def test_common_trends(ds: PanelDataset, config: DMLConfig = DMLConfig()) -> TestResult:
    """Test H0: theta = 0 with a two-sided normal p-value.

    With no covariates this is the unconditional matched-group test: the
    X-only nuisances reduce to the training-fold control mean trend and the
    training-fold treated share.
    """
    ds = _prepare(ds, config)
    _, pred = _crossfit(ds, config, "theta")
    return _test_result(theta_scores(ds, pred, config.trim), config)


test_common_trends.__test__ = False


def estimate_atet(ds: PanelDataset, config: DMLConfig = DMLConfig()) -> AtetResult:
    """DR DiD estimate of the effect on the treated.

    With no covariates the estimate is the plain difference of mean changes.
    """
    ds = _prepare(ds, config)
    _, pred = _crossfit(ds, config, "atet")
    return _atet_result(atet_scores(ds, pred, config.trim), config)


def analyze(ds: PanelDataset, config: DMLConfig = DMLConfig()) -> tuple[TestResult, AtetResult]:
    """Test and effect estimate from a single cross-fit.

    Identical to calling :func:`test_common_trends` and :func:`estimate_atet`
    separately, since the X-only nuisances use the same folds and seeds.
    """
    ds = _prepare(ds, config)
    _, pred = _crossfit(ds, config, "theta")
    return (_test_result(theta_scores(ds, pred, config.trim), config),
            _atet_result(atet_scores(ds, pred, config.trim), config))
