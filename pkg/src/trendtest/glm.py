"""Lasso-penalized linear and logistic regression.

Both families are fit on standardized columns with an unpenalized intercept
and reported on the original scale:

* linear:   (1/2n) * sum (y_i - a - x_i'b)^2 + lam * |b|_1
* logistic: (1/n)  * sum logistic NLL       + lam * |b|_1

The penalty is chosen by K-fold cross-validation over a log-spaced grid that
starts at the smallest penalty giving the null model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from trendtest import _kernels

Family = Literal["linear", "logistic"]

PROB_CLIP = 1e-12
DEFAULT_TOL = 1e-7
OUTER_TOL = 1e-5
MAX_OUTER = 100
MAX_SWEEPS = 100_000


class ConvergenceError(RuntimeError):
    pass


class DegenerateResponseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LassoFit:
    family: str
    intercept: float
    coefficients: np.ndarray
    lam: float
    center: np.ndarray
    scale: np.ndarray
    n_iterations: int
    converged: bool
    objective_trace: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


@dataclass(frozen=True)
class CVResult:
    lambdas: np.ndarray
    losses: np.ndarray
    best_index: int
    degenerate: bool = False

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.best_index])


@dataclass(frozen=True)
class _Standardized:
    xt: np.ndarray  # (q, n) standardized, excluded columns zeroed
    center: np.ndarray
    scale: np.ndarray
    include: np.ndarray


def _check_inputs(x, y, family):
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if x.ndim != 2:
        raise ValueError("design matrix must be 2-D")
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValueError("response length must match the number of rows")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in design matrix or response")
    if family not in ("linear", "logistic"):
        raise ValueError(f"unknown family {family!r}")
    if family == "logistic" and not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logistic response must be coded 0/1")
    return x, y


def _standardize(x: np.ndarray) -> _Standardized:
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    include = scale > 1e-12 * np.maximum(1.0, np.abs(center))
    safe = np.where(include, scale, 1.0)
    xs = (x - center) / safe
    xs[:, ~include] = 0.0
    return _Standardized(np.ascontiguousarray(xs.T), center, np.where(include, scale, 0.0), include)


def _lambda_max(st: _Standardized, y: np.ndarray) -> float:
    if st.xt.shape[0] == 0 or not st.include.any():
        return 0.0
    corr = _kernels.xty(st.xt, y - y.mean())
    return float(np.max(np.abs(corr)))


def lambda_max(x, y, family: Family = "linear") -> float:
    """Smallest penalty at which every slope is zero."""
    x, y = _check_inputs(x, y, family)
    return _lambda_max(_standardize(x), y)


def lambda_grid(lam_max: float, grid_size: int = 100, ratio: float = 1e-3) -> np.ndarray:
    if lam_max <= 0:
        return np.zeros(1)
    return lam_max * np.logspace(0.0, np.log10(ratio), grid_size)


def _logit(p: float) -> float:
    p = min(max(p, PROB_CLIP), 1.0 - PROB_CLIP)
    return float(np.log(p / (1.0 - p)))


def _to_fit(family, st, y_mean, a_std, beta, lam, iters, converged, trace) -> LassoFit:
    safe = np.where(st.include, st.scale, 1.0)
    coef = np.where(st.include, beta / safe, 0.0)
    support = np.flatnonzero(coef)
    if family == "linear":
        intercept = y_mean - float(np.dot(st.center[support], coef[support]))
    elif support.size == 0:
        # closed form, so an empty fit matches the intercept-only model bit for bit
        intercept = _logit(y_mean)
    else:
        intercept = a_std - float(np.dot(st.center[support], coef[support]))
    return LassoFit(family, float(intercept), coef, float(lam), st.center, st.scale,
                    int(iters), bool(converged), trace)


def _path(st: _Standardized, y: np.ndarray, family: str, lambdas, tol=DEFAULT_TOL,
          record=False) -> list[LassoFit]:
    q, n = st.xt.shape
    beta = np.zeros(q)
    fits = []
    lmax = _lambda_max(st, y)
    y_mean = float(y.mean())
    null_intercept = y_mean if family == "linear" else _logit(y_mean)
    single_class = family == "logistic" and y_mean in (0.0, 1.0)
    # the null model is exact at and above lambda_max
    n_null = 0
    while n_null < len(lambdas) and lambdas[n_null] >= lmax and lmax > 0:
        fits.append(_to_fit(family, st, y_mean, null_intercept, beta.copy(), lambdas[n_null],
                            0, not single_class, np.empty(0)))
        n_null += 1
    lambdas = lambdas[n_null:]
    if len(lambdas) == 0:
        return fits
    if family == "linear":
        yc = y - y_mean
        g_mat = _kernels.gram(st.xt)
        c = _kernels.xty(st.xt, yc)
        syy = float(np.dot(yc, yc)) / n
        for lam in lambdas:
            trace = np.empty(MAX_SWEEPS if record else 0)
            sweeps, conv = _kernels.cd_gaussian(g_mat, c, syy, beta, float(lam), st.include,
                                                tol, MAX_SWEEPS, trace)
            fits.append(_to_fit(family, st, y_mean, 0.0, beta.copy(), lam, sweeps, conv,
                                trace[:sweeps].copy()))
        return fits

    if single_class:
        # the likelihood has no finite maximizer
        a = null_intercept
        for lam in lambdas:
            fits.append(_to_fit(family, st, y_mean, a, beta.copy(), lam, 0, False, np.empty(0)))
        return fits
    a = null_intercept
    # sequential strong rule: sweep only over likely-active columns, then
    # check the KKT conditions on the rest
    grad = _kernels.logistic_gradient(st.xt, y, a, beta)
    lam_prev = lmax
    for lam in lambdas:
        lam = float(lam)
        work = st.include & ((np.abs(grad) >= 2.0 * lam - lam_prev) | (beta != 0))
        iters_total = 0
        while True:
            trace = np.empty(MAX_OUTER)
            a, iters, conv = _kernels.irls_logistic(st.xt, y, beta, a, lam, work, tol,
                                                    OUTER_TOL, MAX_OUTER, MAX_SWEEPS, trace)
            iters_total += iters
            grad = _kernels.logistic_gradient(st.xt, y, a, beta)
            violated = st.include & ~work & (np.abs(grad) > lam)
            if not violated.any():
                break
            work = work | violated
        lam_prev = lam
        fits.append(_to_fit(family, st, y_mean, a, beta.copy(), lam, iters_total, conv,
                            trace[:iters].copy()))
    return fits


def lasso_path(x, y, family: Family, lambdas, *, tol: float = DEFAULT_TOL) -> list[LassoFit]:
    """Warm-started fits along ``lambdas`` (in the order given)."""
    x, y = _check_inputs(x, y, family)
    lambdas = np.asarray(lambdas, dtype=float)
    if (lambdas < 0).any():
        raise ValueError("penalty must be nonnegative")
    return _path(_standardize(x), y, family, lambdas, tol=tol)


def fit_lasso(x, y, family: Family, lam: float, *, tol: float = DEFAULT_TOL,
              record_objective: bool = False) -> LassoFit:
    """Fit at a single penalty from a zero start.

    For the logistic family a single-class response has no finite solution:
    with ``lam == 0`` this raises :class:`ConvergenceError`, otherwise the
    clamped null model is returned with ``converged=False``.
    """
    x, y = _check_inputs(x, y, family)
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("penalty must be a nonnegative finite number")
    if family == "logistic" and lam == 0 and y.min() == y.max():
        raise ConvergenceError("logistic fit with a single response class and no penalty")
    st = _standardize(x)
    return _path(st, y, family, [lam], tol=tol, record=record_objective)[0]


def predict(fit: LassoFit, x) -> np.ndarray | float:
    """Linear predictor (linear) or clamped probability (logistic).

    Accepts one row or a 2-D matrix.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.ascontiguousarray(x[None, :] if single else x)
    if x2.shape[1] != fit.n_features:
        raise ValueError(f"expected {fit.n_features} columns, got {x2.shape[1]}")
    eta = _kernels.linear_predictor(x2, fit.intercept, fit.coefficients, fit.support)
    if fit.family == "logistic":
        out = np.clip(1.0 / (1.0 + np.exp(-eta)), PROB_CLIP, 1.0 - PROB_CLIP)
    else:
        out = eta
    return float(out[0]) if single else out


def fold_ids(n: int, k: int, seed: int) -> np.ndarray:
    """Seeded shuffle of ``range(n)`` dealt into ``k`` groups."""
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=np.int64)
    ids[perm] = np.arange(n) % k
    return ids


def _loss(family, y, pred):
    if family == "linear":
        return (y - pred) ** 2
    return -(y * np.log(pred) + (1.0 - y) * np.log1p(-pred))


def cross_validate(x, y, family: Family, k: int = 10, grid_size: int = 100,
                   seed: int = 0) -> CVResult:
    """Out-of-fold loss along the penalty grid (ties go to the larger penalty)."""
    x, y = _check_inputs(x, y, family)
    n = x.shape[0]
    if k < 2:
        raise ValueError("need at least 2 CV folds")
    if n < 2 * k:
        raise ValueError(f"n={n} too small for {k}-fold cross-validation (need n >= 2k)")
    st = _standardize(x)
    lmax = _lambda_max(st, y)
    if lmax == 0.0:
        if x.shape[1] > 0 and st.include.any():
            warnings.warn("constant response; returning the null-model penalty",
                          DegenerateResponseWarning, stacklevel=2)
        return CVResult(np.zeros(1), np.zeros(1), 0, degenerate=True)
    lambdas = lambda_grid(lmax, grid_size)
    ids = fold_ids(n, k, seed)
    total = np.zeros(lambdas.shape[0])
    for fold in range(k):
        train = ids != fold
        test = ~train
        fits = _path(_standardize(x[train]), y[train], family, lambdas)
        x_test = np.ascontiguousarray(x[test])
        for li, f in enumerate(fits):
            total[li] += _loss(family, y[test], predict(f, x_test)).sum()
    losses = total / n
    return CVResult(lambdas, losses, int(np.argmin(losses)))


def cv_select_lambda(x, y, family: Family, k: int = 10, grid_size: int = 100,
                     seed: int = 0) -> float:
    return cross_validate(x, y, family, k, grid_size, seed).best_lambda


def fit_lasso_cv(x, y, family: Family, k: int = 10, grid_size: int = 100,
                 seed: int = 0) -> LassoFit:
    """Cross-validated fit, warm-started down the grid to the chosen penalty."""
    x, y = _check_inputs(x, y, family)
    st = _standardize(x)
    if x.shape[1] == 0:
        return _path(st, y, family, [0.0])[0]
    if x.shape[0] < 4:
        # too few rows to cross-validate
        return _path(st, y, family, [_lambda_max(st, y)])[0]
    k = max(2, min(k, x.shape[0] // 2))
    cv = cross_validate(x, y, family, k, grid_size, seed)
    return _path(st, y, family, cv.lambdas[: cv.best_index + 1])[-1]
