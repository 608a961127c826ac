"""Compiled coordinate-descent kernels.

All reductions are written as explicit loops so results do not depend on the
BLAS build or its thread count. Column-major access goes through transposed
(q, n) arrays.
"""

import numpy as np
from numba import njit

_W_FLOOR = 1e-5
_ETA_CAP = 30.0


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def soft_threshold(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def gram(xt):
    """``xt @ xt.T / n`` for a (q, n) array."""
    q, n = xt.shape
    g = np.empty((q, q))
    for j in range(q):
        for k in range(j, q):
            s = 0.0
            for i in range(n):
                s += xt[j, i] * xt[k, i]
            g[j, k] = s / n
            g[k, j] = s / n
    return g


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def xty(xt, y):
    q, n = xt.shape
    out = np.empty(q)
    for j in range(q):
        s = 0.0
        for i in range(n):
            s += xt[j, i] * y[i]
        out[j] = s / n
    return out


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def linear_predictor(x, intercept, coef, support):
    """``intercept + x[:, support] @ coef[support]`` for an (n, q) array."""
    n = x.shape[0]
    out = np.full(n, intercept)
    for j in support:
        b = coef[j]
        for i in range(n):
            out[i] += x[i, j] * b
    return out


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _gauss_sweep(g_mat, grad, beta, lam, cols):
    max_delta = 0.0
    for j in cols:
        gjj = g_mat[j, j]
        bj = beta[j]
        new = soft_threshold(grad[j] + gjj * bj, lam) / gjj
        d = new - bj
        if d != 0.0:
            for k in range(grad.shape[0]):
                grad[k] -= d * g_mat[k, j]
            beta[j] = new
            if abs(d) > max_delta:
                max_delta = abs(d)
    return max_delta


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _gauss_objective(syy, c, beta, grad, lam):
    # 0.5*syy - c'b + 0.5*b'Gb with Gb = c - grad
    s = 0.5 * syy
    for j in range(beta.shape[0]):
        s -= 0.5 * c[j] * beta[j] + 0.5 * beta[j] * grad[j]
        s += lam * abs(beta[j])
    return s


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def cd_gaussian(g_mat, c, syy, beta, lam, include, tol, max_sweeps, trace):
    """Covariance-update coordinate descent for the standardized lasso.

    ``beta`` is updated in place. Returns (sweeps, converged); the penalized
    objective after each sweep is written into ``trace``.
    """
    q = c.shape[0]
    grad = c.copy()
    for j in range(q):
        if beta[j] != 0.0:
            for k in range(q):
                grad[k] -= g_mat[k, j] * beta[j]
    all_cols = np.nonzero(include)[0]
    sweeps = 0
    while sweeps < max_sweeps:
        delta = _gauss_sweep(g_mat, grad, beta, lam, all_cols)
        if sweeps < trace.shape[0]:
            trace[sweeps] = _gauss_objective(syy, c, beta, grad, lam)
        sweeps += 1
        if delta < tol:
            return sweeps, True
        active = np.nonzero(beta)[0]
        while sweeps < max_sweeps:
            delta = _gauss_sweep(g_mat, grad, beta, lam, active)
            if sweeps < trace.shape[0]:
                trace[sweeps] = _gauss_objective(syy, c, beta, grad, lam)
            sweeps += 1
            if delta < tol:
                break
    return sweeps, False


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _logistic_loss(eta, y):
    s = 0.0
    for i in range(eta.shape[0]):
        e = eta[i]
        if e > 0:
            s += e + np.log1p(np.exp(-e)) - y[i] * e
        else:
            s += np.log1p(np.exp(e)) - y[i] * e
    return s / eta.shape[0]


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _eta(xt, a, beta):
    q, n = xt.shape
    out = np.full(n, a)
    for j in range(q):
        b = beta[j]
        if b != 0.0:
            for i in range(n):
                out[i] += xt[j, i] * b
    return out


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _weighted_sweep(xt, w, r, beta, xv, lam, cols):
    n = r.shape[0]
    max_delta = 0.0
    for j in cols:
        s = 0.0
        for i in range(n):
            s += w[i] * xt[j, i] * r[i]
        bj = beta[j]
        new = soft_threshold(s / n + xv[j] * bj, lam) / xv[j]
        d = new - bj
        if d != 0.0:
            for i in range(n):
                r[i] -= d * xt[j, i]
            beta[j] = new
            if abs(d) > max_delta:
                max_delta = abs(d)
    return max_delta


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _intercept_step(w, r):
    sw = 0.0
    swr = 0.0
    for i in range(r.shape[0]):
        sw += w[i]
        swr += w[i] * r[i]
    da = swr / sw
    for i in range(r.shape[0]):
        r[i] -= da
    return da


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def irls_logistic(xt, y, beta, a, lam, include, tol, outer_tol, max_outer, max_inner, trace):
    """Proximal Newton (IRLS) for the l1-penalized mean logistic loss.

    Each outer step solves the weighted least-squares approximation by
    coordinate descent to ``tol``, then halves the step until the penalized objective
    does not increase. ``beta`` is updated in place.
    Returns (intercept, outer_iterations, converged).
    """
    q, n = xt.shape
    all_cols = np.nonzero(include)[0]
    eta = _eta(xt, a, beta)
    obj = _logistic_loss(eta, y) + lam * np.sum(np.abs(beta))
    w = np.empty(n)
    r = np.empty(n)
    xv = np.ones(q)
    for it in range(max_outer):
        for i in range(n):
            e = min(max(eta[i], -_ETA_CAP), _ETA_CAP)
            p = 1.0 / (1.0 + np.exp(-e))
            w[i] = max(p * (1.0 - p), _W_FLOOR)
            r[i] = (y[i] - p) / w[i]
        for j in all_cols:
            s = 0.0
            for i in range(n):
                s += w[i] * xt[j, i] * xt[j, i]
            xv[j] = s / n
        new_beta = beta.copy()
        new_a = a
        sweeps = 0
        while sweeps < max_inner:
            new_a += _intercept_step(w, r)
            delta = _weighted_sweep(xt, w, r, new_beta, xv, lam, all_cols)
            sweeps += 1
            if delta < tol:
                break
            active = np.nonzero(new_beta)[0]
            while sweeps < max_inner:
                new_a += _intercept_step(w, r)
                delta = _weighted_sweep(xt, w, r, new_beta, xv, lam, active)
                sweeps += 1
                if delta < tol:
                    break
        step = 1.0
        cand_beta = new_beta
        cand_a = new_a
        cand_eta = _eta(xt, cand_a, cand_beta)
        cand_obj = _logistic_loss(cand_eta, y) + lam * np.sum(np.abs(cand_beta))
        halvings = 0
        while cand_obj > obj and halvings < 30:
            step *= 0.5
            cand_beta = beta + step * (new_beta - beta)
            cand_a = a + step * (new_a - a)
            cand_eta = _eta(xt, cand_a, cand_beta)
            cand_obj = _logistic_loss(cand_eta, y) + lam * np.sum(np.abs(cand_beta))
            halvings += 1
        if cand_obj > obj:
            # no descent direction left at machine precision
            if it < trace.shape[0]:
                trace[it] = obj
            return a, it + 1, True
        change = abs(cand_a - a)
        for j in range(q):
            d = abs(cand_beta[j] - beta[j])
            if d > change:
                change = d
        beta[:] = cand_beta
        a = cand_a
        eta = cand_eta
        obj = cand_obj
        if it < trace.shape[0]:
            trace[it] = obj
        # Newton steps shrink quadratically, so the next one is far below tol
        if change < outer_tol:
            return a, it + 1, True
    return a, max_outer, False


@njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def logistic_gradient(xt, y, a, beta):
    """``X'(y - p) / n``: minus the gradient of the mean logistic loss."""
    q, n = xt.shape
    eta = _eta(xt, a, beta)
    resid = np.empty(n)
    for i in range(n):
        e = min(max(eta[i], -_ETA_CAP), _ETA_CAP)
        resid[i] = y[i] - 1.0 / (1.0 + np.exp(-e))
    return xty(xt, resid)
