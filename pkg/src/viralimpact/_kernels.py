"""Compiled inner loops for the state-space engine.

All randomness enters through pre-drawn arrays so that the kernels are pure
functions of their inputs; the numpy ``Generator`` that fills those arrays
lives on the Python side.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
JITTER = 1e-9


@njit(cache=True)
def chol_psd(a, out):
    """Lower Cholesky factor of a PSD matrix; returns number of clamped pivots.

    Pivots at or below ``JITTER`` (relative to the matrix scale) zero out their
    column instead of failing, which keeps singular conditionals sampleable.
    """
    m = a.shape[0]
    scale = 0.0
    for i in range(m):
        if a[i, i] > scale:
            scale = a[i, i]
    tol = JITTER * max(scale, 1.0)
    clamped = 0
    for j in range(m):
        for i in range(m):
            out[i, j] = 0.0
    for j in range(m):
        d = a[j, j]
        for k in range(j):
            d -= out[j, k] * out[j, k]
        if d <= tol:
            clamped += 1 if d < -tol or a[j, j] > tol else 0
            continue
        ljj = math.sqrt(d)
        out[j, j] = ljj
        for i in range(j + 1, m):
            s = a[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            out[i, j] = s / ljj
    return clamped


@njit(cache=True)
def filter_pass(y, T, Z, Q, a1, P1, obs_var, means, covs, pred_means, pred_covs,
                fmean, fvar):
    """Forward Kalman recursions.

    Fills filtered moments (``means``/``covs``), one-step state predictions
    (``pred_means``/``pred_covs``, i.e. x_t | y_1..t-1) and the observation
    predictive moments.  NaN observations become prediction-only steps.
    Returns the Gaussian log-likelihood of the observed entries.
    """
    n = y.shape[0]
    m = a1.shape[0]
    loglik = 0.0
    a = a1.copy()
    P = P1.copy()
    for t in range(n):
        if t > 0:
            a = T @ means[t - 1]
            P = T @ covs[t - 1] @ T.T + Q
            P = 0.5 * (P + P.T)
        pred_means[t] = a
        pred_covs[t] = P
        f = 0.0
        for i in range(m):
            f += Z[i] * a[i]
        PZ = P @ Z
        F = obs_var
        for i in range(m):
            F += Z[i] * PZ[i]
        fmean[t] = f
        fvar[t] = F
        if math.isnan(y[t]):
            means[t] = a
            covs[t] = P
            continue
        v = y[t] - f
        K = PZ / F
        means[t] = a + K * v
        Pn = P - np.outer(K, PZ)
        covs[t] = 0.5 * (Pn + Pn.T)
        loglik += -0.5 * (LOG_2PI + math.log(F) + v * v / F)
    return loglik


@njit(cache=True)
def backward_sample(T, means, covs, pred_covs, z, path):
    """Draw a joint smoothing path given a completed filter pass.

    ``z`` holds standard normals of shape (n, m).  Returns the count of
    regularized (jittered) conditionals.
    """
    n, m = means.shape
    L = np.empty((m, m))
    reg = 0
    reg += chol_psd(covs[n - 1], L)
    path[n - 1] = means[n - 1] + L @ z[n - 1]
    for t in range(n - 2, -1, -1):
        Pt = covs[t]
        Ppred = pred_covs[t + 1].copy()
        scale = 0.0
        for i in range(m):
            if Ppred[i, i] > scale:
                scale = Ppred[i, i]
        # J = Pt T' Ppred^-1, computed via a solve on the symmetric Ppred
        PtTt = Pt @ T.T
        try:
            J = np.linalg.solve(Ppred, PtTt.T).T
        except Exception:
            reg += 1
            for i in range(m):
                Ppred[i, i] += JITTER * max(scale, 1.0)
            J = np.linalg.solve(Ppred, PtTt.T).T
        resid = path[t + 1] - T @ means[t]
        mu = means[t] + J @ resid
        C = Pt - J @ (T @ Pt)
        C = 0.5 * (C + C.T)
        reg += chol_psd(C, L)
        path[t] = mu + L @ z[t]
    return reg


@njit(cache=True)
def smoother_pass(T, means, covs, pred_covs, sm_means, sm_covs):
    """Rauch-Tung-Striebel smoother over a completed filter pass."""
    n, m = means.shape
    sm_means[n - 1] = means[n - 1]
    sm_covs[n - 1] = covs[n - 1]
    for t in range(n - 2, -1, -1):
        Pt = covs[t]
        J = np.linalg.solve(pred_covs[t + 1], (Pt @ T.T).T).T
        sm_means[t] = means[t] + J @ (sm_means[t + 1] - T @ means[t])
        C = Pt + J @ (sm_covs[t + 1] - pred_covs[t + 1]) @ J.T
        sm_covs[t] = 0.5 * (C + C.T)


@njit(cache=True)
def transition_residual_ss(path, T, comp):
    """Sum of squared state-equation residuals for one state component."""
    n = path.shape[0]
    s = 0.0
    for t in range(n - 1):
        pred = 0.0
        for j in range(path.shape[1]):
            pred += T[comp, j] * path[t, j]
        r = path[t + 1, comp] - pred
        s += r * r
    return s


@njit(cache=True)
def gibbs_chain(y, T, Z, a1, P1, var_index, prior_rate,
                init_vars, normals, gammas, n_burn, out_paths, out_vars):
    """Alternate FFBS state draws with conjugate inverse-gamma variance draws.

    ``var_index[k]`` names the state component driven by disturbance variance
    ``k`` (index 0 is the observation variance and is ignored).  ``gammas`` has
    one standard-gamma draw per iteration and variance, generated with the
    matching posterior shape.  Returns the total regularization count.
    """
    n = y.shape[0]
    m = a1.shape[0]
    nv = init_vars.shape[0]
    n_iter = normals.shape[0]
    means = np.empty((n, m))
    covs = np.empty((n, m, m))
    pred_means = np.empty((n, m))
    pred_covs = np.empty((n, m, m))
    fmean = np.empty(n)
    fvar = np.empty(n)
    path = np.empty((n, m))
    Q = np.zeros((m, m))
    vars_ = init_vars.copy()
    reg = 0
    for it in range(n_iter):
        for i in range(m):
            for j in range(m):
                Q[i, j] = 0.0
        for k in range(1, nv):
            Q[var_index[k], var_index[k]] = vars_[k]
        filter_pass(y, T, Z, Q, a1, P1, vars_[0], means, covs, pred_means,
                    pred_covs, fmean, fvar)
        reg += backward_sample(T, means, covs, pred_covs, normals[it], path)
        ss = 0.0
        for t in range(n):
            if not math.isnan(y[t]):
                r = y[t]
                for j in range(m):
                    r -= Z[j] * path[t, j]
                ss += r * r
        vars_[0] = (prior_rate[0] + 0.5 * ss) / gammas[it, 0]
        for k in range(1, nv):
            ssk = transition_residual_ss(path, T, var_index[k])
            vars_[k] = (prior_rate[k] + 0.5 * ssk) / gammas[it, k]
        if it >= n_burn:
            d = it - n_burn
            out_paths[d] = path
            out_vars[d] = vars_
    return reg
