"""Dense joint-Gaussian reference for the local-linear-trend model.

Builds the covariance of (x_1..x_T, y_1..y_T) directly from the noise terms
and conditions with plain linear algebra; shares no code with the filter.
"""

from __future__ import annotations

import numpy as np


def llt_matrices(seasonal: bool, level_var, slope_var, seasonal_var=0.0, period=7):
    m = 2 + (period - 1 if seasonal else 0)
    T = np.zeros((m, m))
    T[0, 0] = T[0, 1] = T[1, 1] = 1.0
    Z = np.zeros(m)
    Z[0] = 1.0
    Q = np.diag([level_var, slope_var] + ([seasonal_var] + [0.0] * (period - 2) if seasonal else []))
    if seasonal:
        T[2, 2:] = -1.0
        for i in range(3, m):
            T[i, i - 1] = 1.0
        Z[2] = 1.0
    return T, Z, Q


def joint_moments(T, Z, Q, obs_var, a1, P1, n):
    """Mean and covariance of the stacked vector [x_1, ..., x_n, y_1, ..., y_n]."""
    m = a1.size
    n_noise = m * n + n                      # x_1 noise, n-1 state shocks, n obs shocks
    D = np.zeros((n_noise, n_noise))
    D[:m, :m] = P1
    for t in range(1, n):
        D[m * t:m * (t + 1), m * t:m * (t + 1)] = Q
    D[m * n:, m * n:] = np.eye(n) * obs_var
    G = np.zeros((n, m, n_noise))
    G[0, :, :m] = np.eye(m)
    means = [a1]
    for t in range(1, n):
        G[t] = T @ G[t - 1]
        G[t, :, m * t:m * (t + 1)] += np.eye(m)
        means.append(T @ means[-1])
    H = np.zeros((n, n_noise))
    for t in range(n):
        H[t] = Z @ G[t]
        H[t, m * n + t] = 1.0
    A = np.vstack([G.reshape(n * m, n_noise), H])
    mu = np.concatenate([np.concatenate(means), [Z @ mu_t for mu_t in means]])
    return mu, A @ D @ A.T


def condition(mu, cov, idx_x, idx_y, y):
    Syy = cov[np.ix_(idx_y, idx_y)]
    Sxy = cov[np.ix_(idx_x, idx_y)]
    K = np.linalg.solve(Syy, Sxy.T).T
    mean = mu[idx_x] + K @ (y - mu[idx_y])
    c = cov[np.ix_(idx_x, idx_x)] - K @ Sxy.T
    return mean, c


def log_density(y, mu, cov):
    d = y - mu
    _, logdet = np.linalg.slogdet(cov)
    return -0.5 * (d @ np.linalg.solve(cov, d) + logdet + y.size * np.log(2 * np.pi))


def reference(T, Z, Q, obs_var, a1, P1, y):
    """Filtered means/covs and log-likelihood; NaN entries of y are missing."""
    n, m = y.size, a1.size
    mu, cov = joint_moments(T, Z, Q, obs_var, a1, P1, n)
    obs = ~np.isnan(y)
    means, covs = np.empty((n, m)), np.empty((n, m, m))
    for t in range(n):
        seen = [n * m + s for s in range(t + 1) if obs[s]]
        idx_x = list(range(t * m, (t + 1) * m))
        if seen:
            means[t], covs[t] = condition(mu, cov, idx_x, seen, y[:t + 1][obs[:t + 1]])
        else:
            means[t], covs[t] = mu[idx_x], cov[np.ix_(idx_x, idx_x)]
    iy = [n * m + s for s in range(n) if obs[s]]
    ll = log_density(y[obs], mu[iy], cov[np.ix_(iy, iy)]) if iy else 0.0
    return means, covs, ll
