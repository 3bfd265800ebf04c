"""Local-linear-trend structural time-series engine.

The model is

    y_t       = level_t + [season_t] + eps_t          eps  ~ N(0, obs_variance)
    level_t+1 = level_t + slope_t + eta_t             eta  ~ N(0, level_variance)
    slope_t+1 = slope_t + zeta_t                      zeta ~ N(0, slope_variance)

with an optional weekly dummy-seasonal block.  Inference is exact Kalman
filtering; posterior simulation alternates forward-filter backward-sample
state draws with conjugate inverse-gamma variance draws.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from viralimpact import _kernels

logger = logging.getLogger(__name__)

SEASON_PERIOD = 7
MIN_OBSERVATIONS = 8


class NumericError(ValueError):
    """Non-finite or otherwise unusable numeric input."""


class ConfigurationError(ValueError):
    """Invalid sampler or model configuration."""


@dataclass(frozen=True)
class LocalLinearTrendModel:
    obs_variance: float
    level_variance: float = 0.0
    slope_variance: float = 0.0
    initial_level_mean: float = 0.0
    initial_slope_mean: float = 0.0
    initial_covariance: np.ndarray = field(
        default_factory=lambda: np.eye(2) * 1e6)
    seasonal: bool = False
    seasonal_variance: float = 0.0

    def __post_init__(self):
        variances = [self.obs_variance, self.level_variance,
                     self.slope_variance, self.seasonal_variance]
        if not all(np.isfinite(v) for v in variances):
            raise NumericError("model variances must be finite")
        if self.obs_variance <= 0:
            raise ConfigurationError("obs_variance must be positive")
        if min(variances[1:]) < 0:
            raise ConfigurationError("state variances must be non-negative")
        cov = np.asarray(self.initial_covariance, dtype=float)
        m = self.state_dim
        if cov.shape == (2, 2) and m > 2:
            full = np.eye(m) * float(np.max(np.diag(cov)))
            full[:2, :2] = cov
            cov = full
        if cov.shape != (m, m) or not np.allclose(cov, cov.T):
            raise ConfigurationError(
                f"initial_covariance must be a symmetric {m}x{m} matrix")
        if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.abs(cov).max()):
            raise ConfigurationError("initial_covariance must be PSD")
        object.__setattr__(self, "initial_covariance", cov)

    @property
    def state_dim(self) -> int:
        return 2 + (SEASON_PERIOD - 1 if self.seasonal else 0)

    def system(self):
        """Return ``(T, Z, Q, a1, P1)`` as float arrays."""
        return _system(self.seasonal, self.level_variance, self.slope_variance,
                       self.seasonal_variance, self.initial_level_mean,
                       self.initial_slope_mean, self.initial_covariance)


def _system(seasonal, level_var, slope_var, seasonal_var, level0, slope0, P1):
    m = 2 + (SEASON_PERIOD - 1 if seasonal else 0)
    T = np.zeros((m, m))
    T[0, 0] = T[0, 1] = T[1, 1] = 1.0
    Z = np.zeros(m)
    Z[0] = 1.0
    Q = np.zeros((m, m))
    Q[0, 0] = level_var
    Q[1, 1] = slope_var
    if seasonal:
        T[2, 2:] = -1.0
        for i in range(3, m):
            T[i, i - 1] = 1.0
        Z[2] = 1.0
        Q[2, 2] = seasonal_var
    a1 = np.zeros(m)
    a1[0] = level0
    a1[1] = slope0
    return T, Z, Q, a1, np.array(P1, dtype=float)


@dataclass
class FilterResult:
    filtered_means: np.ndarray       # (n, m)  E[x_t | y_1..t]
    filtered_covs: np.ndarray        # (n, m, m)
    predicted_means: np.ndarray      # (n, m)  E[x_t | y_1..t-1]
    predicted_covs: np.ndarray
    obs_pred_mean: np.ndarray        # (n,)
    obs_pred_var: np.ndarray
    loglik: float


def _as_observations(observations) -> np.ndarray:
    y = np.asarray(observations, dtype=float).ravel()
    if y.size < 1:
        raise ConfigurationError("need at least one observation slot")
    if np.isinf(y).any():
        raise NumericError("observations must be finite (NaN marks missing)")
    return y


def kalman_filter(model: LocalLinearTrendModel, observations) -> FilterResult:
    """Exact Gaussian filtering; NaN entries are treated as missing."""
    y = _as_observations(observations)
    T, Z, Q, a1, P1 = model.system()
    n, m = y.size, a1.size
    out = FilterResult(np.empty((n, m)), np.empty((n, m, m)),
                       np.empty((n, m)), np.empty((n, m, m)),
                       np.empty(n), np.empty(n), 0.0)
    out.loglik = _kernels.filter_pass(
        y, T, Z, Q, a1, P1, float(model.obs_variance),
        out.filtered_means, out.filtered_covs, out.predicted_means,
        out.predicted_covs, out.obs_pred_mean, out.obs_pred_var)
    if not np.isfinite(out.loglik):
        raise NumericError("filter produced a non-finite log-likelihood")
    return out


def rts_smoother(model: LocalLinearTrendModel, observations):
    """Smoothed state means and covariances ``E[x_t | y_1..n]``."""
    y = _as_observations(observations)
    T = model.system()[0]
    filt = kalman_filter(model, y)
    sm_means = np.empty_like(filt.filtered_means)
    sm_covs = np.empty_like(filt.filtered_covs)
    _kernels.smoother_pass(T, filt.filtered_means, filt.filtered_covs,
                           filt.predicted_covs, sm_means, sm_covs)
    return sm_means, sm_covs


def ffbs_sample(model: LocalLinearTrendModel, observations,
                rng: np.random.Generator) -> np.ndarray:
    """One draw of the full state path from p(x_1..n | y, variances)."""
    y = _as_observations(observations)
    T = model.system()[0]
    filt = kalman_filter(model, y)
    z = rng.standard_normal(filt.filtered_means.shape)
    path = np.empty_like(filt.filtered_means)
    reg = _kernels.backward_sample(T, filt.filtered_means, filt.filtered_covs,
                                   filt.predicted_covs, z, path)
    if reg:
        logger.debug("ffbs: %d singular conditionals regularized", reg)
    return path


@dataclass(frozen=True)
class Priors:
    """Inverse-gamma priors scaled by the data variance s2.

    Observation variance: IG(shape, rate_scale * s2).  Each state disturbance
    variance: IG(state_df / 2, state_df / 2 * fraction**2 * s2), a prior guess
    of ``fraction`` data standard deviations per step worth ``state_df``
    pseudo-observations.  The slope guess is an order of magnitude below the
    level guess because slope noise is integrated twice over the horizon.
    """

    shape: float = 0.01
    rate_scale: float = 0.01
    state_df: float = 32.0
    level_sd_fraction: float = 0.01
    slope_sd_fraction: float = 0.001
    seasonal_sd_fraction: float = 0.01
    initial_scale: float = 1e6


@dataclass(frozen=True)
class SamplerSettings:
    n_draws: int = 1000
    burn_in: int = 200
    seasonal: bool = False
    priors: Priors = Priors()


@dataclass
class PosteriorDraws:
    n_draws: int
    state_paths: np.ndarray      # (n_draws, n, m)
    variance_draws: np.ndarray   # (n_draws, k): obs, level, slope[, seasonal]
    rng_seed: int
    seasonal: bool = False
    regularized: int = 0

    @property
    def levels(self) -> np.ndarray:
        return self.state_paths[:, :, 0]

    @property
    def slopes(self) -> np.ndarray:
        return self.state_paths[:, :, 1]


def data_scale(y: np.ndarray) -> float:
    """Sample variance of the observed entries, floored away from zero."""
    obs = y[~np.isnan(y)]
    var = float(np.var(obs, ddof=1)) if obs.size > 1 else 0.0
    # only binds on (near-)constant data: well above float rounding, far below real spread
    floor = 1e-10 * max(1.0, float(np.mean(obs ** 2)) if obs.size else 1.0)
    return max(var, floor)


def gibbs_fit(observations, priors: Priors | None = None, n_draws: int = 1000,
              burn_in: int = 200, rng_seed: int = 0,
              seasonal: bool = False) -> PosteriorDraws:
    """Posterior simulation for the local-linear-trend model.

    Each sweep draws a state path by FFBS, then each variance from its
    conjugate inverse-gamma conditional.
    """
    if n_draws < 1:
        raise ConfigurationError("n_draws must be positive")
    if burn_in < 0:
        raise ConfigurationError("burn_in must be non-negative")
    priors = priors or Priors()
    if min(priors.shape, priors.rate_scale, priors.state_df,
           priors.level_sd_fraction, priors.slope_sd_fraction,
           priors.seasonal_sd_fraction, priors.initial_scale) <= 0:
        raise ConfigurationError("prior parameters must be positive")
    y = _as_observations(observations)
    observed = y[~np.isnan(y)]
    if observed.size < MIN_OBSERVATIONS:
        raise ConfigurationError(
            f"need at least {MIN_OBSERVATIONS} observed points, got {observed.size}")

    s2 = data_scale(y)
    m = 2 + (SEASON_PERIOD - 1 if seasonal else 0)
    T, Z, _, a1, P1 = _system(seasonal, 0.0, 0.0, 0.0, float(observed[0]), 0.0,
                              np.eye(m) * priors.initial_scale * s2)
    var_index = np.array([0, 0, 1] + ([2] if seasonal else []), dtype=np.int64)
    nv = var_index.size
    fractions = [priors.level_sd_fraction, priors.slope_sd_fraction]
    if seasonal:
        fractions.append(priors.seasonal_sd_fraction)
    state_guess = np.square(fractions) * s2
    prior_rate = np.concatenate([[priors.rate_scale * s2],
                                 0.5 * priors.state_df * state_guess])
    prior_shape = np.array([priors.shape] + [0.5 * priors.state_df] * (nv - 1))
    init_vars = np.concatenate([[s2], state_guess])
    shapes = prior_shape + 0.5 * np.array(
        [observed.size] + [y.size - 1] * (nv - 1))

    n_iter = n_draws + burn_in
    rng = np.random.default_rng(rng_seed)
    normals = rng.standard_normal((n_iter, y.size, m))
    gammas = rng.standard_gamma(shapes, size=(n_iter, nv))

    paths = np.empty((n_draws, y.size, m))
    variances = np.empty((n_draws, nv))
    reg = _kernels.gibbs_chain(y, T, Z, a1, P1, var_index, prior_rate,
                               init_vars, normals, gammas, burn_in, paths,
                               variances)
    if reg:
        logger.debug("gibbs: %d singular conditionals regularized", reg)
    if not (np.isfinite(paths).all() and np.isfinite(variances).all()):
        raise NumericError("sampler produced non-finite draws")
    return PosteriorDraws(n_draws, paths, variances, int(rng_seed), seasonal, reg)


def conditional_variance_draws(residual_ss: float, n_terms: int, prior_rate: float,
                               prior_shape: float, size: int,
                               rng: np.random.Generator) -> np.ndarray:
    """Draws of a disturbance variance given fixed states.

    Uses the same shape/rate update as the compiled sampler so the conjugate
    step can be checked in isolation.
    """
    gam = rng.standard_gamma(prior_shape + 0.5 * n_terms, size=size)
    return (prior_rate + 0.5 * residual_ss) / gam


@dataclass
class ForecastDraws:
    horizon: int
    paths: np.ndarray            # (n_draws, horizon) counterfactual observations
    state_means: np.ndarray      # (n_draws, horizon) level (+season), no obs noise

    @property
    def mean_path(self) -> np.ndarray:
        return self.paths.mean(axis=0)


def forecast(posterior: PosteriorDraws, horizon: int,
             rng: np.random.Generator | None = None) -> ForecastDraws:
    """Propagate each draw's final state forward ``horizon`` steps."""
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    if rng is None:
        rng = np.random.default_rng([posterior.rng_seed, 1])
    nd = posterior.n_draws
    final = posterior.state_paths[:, -1, :]
    sd = np.sqrt(posterior.variance_draws)
    eta = rng.standard_normal((nd, horizon)) * sd[:, 1:2]
    zeta = rng.standard_normal((nd, horizon)) * sd[:, 2:3]
    eps = rng.standard_normal((nd, horizon)) * sd[:, 0:1]
    # slope entering step h is slope_T + zeta_1 + ... + zeta_{h-1}
    slope_in = final[:, 1:2] + np.concatenate(
        [np.zeros((nd, 1)), np.cumsum(zeta[:, :-1], axis=1)], axis=1)
    level = final[:, 0:1] + np.cumsum(slope_in + eta, axis=1)
    signal = level
    if posterior.seasonal:
        omega = rng.standard_normal((nd, horizon)) * sd[:, 3:4]
        season = np.empty((nd, horizon))
        window = final[:, 2:].copy()          # gamma_T, gamma_T-1, ...
        for h in range(horizon):
            nxt = -window.sum(axis=1) + omega[:, h]
            season[:, h] = nxt
            window = np.concatenate([nxt[:, None], window[:, :-1]], axis=1)
        signal = level + season
    return ForecastDraws(horizon, signal + eps, signal)


def pre_trend_slope(posterior: PosteriorDraws) -> float:
    """Posterior mean of the slope state averaged over the fitted period."""
    if posterior.n_draws < 1:
        raise ConfigurationError("empty posterior")
    return float(posterior.slopes.mean())


def ols_slope(observations) -> float:
    """Least-squares slope of the observed values on the day index."""
    y = np.asarray(observations, dtype=float)
    t = np.arange(y.size, dtype=float)
    keep = ~np.isnan(y)
    if keep.sum() < 2:
        raise ConfigurationError("need two observed points for a slope")
    return float(np.polyfit(t[keep], y[keep], 1)[0])
