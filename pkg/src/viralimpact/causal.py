"""Interrupted time-series impact of a viral event on daily engagement.

For a window of ``n`` weeks the ``7n`` days before the event train the
structural model, the ``7n`` days after it are compared with the model's
counterfactual forecast, and the event day itself is dropped.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from viralimpact import ssm
from viralimpact.metrics import EngagementSeries

WINDOW_WEEKS = (2, 3, 4, 5, 6)


class OverlapPolicy(str, enum.Enum):
    EXCLUDE_EVENT = "exclude-event"
    DUMMY_IGNORE_DAYS = "dummy-ignore-days"


class Classification(str, enum.Enum):
    GROWTH = "Growth"
    NO_EFFECT = "NoEffect"
    DECREASE = "Decrease"


class WindowExcluded(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class ImpactConfig:
    alpha: float = 0.05
    overlap_policy: OverlapPolicy = OverlapPolicy.EXCLUDE_EVENT
    sampler: ssm.SamplerSettings = ssm.SamplerSettings()

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "overlap_policy", OverlapPolicy(self.overlap_policy))


@dataclass
class ImpactResult:
    source_id: str
    post_id: str
    n_weeks: int
    avg_absolute_effect: float | None = None
    cumulative_effect: float | None = None
    p_value: float | None = None
    pre_trend_slope: float | None = None
    ols_pre_trend_slope: float | None = None
    classification: Classification | None = None
    n_draws: int = 0
    excluded: bool = False
    reason: str | None = None
    counterfactual_mean: np.ndarray | None = field(default=None, repr=False)

    @property
    def significant(self) -> bool:
        return not self.excluded and self.classification is not Classification.NO_EFFECT

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "post_id": self.post_id,
            "n_weeks": self.n_weeks,
            "avg_absolute_effect": self.avg_absolute_effect,
            "cumulative_effect": self.cumulative_effect,
            "p_value": self.p_value,
            "pre_trend_slope": self.pre_trend_slope,
            "ols_pre_trend_slope": self.ols_pre_trend_slope,
            "classification": self.classification.value if self.classification else None,
            "n_draws": self.n_draws,
            "excluded": self.excluded,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImpactResult":
        d = dict(d)
        if d.get("classification"):
            d["classification"] = Classification(d["classification"])
        return cls(**d)


def classify(p_value: float, avg_effect: float, alpha: float) -> Classification:
    if not p_value < alpha:
        return Classification.NO_EFFECT
    if avg_effect > 0:
        return Classification.GROWTH
    if avg_effect < 0:
        return Classification.DECREASE
    return Classification.NO_EFFECT


def tail_area_p_value(draw_means: np.ndarray, observed_mean: float) -> float:
    """Two-sided posterior tail area with +1 smoothing.

    The smaller one-sided tail, ``(1 + #draws beyond)/(1 + n)``, is doubled so
    that the value is uniform on [0, 1] under a calibrated null.
    """
    n = draw_means.size
    upper = 1 + int(np.count_nonzero(draw_means >= observed_mean))
    lower = 1 + int(np.count_nonzero(draw_means <= observed_mean))
    return min(1.0, 2.0 * min(upper, lower) / (1 + n))


def build_window(series: EngagementSeries, event_day: int, n_weeks: int,
                 policy: OverlapPolicy = OverlapPolicy.EXCLUDE_EVENT):
    """Return ``(pre, post)`` arrays around ``event_day`` (event day dropped).

    Raises ``WindowExcluded`` with reason ``truncated-window`` or ``overlap``.
    Under the dummy-ignore-days policy other viral days become NaN instead.
    """
    if n_weeks < 1:
        raise ValueError("n_weeks must be positive")
    span = 7 * n_weeks
    lo, hi = event_day - span, event_day + span
    if lo < 0 or hi >= series.grid.length:
        raise WindowExcluded("truncated-window")
    pre = np.array(series.values[lo:event_day], dtype=float)
    post = np.array(series.values[event_day + 1:hi + 1], dtype=float)
    others = sorted(d for d in series.viral_days if d != event_day and lo <= d <= hi)
    if others:
        if OverlapPolicy(policy) is OverlapPolicy.EXCLUDE_EVENT:
            raise WindowExcluded("overlap")
        for d in others:
            if d < event_day:
                pre[d - lo] = np.nan
            else:
                post[d - event_day - 1] = np.nan
    return pre, post


def estimate_impact(pre, post, config: ImpactConfig = ImpactConfig(), seed: int = 0,
                    *, source_id: str = "", post_id: str = "",
                    n_weeks: int = 0) -> ImpactResult:
    """Fit on ``pre``, forecast ``len(post)`` days, and summarize the gap."""
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    result = ImpactResult(source_id, post_id, n_weeks)
    observed_days = ~np.isnan(post)
    if not observed_days.any():
        result.excluded, result.reason = True, "empty-post-period"
        return result
    s = config.sampler
    try:
        posterior = ssm.gibbs_fit(pre, s.priors, s.n_draws, s.burn_in, seed, s.seasonal)
    except (ssm.ConfigurationError, ssm.NumericError):
        result.excluded, result.reason = True, "degenerate-pre-period"
        return result
    fc = ssm.forecast(posterior, post.size)
    cf_mean = fc.mean_path
    gap = post[observed_days] - cf_mean[observed_days]
    observed_mean = float(post[observed_days].mean())
    draw_means = fc.paths[:, observed_days].mean(axis=1)

    result.avg_absolute_effect = float(gap.mean())
    result.cumulative_effect = float(gap.sum())
    result.p_value = tail_area_p_value(draw_means, observed_mean)
    result.pre_trend_slope = ssm.pre_trend_slope(posterior)
    result.ols_pre_trend_slope = ssm.ols_slope(pre)
    result.classification = classify(result.p_value, result.avg_absolute_effect,
                                     config.alpha)
    result.n_draws = posterior.n_draws
    result.counterfactual_mean = cf_mean
    return result


def derive_seed(global_seed: int, source_id: str, post_id: str, n_weeks: int) -> int:
    """Stable 63-bit seed for one (event, window) fit."""
    key = f"{global_seed}\x1f{source_id}\x1f{post_id}\x1f{n_weeks}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def run_all_windows(series: EngagementSeries, event_day: int, post_id: str,
                    config: ImpactConfig = ImpactConfig(), global_seed: int = 0,
                    weeks=WINDOW_WEEKS) -> dict[int, ImpactResult]:
    """One ImpactResult per window size; exclusions are recorded, not raised."""
    out = {}
    for n in weeks:
        try:
            pre, post = build_window(series, event_day, n, config.overlap_policy)
        except WindowExcluded as exc:
            out[n] = ImpactResult(series.source_id, post_id, n, excluded=True,
                                  reason=exc.reason)
            continue
        if np.count_nonzero(~np.isnan(pre)) < ssm.MIN_OBSERVATIONS:
            out[n] = ImpactResult(series.source_id, post_id, n, excluded=True,
                                  reason="degenerate-pre-period")
            continue
        seed = derive_seed(global_seed, series.source_id, post_id, n)
        out[n] = estimate_impact(pre, post, config, seed, source_id=series.source_id,
                                 post_id=post_id, n_weeks=n)
    return out
