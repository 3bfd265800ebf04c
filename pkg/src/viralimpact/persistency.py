"""Effect emergence, fade-out, persistency decay, flows and trend/effect correlation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from viralimpact.causal import WINDOW_WEEKS, Classification, ImpactResult

logger = logging.getLogger(__name__)

EMERGENCE_WEEKS = (2, 3, 4, 5)
CLASSES = (Classification.GROWTH, Classification.NO_EFFECT, Classification.DECREASE)


class UnderdeterminedFitError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


@dataclass
class EffectTimeline:
    source_id: str
    post_id: str
    p_values: dict[int, float | None]
    classifications: dict[int, Classification | None]
    tau_emergence: int | None = None
    tau_fadeout: int | None = None
    censored: bool = False
    reemerged: bool = False

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "post_id": self.post_id,
            "p_values": {str(n): p for n, p in sorted(self.p_values.items())},
            "classifications": {str(n): (c.value if c else None)
                                for n, c in sorted(self.classifications.items())},
            "tau_emergence": self.tau_emergence,
            "tau_fadeout": self.tau_fadeout,
            "censored": self.censored,
            "reemerged": self.reemerged,
        }


def emergence_and_fadeout(p_values: Mapping[int, float | None], alpha: float,
                          weeks: Sequence[int] = WINDOW_WEEKS,
                          emergence_weeks: Sequence[int] = EMERGENCE_WEEKS):
    """``(tau_em, tau_fo)`` from per-window p-values; missing p counts as 1."""
    p = {n: (1.0 if p_values.get(n) is None else p_values[n]) for n in weeks}
    tau_em = next((n for n in emergence_weeks if p[n] < alpha), None)
    if tau_em is None:
        return None, None
    tau_fo = next((n for n in weeks if n > tau_em and p[n] > alpha), None)
    return tau_em, tau_fo


def effect_timeline(results: Mapping[int, ImpactResult], alpha: float = 0.05,
                    strict_sign: bool = False) -> EffectTimeline:
    """Emergence and fade-out of one event's effect across window sizes.

    Excluded windows count as non-significant.  With ``strict_sign`` an effect
    also ends at the first significant window whose direction differs from
    the one at emergence.
    """
    any_result = next(iter(results.values()))
    p_values = {n: (None if results[n].excluded else results[n].p_value)
                for n in WINDOW_WEEKS if n in results}
    classes = {n: (None if results[n].excluded else results[n].classification)
               for n in WINDOW_WEEKS if n in results}
    tau_em, tau_fo = emergence_and_fadeout(p_values, alpha)
    if tau_em is not None and strict_sign:
        origin = classes.get(tau_em)
        for n in WINDOW_WEEKS:
            if n <= tau_em or (tau_fo is not None and n >= tau_fo):
                continue
            c = classes.get(n)
            if c is not None and c is not Classification.NO_EFFECT and c is not origin:
                tau_fo = n
                break
    tl = EffectTimeline(any_result.source_id, any_result.post_id, p_values, classes,
                        tau_em, tau_fo, censored=tau_em is not None and tau_fo is None)
    if tau_fo is not None:
        later = [n for n in WINDOW_WEEKS if n > tau_fo
                 and p_values.get(n) is not None and p_values[n] < alpha]
        if later:
            tl.reemerged = True
            logger.info("effect of %s/%s re-emerges at n=%s after fading at %d",
                        tl.source_id, tl.post_id, later, tau_fo)
    return tl


@dataclass
class PersistencyMatrix:
    emergence_census: dict[int, int]
    fadeout_census: dict[int, int]
    phi: dict[tuple[int, int], float | None]

    def cells(self):
        return sorted(self.phi.items())

    def to_dict(self) -> dict:
        return {
            "emergence_census": {str(k): v for k, v in sorted(self.emergence_census.items())},
            "fadeout_census": {str(k): v for k, v in sorted(self.fadeout_census.items())},
            "phi": [{"k": k, "h": h, "value": v} for (k, h), v in self.cells()],
        }


def persistency_matrix(timelines: Iterable[EffectTimeline]) -> PersistencyMatrix:
    """Fraction of each emergence cohort still significant at window ``h``.

    Censored effects never fade; cohorts with no members give ``None`` cells.
    """
    timelines = list(timelines)
    em = {k: 0 for k in EMERGENCE_WEEKS}
    fo = {n: 0 for n in WINDOW_WEEKS if n > EMERGENCE_WEEKS[0]}
    faded = {(k, l): 0 for k in EMERGENCE_WEEKS for l in WINDOW_WEEKS if l > k}
    for tl in timelines:
        if tl.tau_emergence is None:
            continue
        em[tl.tau_emergence] += 1
        if tl.tau_fadeout is not None:
            fo[tl.tau_fadeout] += 1
            faded[(tl.tau_emergence, tl.tau_fadeout)] += 1
    phi = {}
    for k in EMERGENCE_WEEKS:
        running = 0
        for h in WINDOW_WEEKS:
            if h <= k:
                continue
            running += faded[(k, h)]
            phi[(k, h)] = (em[k] - running) / em[k] if em[k] else None
    for k in EMERGENCE_WEEKS:
        row = [phi[(k, h)] for h in WINDOW_WEEKS if h > k and phi[(k, h)] is not None]
        if any(b > a for a, b in zip(row, row[1:])):
            raise AssertionError(f"persistency increases in h for k={k}")
    return PersistencyMatrix(em, fo, phi)


@dataclass
class DecayFit:
    lambda_: float
    beta: float
    se_lambda: float
    se_beta: float
    p_lambda: float
    p_beta: float
    rss: float
    cells_used: int
    cells_excluded: int

    def evaluate(self, k: float, h) -> np.ndarray:
        return decay_curve(k, h, self.lambda_, self.beta)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_, "beta": self.beta,
            "se_lambda": self.se_lambda, "se_beta": self.se_beta,
            "p_lambda": self.p_lambda, "p_beta": self.p_beta,
            "rss": self.rss, "cells_used": self.cells_used,
            "cells_excluded": self.cells_excluded,
        }


def decay_curve(k: float, h, lambda_: float, beta: float) -> np.ndarray:
    """Persistency model ``h ** (-lambda + k / beta)``."""
    h = np.asarray(h, dtype=float)
    return h ** (-lambda_ + k / beta)


def fit_decay(matrix: PersistencyMatrix | Mapping[tuple[int, int], float | None]) -> DecayFit:
    """Zero-intercept least squares of log(phi) on (log h, k log h)."""
    phi = matrix.phi if isinstance(matrix, PersistencyMatrix) else dict(matrix)
    used = [(k, h, v) for (k, h), v in sorted(phi.items()) if v is not None and v > 0]
    excluded = len(phi) - len(used)
    if len(used) < 4:
        raise UnderdeterminedFitError(f"only {len(used)} positive cells, need 4")
    k = np.array([c[0] for c in used], dtype=float)
    logh = np.log([c[1] for c in used])
    y = np.log([c[2] for c in used])
    X = np.column_stack([logh, k * logh])
    if np.linalg.matrix_rank(X) < 2:
        raise UnderdeterminedFitError("design is rank deficient (need two emergence cohorts)")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    a, b = coef
    if abs(b) < 1e-12:
        raise UnderdeterminedFitError("k-interaction coefficient is zero; beta undefined")
    resid = y - X @ coef
    rss = float(resid @ resid)
    dof = len(used) - 2
    if dof > 0:
        cov = rss / dof * np.linalg.inv(X.T @ X)
        se_a, se_b = np.sqrt(np.diag(cov))
    else:
        se_a = se_b = float("nan")
    p_a, p_b = (_t_pvalue(a, se_a, dof), _t_pvalue(b, se_b, dof))
    return DecayFit(float(-a), float(1.0 / b), float(se_a), float(se_b / b ** 2),
                    p_a, p_b, rss, len(used), excluded)


def _t_pvalue(coef: float, se: float, dof: int) -> float:
    if not math.isfinite(se) or dof < 1:
        return float("nan")
    if se == 0:
        return 0.0
    return float(2 * stats.t.sf(abs(coef / se), dof))


@dataclass
class CorrelationResult:
    rho: float | None
    n_pairs: int
    platform: str | None = None
    n_weeks: int | None = None
    reason: str | None = None

    def to_dict(self) -> dict:
        return {"platform": self.platform, "n_weeks": self.n_weeks, "rho": self.rho,
                "n_pairs": self.n_pairs, "reason": self.reason}


def spearman(pairs: Sequence[tuple[float, float]]) -> CorrelationResult:
    """Spearman's rho with average ranks on ties."""
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if arr.shape[0] < 3:
        raise UndefinedCorrelationError(f"need at least 3 pairs, got {arr.shape[0]}")
    rx = stats.rankdata(arr[:, 0])
    ry = stats.rankdata(arr[:, 1])
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise UndefinedCorrelationError("a variable is constant")
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))
    return CorrelationResult(max(-1.0, min(1.0, rho)), arr.shape[0])


def correlation_table(results: Iterable[ImpactResult],
                      platform_of: Mapping[str, str]) -> list[CorrelationResult]:
    """Trend-vs-effect Spearman rho per (platform, window), significant events only."""
    groups: dict[tuple[str, int], list] = {}
    for r in results:
        if r.significant:
            key = (platform_of[r.source_id], r.n_weeks)
            groups.setdefault(key, []).append((r.pre_trend_slope, r.avg_absolute_effect))
    out = []
    for platform in sorted(set(platform_of.values())):
        for n in WINDOW_WEEKS:
            pairs = groups.get((platform, n), [])
            try:
                res = spearman(pairs)
            except UndefinedCorrelationError as exc:
                res = CorrelationResult(None, len(pairs), reason=str(exc))
            res.platform, res.n_weeks = platform, n
            out.append(res)
    return out


@dataclass
class EffectFlow:
    weeks: tuple[int, ...]
    transitions: dict[tuple[int, int], np.ndarray]          # 3x3 counts, rows = from
    by_origin: dict[str, dict[tuple[int, int], np.ndarray]]
    counts: dict[int, dict[str, int]]
    percentages: dict[int, dict[str, float]]

    def to_dict(self) -> dict:
        labels = [c.value for c in CLASSES]
        return {
            "classes": labels,
            "transitions": [{"from_n": a, "to_n": b, "counts": m.astype(int).tolist()}
                            for (a, b), m in sorted(self.transitions.items())],
            "by_origin": {o: [{"from_n": a, "to_n": b, "counts": m.astype(int).tolist()}
                              for (a, b), m in sorted(t.items())]
                          for o, t in sorted(self.by_origin.items())},
            "marginals": [{"n_weeks": n, "counts": self.counts[n],
                           "percentages": self.percentages[n]} for n in self.weeks],
        }


def effect_flow(paths: Iterable[Mapping[int, Classification | None]],
                weeks: Sequence[int] = WINDOW_WEEKS) -> EffectFlow:
    """Transition counts between consecutive windows and per-window shares.

    ``paths`` holds one ``{n: classification}`` map per event, ``None`` for
    excluded windows; transitions need both endpoints present.  ``by_origin``
    splits the transitions by the classification at the first window.
    """
    index = {c: i for i, c in enumerate(CLASSES)}
    pairs = list(zip(weeks, weeks[1:]))
    trans = {p: np.zeros((3, 3), dtype=np.int64) for p in pairs}
    by_origin = {c.value: {p: np.zeros((3, 3), dtype=np.int64) for p in pairs}
                 for c in CLASSES}
    counts = {n: {c.value: 0 for c in CLASSES} for n in weeks}
    for path in paths:
        for n in weeks:
            c = path.get(n)
            if c is not None:
                counts[n][Classification(c).value] += 1
        origin = path.get(weeks[0])
        for a, b in pairs:
            ca, cb = path.get(a), path.get(b)
            if ca is None or cb is None:
                continue
            i, j = index[Classification(ca)], index[Classification(cb)]
            trans[(a, b)][i, j] += 1
            if origin is not None:
                by_origin[Classification(origin).value][(a, b)][i, j] += 1
    pct = {}
    for n in weeks:
        total = sum(counts[n].values())
        pct[n] = {c: (100.0 * v / total if total else 0.0) for c, v in counts[n].items()}
    return EffectFlow(tuple(weeks), trans, by_origin, counts, pct)
