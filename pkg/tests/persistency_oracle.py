"""Literal re-implementations of the emergence/fade-out rules and persistency."""

from __future__ import annotations

WEEKS = (2, 3, 4, 5, 6)


def emergence(p, alpha):
    candidates = [n for n in (2, 3, 4, 5) if p[n] < alpha]
    return min(candidates) if candidates else None


def fadeout(p, alpha, tau_em):
    candidates = [n for n in WEEKS if n > tau_em and p[n] > alpha]
    return min(candidates) if candidates else None


def persistency(pairs):
    """pairs: list of (tau_em, tau_fo) with tau_fo None when censored."""
    phi = {}
    for k in (2, 3, 4, 5):
        cohort = [fo for em, fo in pairs if em == k]
        for h in WEEKS:
            if h <= k:
                continue
            if not cohort:
                phi[(k, h)] = None
                continue
            alive = sum(1 for fo in cohort if fo is None or fo > h)
            phi[(k, h)] = alive / len(cohort)
    return phi
