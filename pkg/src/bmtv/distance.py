"""Empirical distances to the standard normal law and log-log rate fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import EmptyRange, NonPositiveValue

DEFAULT_BINS = 101
DEFAULT_RANGE = (-6.0, 6.0)


@dataclass(frozen=True)
class DistanceEstimate:
    ks: float
    tv_hist: float
    num_samples: int
    bins: int


def ks_distance(samples) -> float:
    """``sup_x |F_m(x) - Phi(x)|``, evaluated on both sides of every jump."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("need at least one sample")
    cdf = special.ndtr(x)
    i = np.arange(1, m + 1)
    upper = np.max(i / m - cdf)
    lower = np.max(cdf - (i - 1) / m)
    return float(max(upper, lower))


def tv_histogram(samples, bins: int = DEFAULT_BINS, range: tuple[float, float] = DEFAULT_RANGE) -> float:
    """Binned total variation to ``N(0,1)``, including both tail masses.

    Biased upward by roughly ``O(width + 1/sqrt(m width))``.
    """
    lo, hi = range
    if bins < 2 or not lo < hi:
        raise EmptyRange(f"need bins >= 2 and lo < hi, got bins={bins}, range=({lo}, {hi})")
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    if m == 0:
        raise ValueError("need at least one sample")
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    p_hat = counts / m
    q = np.diff(special.ndtr(edges))
    left_hat = np.count_nonzero(x < lo) / m
    right_hat = np.count_nonzero(x > hi) / m
    tails = abs(left_hat - special.ndtr(lo)) + abs(right_hat - special.ndtr(-hi))
    return float(0.5 * np.sum(np.abs(p_hat - q)) + 0.5 * tails)


def distance_estimate(samples, bins: int = DEFAULT_BINS, range: tuple[float, float] = DEFAULT_RANGE) -> DistanceEstimate:
    x = np.asarray(samples, dtype=float).ravel()
    return DistanceEstimate(ks_distance(x), tv_histogram(x, bins, range), x.size, bins)


def loglog_rate_fit(points) -> tuple[float, float, float]:
    """Least-squares line through ``(log n, log value)``: (slope, intercept, r^2)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (n, value) points")
    n, v = pts[:, 0], pts[:, 1]
    if np.any(v <= 0) or np.any(n <= 0):
        raise NonPositiveValue("log-log fit requires positive n and values")
    lx, ly = np.log(n), np.log(v)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)
