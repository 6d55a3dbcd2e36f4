"""Partial-sum statistics ``Y_n`` and their exact variances."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonSummable
from .hermite import FunctionSpec, HermiteExpansion, abs_moment, eval_expansion, hermite_rank
from .paths import CovarianceModel, PathBatch

SIGMA_K0 = 2**10
SIGMA_K_MAX = 2**23
DEFAULT_TAIL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class StatisticSamples:
    values: np.ndarray
    n: int
    expansion: HermiteExpansion | None = None
    model: CovarianceModel | None = None
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("values must be a finite 1-d array")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def normalize(self, sigma_n: float) -> "StatisticSamples":
        if self.normalized:
            return self
        return StatisticSamples(self.values / sigma_n, self.n, self.expansion, self.model, True)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_index", "value"])
            for i, v in enumerate(self.values):
                w.writerow([i, format(float(v), ".17g")])

    @classmethod
    def from_csv(cls, path, n: int) -> "StatisticSamples":
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["value"]) for r in rows]), n)


def _as_matrix(b) -> np.ndarray:
    x = b.paths if isinstance(b, PathBatch) else np.asarray(b, dtype=float)
    return np.atleast_2d(x)


def yn_values(x: np.ndarray, e: HermiteExpansion, g: FunctionSpec | None = None) -> np.ndarray:
    """Row-wise ``n^{-1/2} sum_j g(X_j)``; uses ``g`` exactly when given, else the expansion."""
    x = np.atleast_2d(x)
    gx = g(x) if g is not None else eval_expansion(e, x)
    return gx.sum(axis=1) / math.sqrt(x.shape[1])


def compute_yn(b, e: HermiteExpansion, g: FunctionSpec | None = None) -> StatisticSamples:
    """``Y_n = n^{-1/2} sum_j g(X_j)`` for every path of the batch.

    When the concrete function ``g`` is supplied (e.g. ``|x|^p - c_p``) it is
    evaluated directly and the expansion only fixes the rank check.
    """
    hermite_rank(e)
    x = _as_matrix(b)
    model = b.model if isinstance(b, PathBatch) else None
    return StatisticSamples(yn_values(x, e, g), x.shape[1], e, model, False)


def _weighted_chaos_sums(model: CovarianceModel, c: np.ndarray, k: np.ndarray, w: np.ndarray) -> float:
    """``sum_m m! c_m^2 sum_k w_k rho(k)^m`` over the given lags."""
    r = model.rho(k)
    pw = np.ones_like(r)
    total = 0.0
    for m in range(1, c.size):
        pw = pw * r
        if c[m] != 0.0:
            total += math.factorial(m) * c[m] ** 2 * float(np.dot(w, pw))
        if not np.any(pw):
            break
    return total


def sigma_n_squared(model: CovarianceModel, e: HermiteExpansion, n: int) -> float:
    """Exact ``E Y_n^2 = sum_m m! c_m^2 sum_{|k|<n} (1 - |k|/n) rho(k)^m``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    hermite_rank(e)
    c = e.float_coeffs.copy()
    c[0] = 0.0
    k = np.arange(n)
    w = 2.0 * (1.0 - k / n)
    w[0] = 1.0
    return float(_weighted_chaos_sums(model, c, k, w))


def sigma_squared(
    model: CovarianceModel, e: HermiteExpansion, tail_tol: float = DEFAULT_TAIL_TOL
) -> tuple[float, int]:
    """Limit variance ``sum_m m! c_m^2 sum_{k in Z} rho(k)^m`` and the lag cutoff used.

    Lags are added in doubling blocks ``(K/2, K]`` from ``K = 2^10``. The
    series stops once a block contributes less than ``tail_tol``; when the
    blocks shrink geometrically, the geometric remainder is added and the
    extrapolated values are required to agree within ``tail_tol``. Slowly
    decaying power-law covariances need that extrapolation to converge before
    ``K`` reaches ``2^23``; otherwise NonSummable is raised.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    hermite_rank(e)
    c = e.float_coeffs.copy()
    c[0] = 0.0
    k = np.arange(SIGMA_K0 + 1)
    w = np.full(k.size, 2.0)
    w[0] = 1.0
    value = _weighted_chaos_sums(model, c, k, w)
    K = SIGMA_K0
    prev_inc = prev_acc = None
    while K < SIGMA_K_MAX:
        k = np.arange(K + 1, 2 * K + 1)
        inc = _weighted_chaos_sums(model, c, k, np.full(k.size, 2.0))
        value += inc
        K *= 2
        if abs(inc) < tail_tol and (prev_inc is None or abs(inc) <= abs(prev_inc)):
            if inc == 0.0 or prev_inc is None:
                return float(value), K
            r = inc / prev_inc
            return float(value + inc * r / (1.0 - r) if 0.0 < r < 1.0 else value), K
        if prev_inc is not None and prev_inc != 0.0:
            r = inc / prev_inc
            if 0.0 < r < 1.0:
                acc = value + inc * r / (1.0 - r)
                if prev_acc is not None and abs(acc - prev_acc) < tail_tol:
                    return float(acc), K
                prev_acc = acc
            else:
                prev_acc = None
        prev_inc = inc
    raise NonSummable(f"covariance series not converged by K = {K} (last block {prev_inc:.3g})")


def s_n_values(x: np.ndarray, p: float) -> np.ndarray:
    x = np.atleast_2d(x)
    n = x.shape[1]
    return math.sqrt(n) * (np.mean(np.abs(x) ** p, axis=1) - abs_moment(p))


def s_n_statistic(b: PathBatch, p: float, n: int | None = None) -> StatisticSamples:
    """``sqrt(n) ((1/n) sum |X_j|^p - c_p)`` on unit-scale fGn.

    By self-similarity this has the law of ``sqrt(n)(n^{pH-1} V_n^p(B) - c_p)``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    x = _as_matrix(b)
    if n is not None and n != x.shape[1]:
        raise ValueError("n does not match the path length")
    return StatisticSamples(s_n_values(x, p), x.shape[1], None, getattr(b, "model", None), False)


def variance_with_se(values) -> tuple[float, float]:
    """Sample variance and its standard error ``sqrt((m4 - s^4) / m)``."""
    v = np.asarray(values, dtype=float)
    m = v.size
    if m < 2:
        raise ValueError("need at least two samples")
    d = v - v.mean()
    s2 = float(np.mean(d**2)) * m / (m - 1)
    m4 = float(np.mean(d**4))
    return s2, math.sqrt(max(m4 - s2**2, 0.0) / m)
