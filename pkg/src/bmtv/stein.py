"""Stein-Malliavin functionals of ``Y_n`` and the total-variation bounds built from them.

With ``a = g_1(X)``, ``b = g'(X)`` and the Toeplitz covariance matrix ``R``:

    D_u Y_n   = n^{-1} a^T R b
    D^2_u Y_n = n^{-3/2} [ sum_l g_1'(X_l) (R b)_l (R a)_l + sum_l g''(X_l) (R a)_l^2 ]

Toeplitz products go through a length-2n circulant FFT, so a path costs
``O(n log n)``. The plain triple sum is kept as a reference for small n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import CapExceeded, DegenerateSample, LengthMismatch
from .hermite import HermiteExpansion, differentiate, eval_expansion, shift
from .paths import CovarianceModel

N_QUAD_CAP = 16384
N_CUBIC_CAP = 64
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float


@dataclass(frozen=True)
class FourthCumulant:
    value: float
    se: float
    bound: float | None
    single_chaos: bool


@dataclass(frozen=True)
class BoundReport:
    """Monte Carlo bound functionals for the normalized statistic at one n.

    ``tv_upper_*`` values are raw; ``clamped`` maps them into [0, 1] for display.
    ``tv_upper_prop31_alt`` uses the constant ``1/sigma_n^2`` instead of ``2/sigma_n^2``.
    ``tv_upper_prop32_partial`` drops the fourth-order term (flagged by ``a4_omitted``).
    """

    n: int
    num_paths: int
    var_du: Estimate
    a2: Estimate
    a3: Estimate
    kappa4: Estimate
    tv_upper_prop31: Estimate
    tv_upper_prop33: Estimate
    tv_upper_prop31_alt: float | None = None
    tv_upper_prop32_partial: float | None = None
    tv_upper_chaos: float | None = None
    a4_omitted: bool = True

    @staticmethod
    def clamped(v: float) -> float:
        return min(max(v, 0.0), 1.0)

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=64)
def _toeplitz_spectrum(model: CovarianceModel, n: int) -> np.ndarray:
    r = model.rho(np.arange(n))
    row = np.concatenate([r, [0.0], r[:0:-1]])
    return np.fft.rfft(row)


def toeplitz_matvec(model: CovarianceModel, v: np.ndarray) -> np.ndarray:
    """Row-wise ``(R v)_l = sum_j rho(l - j) v_j``."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    spec = _toeplitz_spectrum(model, n)
    return np.fft.irfft(np.fft.rfft(v, n=2 * n, axis=-1) * spec, n=2 * n, axis=-1)[..., :n]


@dataclass(frozen=True, eq=False)
class _Pieces:
    g1: HermiteExpansion
    dg: HermiteExpansion
    dg1: HermiteExpansion | None
    ddg: HermiteExpansion | None


@lru_cache(maxsize=32)
def _pieces_cached(key: bytes, size: int) -> _Pieces:
    c = np.frombuffer(key, dtype=float, count=size)
    e = HermiteExpansion(c)
    g1 = shift(e, 1)
    dg = differentiate(e, 1)
    dg1 = differentiate(g1, 1) if g1.truncation >= 1 else None
    ddg = differentiate(e, 2) if e.truncation >= 2 else None
    return _Pieces(g1, dg, dg1, ddg)


def _pieces(e: HermiteExpansion) -> _Pieces:
    c = np.ascontiguousarray(e.float_coeffs)
    if c.size < 2:
        raise ValueError("expansion must have truncation >= 1")
    return _pieces_cached(c.tobytes(), c.size)


def d_u_yn(path, e: HermiteExpansion, model: CovarianceModel):
    """``D_{u_n} Y_n`` for one path (1-d input) or row-wise for a matrix."""
    x = np.asarray(path, dtype=float)
    p = _pieces(e)
    a = eval_expansion(p.g1, x)
    b = eval_expansion(p.dg, x)
    out = np.sum(a * toeplitz_matvec(model, b), axis=-1) / x.shape[-1]
    return float(out) if out.ndim == 0 else out


def d_u2_yn(path, e: HermiteExpansion, model: CovarianceModel, n_cap: int = N_QUAD_CAP):
    """``D^2_{u_n} Y_n`` via the factorized sums; 1-d path or row-wise matrix."""
    x = np.asarray(path, dtype=float)
    n = x.shape[-1]
    if n > n_cap:
        raise CapExceeded(f"n = {n} exceeds n_quad_cap = {n_cap}")
    p = _pieces(e)
    if p.dg1 is None or p.ddg is None:
        out = np.zeros(x.shape[:-1])
        return float(out) if out.ndim == 0 else out
    a = eval_expansion(p.g1, x)
    b = eval_expansion(p.dg, x)
    ra = toeplitz_matvec(model, a)
    rb = toeplitz_matvec(model, b)
    t1 = np.sum(eval_expansion(p.dg1, x) * rb * ra, axis=-1)
    t2 = np.sum(eval_expansion(p.ddg, x) * ra * ra, axis=-1)
    out = (t1 + t2) / n**1.5
    return float(out) if out.ndim == 0 else out


def d_u2_yn_reference(path, e: HermiteExpansion, model: CovarianceModel, n_cap: int = N_CUBIC_CAP) -> float:
    """Plain triple sum over ``(l1, l2, l3)``; for cross-checking only."""
    x = np.asarray(path, dtype=float)
    n = x.size
    if n > n_cap:
        raise CapExceeded(f"n = {n} exceeds n_cubic_cap = {n_cap}")
    p = _pieces(e)
    if p.dg1 is None or p.ddg is None:
        return 0.0
    g1 = eval_expansion(p.g1, x)
    dg = eval_expansion(p.dg, x)
    dg1 = eval_expansion(p.dg1, x)
    ddg = eval_expansion(p.ddg, x)
    idx = np.arange(n)
    rho = model.rho(np.abs(idx[:, None] - idx[None, :]))
    total = 0.0
    for l1 in range(n):
        for l2 in range(n):
            r12 = rho[l1, l2]
            if r12 == 0.0:
                continue
            f1 = dg1[l1] * dg[l2] * g1 * rho[l1]
            f2 = g1[l1] * ddg[l2] * g1 * rho[l2]
            total += r12 * (f1.sum() + f2.sum())
    return total / n**1.5


def _jackknife_se(stat, *cols) -> float:
    """Leave-one-out jackknife SE of ``stat(mean(col_1), ..., mean(col_k))``."""
    m = cols[0].size
    loo = [(c.sum() - c) / (m - 1) for c in cols]
    th = stat(*loo)
    return float(math.sqrt((m - 1) / m * np.sum((th - th.mean()) ** 2)))


def _check_samples(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size < 2:
        raise DegenerateSample("need at least two samples")
    return v


def _is_degenerate(du: np.ndarray, s2: float) -> bool:
    return bool(np.all(np.abs(du - s2) <= DEGENERATE_RTOL * max(abs(s2), 1.0)))


def tv_upper_prop31(du_samples, sigma_n: float, constant: float = 2.0) -> Estimate:
    """``(c / sigma_n^2) sqrt(mean((D_u Y_n - sigma_n^2)^2))`` with a jackknife SE.

    Returns exactly 0 when every sample equals ``sigma_n^2`` (the first-chaos case).
    """
    du = _check_samples(du_samples)
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    s2 = sigma_n**2
    if _is_degenerate(du, s2):
        return Estimate(0.0, 0.0)
    q = (du - s2) ** 2
    k = constant / s2
    se = _jackknife_se(lambda mq: k * np.sqrt(mq), q)
    return Estimate(float(k * math.sqrt(q.mean())), se)


def tv_upper_prop33(du_samples, du2_samples, sigma_n: float) -> Estimate:
    """``(8/sigma^4) mean((sigma^2 - D_u Y)^2) + (sqrt(8 pi)/sigma^3) sqrt(mean((D^2_u Y)^2))``."""
    du = _check_samples(du_samples)
    d2 = np.asarray(du2_samples, dtype=float).ravel()
    if du.size != d2.size:
        raise LengthMismatch(f"{du.size} first-order samples vs {d2.size} second-order samples")
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    s2 = sigma_n**2
    if _is_degenerate(du, s2) and not np.any(d2):
        return Estimate(0.0, 0.0)
    q = (s2 - du) ** 2
    r = d2**2
    c1, c2 = 8.0 / s2**2, math.sqrt(8.0 * math.pi) / sigma_n**3

    def stat(mq, mr):
        return c1 * mq + c2 * np.sqrt(mr)

    return Estimate(float(stat(q.mean(), r.mean())), _jackknife_se(stat, q, r))


def tv_upper_prop32_partial(var_du: float, a2: float, a3: float, sigma_n: float) -> float:
    """Fourth-order-free truncation of the three-derivative bound (``A_4`` omitted).

    ``var_du`` stands in for ``E||D(D_u Y_n)||^2`` and ``a3`` is ``|E (Y_n/sigma_n)^3|``.
    """
    s4 = sigma_n**4
    return (
        (8.0 + math.sqrt(32.0 * math.pi)) / s4 * var_du
        + math.sqrt(32.0 * math.pi) / sigma_n**6 * a2
        + math.sqrt(2.0 * math.pi) * a3
    )


def second_moment(samples) -> Estimate:
    v = _check_samples(samples) ** 2
    return Estimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)))


def variance_estimate(samples, center: float | None = None) -> Estimate:
    """``mean((x - center)^2)``; the sample variance when ``center`` is None."""
    v = _check_samples(samples)
    if center is None:
        m = v.size
        d = v - v.mean()
        s2 = float(np.sum(d**2) / (m - 1))
        m4 = float(np.mean(d**4))
        return Estimate(s2, math.sqrt(max(m4 - s2**2, 0.0) / m))
    return second_moment(v - center)


def third_moment(y_samples, sigma_n: float) -> Estimate:
    """``|mean((Y/sigma_n)^3)|`` with the plain Monte Carlo SE."""
    z = _check_samples(y_samples) / sigma_n
    z3 = z**3
    return Estimate(float(abs(z3.mean())), float(z3.std(ddof=1) / math.sqrt(z.size)))


def fourth_cumulant(y_samples, sigma_n: float, e: HermiteExpansion | None = None) -> FourthCumulant:
    """``mean((Y/sigma_n)^4) - 3`` and, for a single chaos ``H_q``, ``2 sqrt((q-1)/(3q) max(k4, 0))``.

    A RuntimeWarning is issued when an expansion is given that is not a single chaos.
    """
    z = _check_samples(y_samples) / sigma_n
    z4 = z**4
    k4 = float(z4.mean() - 3.0)
    se = float(z4.std(ddof=1) / math.sqrt(z.size))
    q = e.is_single_chaos() if e is not None else None
    if e is not None and q is None:
        warnings.warn("fourth-moment bound needs a single chaos; bound omitted", RuntimeWarning, stacklevel=2)
    bound = None
    if q is not None and q >= 2:
        bound = 2.0 * math.sqrt((q - 1) / (3.0 * q) * max(k4, 0.0))
    return FourthCumulant(k4, se, bound, q is not None)


def bound_report(
    n: int,
    y: np.ndarray,
    du: np.ndarray,
    du2: np.ndarray,
    sigma_n: float,
    e: HermiteExpansion | None = None,
) -> BoundReport:
    """Assemble every bound functional from paired per-path samples."""
    s2 = sigma_n**2
    var_du = variance_estimate(du, center=s2)
    a2 = second_moment(du2)
    a3 = third_moment(y, sigma_n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        k4 = fourth_cumulant(y, sigma_n, e)
    p31 = tv_upper_prop31(du, sigma_n)
    return BoundReport(
        n=n,
        num_paths=int(np.size(y)),
        var_du=var_du,
        a2=a2,
        a3=a3,
        kappa4=Estimate(k4.value, k4.se),
        tv_upper_prop31=p31,
        tv_upper_prop33=tv_upper_prop33(du, du2, sigma_n),
        tv_upper_prop31_alt=p31.value / 2.0,
        tv_upper_prop32_partial=tv_upper_prop32_partial(var_du.value, a2.value, a3.value, sigma_n),
        tv_upper_chaos=k4.bound,
    )
