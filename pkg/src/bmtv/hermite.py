"""Hermite expansions in the probabilists' basis.

Everything here works on coefficient sequences ``c_0..c_M`` of a function
``g(x) = sum_m c_m He_m(x)`` where ``He_m`` are the probabilists' Hermite
polynomials, orthogonal under the standard Gaussian measure with
``E[He_m(Z) He_k(Z)] = m! delta_{mk}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite as _phys
from numpy.polynomial import hermite_e as _prob
from scipy import special

from .errors import AllBelowTolerance, NonIntegrable, NotCentered, ShiftExceedsTruncation

DEFAULT_TRUNCATION = 40
RANK_RTOL = 1e-8

_KINDS = ("hermite_single", "abs_power", "polynomial", "explicit_hermite")


def hermite_eval(m: int, x):
    """Probabilists' Hermite polynomial ``He_m`` at ``x`` (scalar or array).

    Uses the three-term recurrence ``He_{k+1} = x He_k - k He_{k-1}``.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if m == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, m):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def abs_moment(p: float) -> float:
    """``E|Z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)`` for a standard normal Z."""
    if p < 0:
        raise ValueError("p must be >= 0")
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0))) / math.sqrt(math.pi)


@dataclass(frozen=True)
class FunctionSpec:
    """A concrete square-integrable function ``g`` that can be expanded.

    Build instances through the classmethods rather than the raw constructor.
    ``coeffs`` holds monomial coefficients for ``polynomial`` and Hermite
    coefficients for ``explicit_hermite``.
    """

    kind: str
    m: int | None = None
    p: float | None = None
    centered: bool = True
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind == "hermite_single" and (self.m is None or self.m < 0):
            raise ValueError("hermite_single requires m >= 0")
        if self.kind == "abs_power" and (self.p is None or self.p < 1):
            raise ValueError("abs_power requires p >= 1")
        if self.kind in ("polynomial", "explicit_hermite") and len(self.coeffs) == 0:
            raise ValueError(f"{self.kind} requires a non-empty coefficient list")

    @classmethod
    def hermite_single(cls, m: int) -> "FunctionSpec":
        return cls("hermite_single", m=int(m))

    @classmethod
    def abs_power(cls, p: float, centered: bool = True) -> "FunctionSpec":
        return cls("abs_power", p=float(p), centered=bool(centered))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "FunctionSpec":
        return cls("polynomial", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def explicit_hermite(cls, coeffs: Sequence[float]) -> "FunctionSpec":
        return cls("explicit_hermite", coeffs=tuple(float(c) for c in coeffs))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "hermite_single":
            return hermite_eval(self.m, x)
        if self.kind == "abs_power":
            out = np.abs(x) ** self.p
            return out - abs_moment(self.p) if self.centered else out
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x, self.coeffs)
        return _clenshaw(self.coeffs, x)

    @property
    def is_polynomial(self) -> bool:
        if self.kind == "abs_power":
            return float(self.p).is_integer() and int(self.p) % 2 == 0
        return True

    @property
    def derivative_order(self) -> float:
        """Number of weak derivatives with Gaussian moments of every order."""
        if self.is_polynomial:
            return math.inf
        return float(math.floor(self.p))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "hermite_single":
            d["m"] = self.m
        elif self.kind == "abs_power":
            d.update(p=self.p, centered=self.centered)
        else:
            d["coeffs"] = list(self.coeffs)
        return d


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Truncated Hermite coefficient sequence ``c_0..c_M``.

    ``truncation_error`` is the squared L2(gamma) norm of the discarded tail
    when it is known (zero for exact polynomial expansions).
    """

    coeffs: np.ndarray
    rank_hint: int | None = None
    truncation_error: float | None = field(default=None, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype != object:
            c = np.array(c, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d sequence")
        if c.dtype != object and not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def truncation(self) -> int:
        return self.coeffs.size - 1

    @property
    def norm_sq(self) -> float:
        """``sum_m m! c_m^2``, the squared L2(gamma) norm of the truncated series."""
        m = np.arange(self.coeffs.size)
        return float(np.sum(special.factorial(m) * self.float_coeffs**2))

    @property
    def float_coeffs(self) -> np.ndarray:
        return self.coeffs.astype(float)

    def rank(self, tol: float | None = None) -> int:
        return hermite_rank(self, tol)

    def is_single_chaos(self, tol: float | None = None) -> int | None:
        """Order q if exactly one coefficient is non-negligible, else None."""
        c = np.abs(self.float_coeffs)
        if not np.any(c):
            return None
        thr = RANK_RTOL * c.max() if tol is None else tol
        idx = np.flatnonzero(c > thr)
        return int(idx[0]) if idx.size == 1 else None

    def __call__(self, x):
        return eval_expansion(self, x)

    def __eq__(self, other):
        if not isinstance(other, HermiteExpansion):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    __hash__ = None

    def _padded(self, other: "HermiteExpansion"):
        size = max(self.coeffs.size, other.coeffs.size)
        dtype = object if object in (self.coeffs.dtype, other.coeffs.dtype) else float
        a = np.zeros(size, dtype=dtype)
        b = np.zeros(size, dtype=dtype)
        a[: self.coeffs.size] = self.coeffs
        b[: other.coeffs.size] = other.coeffs
        return a, b

    def __add__(self, other):
        a, b = self._padded(other)
        return HermiteExpansion(a + b)

    def __sub__(self, other):
        a, b = self._padded(other)
        return HermiteExpansion(a - b)

    def __mul__(self, scalar):
        return HermiteExpansion(self.coeffs * scalar)

    __rmul__ = __mul__

    def to_json(self) -> str:
        return json.dumps(
            {"basis": "probabilists", "coeffs": [float(c) for c in self.coeffs], "truncation": self.truncation}
        )

    @classmethod
    def from_json(cls, text: str) -> "HermiteExpansion":
        rec = json.loads(text)
        if rec.get("basis") != "probabilists":
            raise ValueError("only the probabilists' basis is supported")
        coeffs = rec["coeffs"]
        if len(coeffs) != rec["truncation"] + 1:
            raise ValueError("coefficient count does not match truncation")
        return cls(np.asarray(coeffs, dtype=float))


def _gauss_hermite_coeffs(g, M: int, nodes: int) -> np.ndarray:
    # physicists' rule for exp(-t^2); x = sqrt(2) t turns it into the Gaussian measure
    t, w = _phys.hermgauss(nodes)
    x = np.sqrt(2.0) * t
    w = w / np.sqrt(np.pi)
    gx = np.asarray(g(x), dtype=float)
    out = np.empty(M + 1)
    prev, cur = np.ones_like(x), x
    for m in range(M + 1):
        if m == 0:
            h = prev
        elif m == 1:
            h = cur
        else:
            prev, cur = cur, x * cur - (m - 1) * prev
            h = cur
        out[m] = np.sum(w * gx * h) / math.factorial(m)
    if not np.all(np.isfinite(out)):
        raise NonIntegrable("Gauss-Hermite node sums are not finite")
    return out


def _abs_power_coeffs(p: float, M: int, nodes: int) -> np.ndarray:
    # Even integrand: int |x|^p He_m(x) phi(x) dx = 2^{(p+1)/2}/sqrt(2 pi) int t^{(p-1)/2} He_m(sqrt(2t)) e^{-t} dt,
    # and He_m(sqrt(2t)) is a polynomial in t for even m, so generalized Gauss-Laguerre is exact.
    n_half = max(nodes // 2 + 1, M // 2 + 1)
    t, w = special.roots_genlaguerre(n_half, 0.5 * (p - 1.0))
    x = np.sqrt(2.0 * t)
    scale = 2.0 ** (0.5 * (p + 1.0)) / math.sqrt(2.0 * math.pi)
    out = np.zeros(M + 1)
    for m in range(0, M + 1, 2):
        out[m] = scale * np.sum(w * hermite_eval(m, x)) / math.factorial(m)
    if not np.all(np.isfinite(out)):
        raise NonIntegrable("Gauss-Laguerre node sums are not finite")
    return out


def expand(
    g: FunctionSpec,
    M: int = DEFAULT_TRUNCATION,
    quad_nodes: int | None = None,
    method: str = "auto",
) -> HermiteExpansion:
    """Hermite coefficients ``c_m = E[g(Z) He_m(Z)] / m!`` for ``m <= M``.

    Polynomial kinds are converted exactly. ``abs_power`` uses a half-line
    Gauss rule (odd coefficients are exactly zero by symmetry, and ``c_0``
    of a centered power is exactly zero). ``method="gauss_hermite"`` forces
    plain Gauss-Hermite quadrature for any kind.
    """
    if M < 0:
        raise ValueError("M must be >= 0")
    if quad_nodes is None:
        quad_nodes = max(2 * M + 2, 100)
    if quad_nodes < M + 1:
        raise ValueError("quad_nodes must be >= M + 1")
    if method not in ("auto", "gauss_hermite"):
        raise ValueError(f"unknown method {method!r}")

    if method == "gauss_hermite":
        return HermiteExpansion(_gauss_hermite_coeffs(g, M, quad_nodes))

    tail = 0.0
    if g.kind == "hermite_single":
        c = np.zeros(M + 1)
        if g.m <= M:
            c[g.m] = 1.0
        else:
            tail = float(math.factorial(g.m))
    elif g.kind in ("polynomial", "explicit_hermite"):
        full = np.asarray(_prob.poly2herme(g.coeffs) if g.kind == "polynomial" else g.coeffs, dtype=float)
        c = np.zeros(M + 1)
        c[: min(M + 1, full.size)] = full[: M + 1]
        dropped = full[M + 1 :]
        if dropped.size:
            tail = float(np.sum(special.factorial(np.arange(M + 1, full.size)) * dropped**2))
    else:
        c = _abs_power_coeffs(g.p, M, quad_nodes)
        cp = abs_moment(g.p)
        c[0] = 0.0 if g.centered else cp
        shift = cp if g.centered else 0.0
        total = abs_moment(2 * g.p) - 2 * shift * cp + shift**2
        kept = float(np.sum(special.factorial(np.arange(M + 1)) * c**2))
        tail = max(total - kept, 0.0)
    return HermiteExpansion(c, truncation_error=tail)


def hermite_rank(e: HermiteExpansion, tol: float | None = None) -> int:
    """Smallest ``m >= 1`` with ``|c_m| > tol``.

    With ``tol=None`` the tolerance is ``1e-8`` times the largest ``|c_m|``.
    """
    c = np.abs(e.float_coeffs)
    if tol is None:
        tol = RANK_RTOL * c.max() if c.max() > 0 else 0.0
    elif tol <= 0:
        raise ValueError("tol must be positive")
    if c[0] > tol:
        raise NotCentered(f"|c_0| = {c[0]:.3g} exceeds tolerance {tol:.3g}")
    idx = np.flatnonzero(c[1:] > tol)
    if idx.size == 0:
        raise AllBelowTolerance("no coefficient exceeds the rank tolerance")
    return int(idx[0]) + 1


def shift(e: HermiteExpansion, k: int) -> HermiteExpansion:
    """``T_k``: ``sum_m c_m He_m -> sum_{m>=k} c_m He_{m-k}``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > e.truncation:
        raise ShiftExceedsTruncation(f"shift {k} exceeds truncation {e.truncation}")
    return HermiteExpansion(e.coeffs[k:])


def differentiate(e: HermiteExpansion, l: int = 1) -> HermiteExpansion:
    """``l``-fold derivative using ``He_m' = m He_{m-1}``."""
    if l < 0 or l > e.truncation:
        raise ValueError("derivative order must lie in [0, M]")
    c = e.coeffs
    for _ in range(l):
        idx = np.arange(1, c.size, dtype=object if c.dtype == object else float)
        c = c[1:] * idx
    return HermiteExpansion(c)


def eval_expansion(e: HermiteExpansion, x):
    """Evaluate ``sum_m c_m He_m(x)`` by Clenshaw's backward recurrence."""
    return _clenshaw(e.float_coeffs, x)


def _clenshaw(c, x):
    c = np.asarray(c, dtype=float)
    nz = np.flatnonzero(c)
    x = np.asarray(x, dtype=float)
    if nz.size == 0:
        out = np.zeros_like(x)
        return out if out.ndim else float(out)
    top = int(nz[-1])
    b1 = np.full_like(x, c[top])
    b2 = np.zeros_like(x)
    tmp = np.empty_like(x)
    for k in range(top - 1, -1, -1):
        # b_k = c_k + x b_{k+1} - (k+1) b_{k+2}
        np.multiply(x, b1, out=tmp)
        tmp -= (k + 1) * b2
        tmp += c[k]
        b1, b2, tmp = tmp, b1, b2
    return b1 if b1.ndim else float(b1)
