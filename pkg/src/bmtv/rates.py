"""Predicted total-variation rates and numeric checks of covariance-sum inequalities.

Rates are keyed by Hermite rank ``d`` and a smoothness tag:

    D2_4, D3_4, D4_4, D5_6, D6_8   g in D^{k,p} for rank 2 (any of them for rank 1)
    D3d2_4                         g in D^{3d-2,4}, rank d >= 3
    hermite                        g = H_d

for a covariance with ``rho(k) ~ k^(-alpha)``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .distance import loglog_rate_fit
from .errors import ConditionViolated, LatticeTooLarge, OutOfRegime, RankMismatch
from .hermite import FunctionSpec, HermiteExpansion, hermite_rank
from .paths import CovarianceModel

SMOOTHNESS_TAGS = ("D2_4", "D3_4", "D4_4", "D5_6", "D6_8", "D3d2_4", "hermite")
RANK2_TAGS = ("D2_4", "D3_4", "D4_4", "D5_6", "D6_8")
LATTICE_MAX = 10**8
DEFAULT_N_GRID = (10, 20, 50, 100, 200)
_EQ_TOL = 1e-12


@dataclass(frozen=True)
class RatePrediction:
    """Rate ``n^exponent (log n)^log_power``."""

    exponent: float
    log_power: float
    source: str
    validity: str
    endpoint: bool = False

    @property
    def vacuous(self) -> bool:
        """Positive exponent: the printed row gives no decay (D3d2_4 with d >= 4, alpha < 1/3)."""
        return self.exponent > 1e-12

    def value(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return n**self.exponent * np.log(n) ** self.log_power

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "log_power": self.log_power,
            "source": self.source,
            "validity": self.validity,
            "endpoint": self.endpoint,
            "vacuous": self.vacuous,
        }


def _eq(a: float, b: float) -> bool:
    return abs(a - b) <= _EQ_TOL


def _gt(a: float, b: float) -> bool:
    return a > b + _EQ_TOL


def _lt(a: float, b: float) -> bool:
    return a < b - _EQ_TOL


def _rows(d: int, tag: str):
    """(region test, exponent(alpha), log power, region text) rows for one key."""
    half = 0.5
    if d == 1:
        return [(lambda a: _gt(a, 1), lambda a: -half, 0.0, "alpha > 1")]
    if d == 2:
        t = {
            "D2_4": [
                (lambda a: _gt(a, 1), lambda a: -half, 0.0, "alpha > 1"),
                (lambda a: _eq(a, 1), lambda a: -half, 1.5, "alpha = 1"),
                (lambda a: _gt(a, 2 / 3) and _lt(a, 1), lambda a: 1 - 1.5 * a, 0.0, "alpha in (2/3, 1)"),
            ],
            "D3_4": [
                (lambda a: _gt(a, 1), lambda a: -half, 0.0, "alpha > 1"),
                (lambda a: _eq(a, 1), lambda a: -half, 1.0, "alpha = 1"),
                (lambda a: _gt(a, half) and _lt(a, 1), lambda a: half - a, 0.0, "alpha in (1/2, 1)"),
            ],
            "D4_4": [
                (lambda a: _gt(a, 1), lambda a: -half, 0.0, "alpha > 1"),
                (lambda a: _eq(a, 1), lambda a: -half, 0.5, "alpha = 1"),
                (lambda a: _gt(a, 2 / 3) and _lt(a, 1), lambda a: -a / 2, 0.0, "alpha in (2/3, 1)"),
                (lambda a: _gt(a, half) and not _gt(a, 2 / 3), lambda a: 1 - 2 * a, 0.0, "alpha in (1/2, 2/3]"),
            ],
            "D5_6": [
                (lambda a: _gt(a, 1), lambda a: -half, 0.0, "alpha > 1"),
                (lambda a: _eq(a, 1), lambda a: -half, 0.5, "alpha = 1"),
                (lambda a: _gt(a, 0.6) and _lt(a, 1), lambda a: -a / 2, 0.0, "alpha in (3/5, 1)"),
                (lambda a: _gt(a, half) and not _gt(a, 0.6), lambda a: 1.5 - 3 * a, 0.0, "alpha in (1/2, 3/5]"),
            ],
            "D6_8": [
                (lambda a: _gt(a, 2 / 3), lambda a: -half, 0.0, "alpha > 2/3"),
                (lambda a: _eq(a, 2 / 3), lambda a: -half, 2.0, "alpha = 2/3"),
                (lambda a: _gt(a, half) and _lt(a, 2 / 3), lambda a: 1.5 - 3 * a, 0.0, "alpha in (1/2, 2/3)"),
            ],
        }
        return t[tag]
    if tag == "D3d2_4":
        lo, mid = 1 / d, 1 / (2 * d - 3)
        return [
            (lambda a: _gt(a, 1), lambda a: -half, 0.0, "alpha > 1"),
            (lambda a: _eq(a, 1), lambda a: -half, 0.5, "alpha = 1"),
            (lambda a: _gt(a, half) and _lt(a, 1), lambda a: -a / 2, 0.0, "alpha in (1/2, 1)"),
            (lambda a: _eq(a, half), lambda a: -a / 2, 0.5, "alpha = 1/2"),
            (lambda a: _gt(a, mid) and _lt(a, half), lambda a: half - 1.5 * a, 0.0, "alpha in (1/(2d-3), 1/2)"),
            (lambda a: _gt(a, lo) and not _gt(a, mid), lambda a: 1 - a * d, 0.0, "alpha in (1/d, 1/(2d-3)]"),
        ]
    lo, mid = 1 / d, 1 / (d - 1)
    return [
        (lambda a: _gt(a, half), lambda a: -half, 0.0, "alpha > 1/2"),
        (lambda a: _eq(a, half), lambda a: -half, 0.5, "alpha = 1/2"),
        (lambda a: _gt(a, mid) and _lt(a, half), lambda a: -a, 0.0, "alpha in (1/(d-1), 1/2)"),
        (lambda a: _eq(a, mid), lambda a: -a, 1.0, "alpha = 1/(d-1)"),
        (lambda a: _gt(a, lo) and _lt(a, mid), lambda a: 1 - a * d, 0.0, "alpha in (1/d, 1/(d-1))"),
    ]


def _resolve_key(d: int, tag: str) -> tuple[int, str]:
    if tag not in SMOOTHNESS_TAGS:
        raise OutOfRegime(f"unknown smoothness tag {tag!r}")
    if d < 1:
        raise OutOfRegime("rank must be >= 1")
    if d == 1:
        return 1, "D2_4"
    if d == 2:
        if tag == "hermite":
            return 2, "D6_8"
        if tag == "D3d2_4":
            # 3d - 2 = 4 for d = 2
            return 2, "D4_4"
        return 2, tag
    if tag in RANK2_TAGS:
        raise OutOfRegime(f"tag {tag} has too few derivatives for rank {d}")
    return d, tag


def predicted_rate(d: int, smoothness: str, alpha: float) -> RatePrediction:
    """Exponent and log power of the total-variation rate for ``rho(k) ~ k^(-alpha)``.

    Endpoint queries (alpha on a row boundary) are flagged; when two printed
    rows share an endpoint the first one wins.
    """
    alpha = float(alpha)
    if not alpha * d > 1.0:
        raise OutOfRegime(f"summability fails: alpha*d = {alpha * d:g} <= 1")
    key_d, key_tag = _resolve_key(int(d), smoothness)
    rows = _rows(key_d, key_tag)
    for test, expo, logp, text in rows:
        if test(alpha):
            # row membership changes across alpha exactly at a table boundary
            side = [tuple(t(alpha + s) for t, *_ in rows) for s in (-1e-9, 1e-9)]
            return RatePrediction(
                exponent=float(expo(alpha)),
                log_power=float(logp),
                source=f"d={d},{smoothness}",
                validity=text,
                endpoint=side[0] != side[1],
            )
    raise OutOfRegime(f"no rate row for d={d}, {smoothness}, alpha={alpha:g}")


def smoothness_tag(g: FunctionSpec, d: int | None = None) -> str:
    """Smoothness tag of a concrete function.

    ``|x|^p - c_p`` with ``N <= p < N + 1`` lies in ``D^{N,q}`` for every q, which
    selects the rank-2 row for ``N``; single Hermite polynomials map to ``hermite``
    and other polynomials to the smoothest row of their rank.
    """
    if g.kind == "abs_power":
        N = int(math.floor(g.p))
        return {1: "D2_4", 2: "D2_4", 3: "D3_4", 4: "D4_4", 5: "D5_6"}.get(N, "D6_8")
    if g.kind == "hermite_single":
        return "hermite"
    if d is None:
        raise ValueError("rank d is needed for polynomial kinds")
    return "D6_8" if d <= 2 else "D3d2_4"


def abs_rho_sum(model: CovarianceModel, a: float, n: int) -> float:
    """``S_a(n) = sum_{|k| <= n} |rho(k)|^a``."""
    r = np.abs(model.rho(np.arange(1, n + 1))) ** a
    return float(1.0 + 2.0 * r.sum())


def bound_value(tag: str, model: CovarianceModel, e: HermiteExpansion, n: int) -> float:
    """n-dependent factor of the rate theorem for ``tag`` with the constant set to 1."""
    d = hermite_rank(e)
    if tag not in SMOOTHNESS_TAGS:
        raise RankMismatch(f"unknown tag {tag!r}")
    if d >= 3 and tag in RANK2_TAGS:
        raise RankMismatch(f"tag {tag} requires rank <= 2, expansion has rank {d}")
    if tag == "hermite" and e.is_single_chaos() != d:
        raise RankMismatch("tag 'hermite' requires a single Hermite polynomial")
    if tag == "D3d2_4" and d < 3:
        raise RankMismatch(f"tag D3d2_4 requires rank >= 3, expansion has rank {d}")

    def S(a):
        return abs_rho_sum(model, a, n)

    root = n**-0.5
    if d == 1:
        return root
    if d == 2:
        if tag == "hermite":
            tag = "D6_8"
        return {
            "D2_4": lambda: root * S(1) ** 1.5,
            "D3_4": lambda: root * S(1),
            "D4_4": lambda: root * S(1) ** 0.5 + root * S(4 / 3) ** 1.5,
            "D5_6": lambda: root * S(1) ** 0.5 + root * S(1.5) ** 2,
            "D6_8": lambda: root * S(1.5) ** 2,
        }[tag]()
    first = root * S(d - 1) * S(2) ** 0.5
    if tag == "hermite":
        return first
    return first + root * S(2) ** 0.5 * S(1) ** 0.5


# ---------------------------------------------------------------- lattice sums


def _abs_rho_table(model: CovarianceModel, kmax: int) -> np.ndarray:
    return np.abs(model.rho(np.arange(kmax + 1)))


def lattice_sum(model: CovarianceModel, n: int, M: int, factors: Sequence[tuple[Sequence[int], float]]) -> float:
    """``sum_{k in [-n, n]^M} prod_f |rho(k . v_f)|^{power_f}``.

    The outer ``M - 2`` coordinates are looped in a fixed order; the last two
    are vectorized.
    """
    if (2 * n + 1) ** M > LATTICE_MAX:
        raise LatticeTooLarge(f"(2n+1)^M = {(2 * n + 1) ** M:.3g} exceeds {LATTICE_MAX:.0e}")
    vecs = [np.asarray(v, dtype=np.int64) for v, _ in factors]
    for v in vecs:
        if v.shape != (M,):
            raise ValueError(f"vector {v.tolist()} does not have length {M}")
    kmax = n * max(int(np.abs(v).sum()) for v in vecs)
    table = _abs_rho_table(model, kmax)
    tabs = [table**p for _, p in factors]
    ax = np.arange(-n, n + 1)
    if M == 1:
        base = [v[0] * ax for v in vecs]
        outer_iter = [()]
    else:
        A, B = np.meshgrid(ax, ax, indexing="ij")
        base = [v[M - 2] * A + v[M - 1] * B for v in vecs]
        outer_iter = itertools.product(range(-n, n + 1), repeat=M - 2)
    total = 0.0
    for outer in outer_iter:
        prod = None
        for v, b, t in zip(vecs, base, tabs):
            off = int(np.dot(v[: len(outer)], outer)) if outer else 0
            vals = t[np.abs(b + off)]
            prod = vals if prod is None else prod * vals
        total += float(prod.sum())
    return total


def _unit(M: int, j: int) -> list[int]:
    u = [0] * M
    u[j] = 1
    return u


DEFAULT_M = {"equ6": 2, "equ7": 2, "equ21": 3, "equ22": 3, "equ23": 3, "ho1": 3, "ho2": None, "ho3": None}
INEQUALITY_TAGS = tuple(DEFAULT_M)
# inequalities whose constant is exactly 1
HOLDER_TAGS = ("ho1", "ho2", "ho3")


def _default_vectors(tag: str, M: int) -> tuple[list[int], list[int] | None]:
    if tag == "equ6":
        return [1] * M, None
    if tag == "equ21":
        return ([1, 1] + [0] * (M - 2)), None
    if tag == "equ22":
        return [1] * M, None
    if tag == "equ23":
        v = [1, 1] + [0] * (M - 2)
        w = [0, 1, 1] + [0] * (M - 3)
        return v, w
    return [], None


def _check_vector(tag: str, v: Sequence[int], M: int, allow_zero: bool, min_nonzero: int = 1) -> None:
    if len(v) != M or any(x not in (-1, 0, 1) for x in v):
        raise ValueError(f"{tag}: vector must have {M} entries in {{-1, 0, 1}}")
    if not allow_zero and 0 in v:
        raise ValueError(f"{tag}: vector entries must be +-1")
    if sum(1 for x in v if x) < min_nonzero:
        raise ValueError(f"{tag}: vector needs at least {min_nonzero} nonzero entries")


def inequality_sides(
    tag: str,
    model: CovarianceModel,
    n: int,
    M: int | None = None,
    v: Sequence[int] | None = None,
    w: Sequence[int] | None = None,
) -> tuple[float, float]:
    """(LHS, RHS) of one covariance-sum inequality at window size ``n``.

    ``ho2`` uses the Hölder form ``(2n+1) S_{3/2}^2`` and ``ho3`` the explicit
    constant ``S_2^{1/4}``, so both hold with constant 1.
    """
    if tag not in DEFAULT_M:
        raise ValueError(f"unknown inequality tag {tag!r}")
    if M is None:
        M = DEFAULT_M[tag]

    def S(a):
        return abs_rho_sum(model, a, n)

    if tag == "ho1":
        if M < 2:
            raise ValueError("ho1 needs M >= 2")
        return S(1 + 1 / M) ** M, S(1) * S(M / (M - 1)) ** (M - 1)
    if tag == "ho2":
        return S(1) ** 3, (2 * n + 1) * S(1.5) ** 2
    if tag == "ho3":
        return S(1.5), S(4 / 3) ** 0.75 * S(2) ** 0.25
    if tag == "equ7":
        return S(1 + 1 / M) ** M, S(1) ** (M - 1)

    dv, dw = _default_vectors(tag, M)
    v = list(v) if v is not None else dv
    axes = [(_unit(M, j), 1.0) for j in range(M)]
    if tag == "equ6":
        _check_vector(tag, v, M, allow_zero=False)
        lhs = lattice_sum(model, n, M, axes + [(v, 1.0)])
        return lhs, S(1 + 1 / M) ** M
    if tag == "equ21":
        _check_vector(tag, v, M, allow_zero=True)
        lhs = lattice_sum(model, n, M, axes + [(v, 1.0)])
        return lhs, S(1) ** (M - 1)
    if tag == "equ22":
        if M < 3:
            raise ValueError("equ22 needs M >= 3")
        _check_vector(tag, v, M, allow_zero=True, min_nonzero=2)
        lhs = lattice_sum(model, n, M, [(_unit(M, 0), 2.0)] + axes[1:] + [(v, 1.0)])
        return lhs, S(1) ** (M - 2)
    # equ23
    if M < 3:
        raise ValueError("equ23 needs M >= 3")
    w = list(w) if w is not None else dw
    _check_vector(tag, v, M, allow_zero=True, min_nonzero=2)
    _check_vector(tag, w, M, allow_zero=True, min_nonzero=2)
    if np.linalg.matrix_rank(np.array([v, w])) < 2:
        raise ValueError("equ23 needs linearly independent v and w")
    lhs = lattice_sum(model, n, M, axes + [(v, 1.0), (w, 1.0)])
    return lhs, S(1) ** (M - 2)


@dataclass
class RatioTable:
    inequality: str
    M: int | None
    rows: list = field(default_factory=list)  # (n, lhs, rhs, ratio)
    literal_rows: list = field(default_factory=list)  # ho2 only: (n, lhs, n * S_{3/2}^2, ratio)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r[3] for r in self.rows])

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def slope(self) -> float:
        """Log-log slope of ratio against n (boundedness diagnostic)."""
        pts = [(r[0], r[3]) for r in self.rows]
        return loglog_rate_fit(pts)[0] if len(pts) >= 3 else float("nan")

    def to_csv(self, path, append: bool = False) -> None:
        with open(Path(path), "a" if append else "w", newline="") as fh:
            wr = csv.writer(fh)
            if not append:
                wr.writerow(["inequality", "n", "lhs", "rhs", "ratio"])
            for n, lhs, rhs, ratio in self.rows:
                wr.writerow([self.inequality, n] + [format(x, ".17g") for x in (lhs, rhs, ratio)])


def check_sum_inequality(
    ineq: str,
    model: CovarianceModel,
    M: int | None = None,
    n_grid: Sequence[int] = DEFAULT_N_GRID,
    v: Sequence[int] | None = None,
    w: Sequence[int] | None = None,
) -> RatioTable:
    """LHS/RHS ratios of an inequality over a grid of window sizes."""
    M = DEFAULT_M.get(ineq) if M is None else M
    table = RatioTable(ineq, M)
    for n in n_grid:
        lhs, rhs = inequality_sides(ineq, model, int(n), M, v, w)
        table.rows.append((int(n), lhs, rhs, lhs / rhs))
        if ineq == "ho2":
            lit = n * abs_rho_sum(model, 1.5, int(n)) ** 2
            table.literal_rows.append((int(n), lhs, lit, lhs / lit))
    return table


# ------------------------------------------------------------ Brascamp-Lieb


@dataclass(frozen=True)
class BoundCheckSpec:
    """Lattice sum ``sum_k prod_j |rho(k . v_j)|^{e_j}`` with Hölder exponents ``p_j``."""

    M: int
    vectors: tuple
    exponents: tuple
    p: tuple

    def __post_init__(self):
        vecs = tuple(tuple(int(x) for x in v) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "exponents", tuple(float(x) for x in self.exponents))
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if not (len(vecs) == len(self.exponents) == len(self.p)):
            raise ValueError("vectors, exponents and p must have equal length")
        for v in vecs:
            if len(v) != self.M or any(x not in (-1, 0, 1) for x in v) or not any(v):
                raise ValueError(f"vector {v} must be a nonzero {{-1,0,1}} vector of length {self.M}")

    def violations(self) -> list[str]:
        """Failures of ``sum p_j = M`` and of the subset-dimension condition."""
        out = []
        if any(x <= 0 for x in self.p):
            out.append("all p_j must be positive")
        if not math.isclose(sum(self.p), self.M, rel_tol=0, abs_tol=1e-12):
            out.append(f"sum of p_j is {sum(self.p):g}, expected M = {self.M}")
        N = len(self.vectors)
        for size in range(1, N + 1):
            for I in itertools.combinations(range(N), size):
                dim = int(np.linalg.matrix_rank(np.array([self.vectors[j] for j in I], dtype=float)))
                tot = sum(self.p[j] for j in I)
                if tot > dim + 1e-12:
                    out.append(f"subset {list(I)}: sum p = {tot:g} > dim = {dim}")
        return out


def brascamp_lieb_check(spec: BoundCheckSpec, model: CovarianceModel, n: int) -> tuple[float, float, float]:
    """(LHS, RHS, ratio) on the window ``[-n, n]^M``; RHS sums over ``|k| <= n``."""
    bad = spec.violations()
    if bad:
        raise ConditionViolated("; ".join(bad))
    lhs = lattice_sum(model, n, spec.M, list(zip(spec.vectors, spec.exponents)))
    rhs = 1.0
    for e, p in zip(spec.exponents, spec.p):
        rhs *= abs_rho_sum(model, e / p, n) ** p
    return lhs, rhs, lhs / rhs
