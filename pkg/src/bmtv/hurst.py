"""Hurst parameter estimation from p-power variations at two nested resolutions.

    T = V^p_{lam n} / V^p_n,    H_hat = (1/p) (1 - log T / log lam)
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import InconsistentRefinement, NonPositiveVariation, RegimeViolation
from .paths import CovarianceModel, _run_chunks, _Sampler, generate_rows

REFINE_TOL = 1e-12


@dataclass(frozen=True)
class HurstResult:
    h_hat: float
    lam: int
    p: float
    n: int
    t_ratio: float


def power_variation(increments, p: float):
    """``sum_j |increment_j|^p`` (row-wise for a matrix)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    x = np.asarray(increments, dtype=float)
    out = np.sum(np.abs(x) ** p, axis=-1)
    return float(out) if out.ndim == 0 else out


def hurst_from_ratio(t_ratio, p: float, lam: int):
    return (1.0 - np.log(t_ratio) / math.log(lam)) / p


def _check_lambda(lam) -> int:
    if int(lam) != lam or lam < 2:
        raise ValueError("lambda must be an integer >= 2")
    return int(lam)


def block_sums(fine, lam: int) -> np.ndarray:
    fine = np.asarray(fine, dtype=float)
    if fine.shape[-1] % lam:
        raise InconsistentRefinement(f"fine length {fine.shape[-1]} is not a multiple of lambda = {lam}")
    return fine.reshape(fine.shape[:-1] + (fine.shape[-1] // lam, lam)).sum(axis=-1)


def estimate_hurst(path_coarse, path_fine, p: float, lam: int, check: bool = True) -> HurstResult:
    """Estimate H from one path observed at resolutions ``1/n`` and ``1/(lam n)``.

    The fine increments must sum, in blocks of ``lam``, to the coarse ones.
    """
    lam = _check_lambda(lam)
    coarse = np.asarray(path_coarse, dtype=float).ravel()
    fine = np.asarray(path_fine, dtype=float).ravel()
    if fine.size != lam * coarse.size:
        raise InconsistentRefinement(f"fine length {fine.size} != lambda * coarse length {lam * coarse.size}")
    if check:
        scale = max(1.0, float(np.max(np.abs(coarse)))) if coarse.size else 1.0
        err = float(np.max(np.abs(block_sums(fine, lam) - coarse))) if coarse.size else 0.0
        if err > REFINE_TOL * scale:
            raise InconsistentRefinement(f"block sums differ from coarse increments by {err:.3g}")
    vc = power_variation(coarse, p)
    vf = power_variation(fine, p)
    if vc <= 0 or vf <= 0:
        raise NonPositiveVariation("power variation is zero at one of the resolutions")
    t = vf / vc
    return HurstResult(float(hurst_from_ratio(t, p, lam)), lam, float(p), coarse.size, float(t))


def nested_pair(H: float, n: int, lam: int, num_paths: int, seed: int, start: int = 0):
    """Rows ``start..start+num_paths-1`` of (coarse, fine) fBm increments on [0, 1].

    Fine unit-scale fGn of length ``lam n`` is scaled by ``(lam n)^{-H}`` and the
    coarse increments are its block sums, so both come from one fBm path.
    """
    lam = _check_lambda(lam)
    model = CovarianceModel.fgn(H)
    fine = generate_rows(model, lam * n, seed, start, start + num_paths) * float(lam * n) ** (-H)
    return block_sums(fine, lam), fine


def _solve_tau(H: float, p: float, lam: int) -> float:
    target = lam ** (1.0 - p * H)
    base = (lam - 2) * lam**-p

    def f(tau):
        return abs(1.0 / lam + tau) ** p + abs(1.0 / lam - tau) ** p + base - target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    if f(0.0) >= 0:
        return 0.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def manufactured_pair(H: float, p: float, lam: int, n: int, seed: int = 0):
    """Deterministic (coarse, fine) pair whose variation ratio is exactly ``lam^{1-pH}``.

    Each coarse increment ``a`` is refined into ``a (1/lam + tau, 1/lam - tau, 1/lam, ...)``
    with ``tau`` chosen so every block has variation ``lam^{1-pH} |a|^p``.
    """
    lam = _check_lambda(lam)
    if not 0.0 < H <= 1.0:
        raise ValueError("H must lie in (0, 1]")
    rng = np.random.Generator(np.random.Philox(key=seed))
    a = rng.standard_normal(n)
    a[a == 0.0] = 1.0
    tau = _solve_tau(H, p, lam)
    shape = np.full(lam, 1.0 / lam)
    shape[0] += tau
    shape[1] -= tau
    fine = (a[:, None] * shape[None, :]).ravel()
    # coarse from the fine blocks so the refinement check holds to rounding
    return block_sums(fine, lam), fine


@dataclass
class ConsistencyRow:
    n: int
    mean_h: float
    sd_h: float
    q50: float
    q90: float
    mean_stat: float


@dataclass
class ConsistencyTable:
    H: float
    p: float
    lam: int
    reps: int
    seed: int
    rows: list = field(default_factory=list)
    in_theorem: bool = True
    notes: list = field(default_factory=list)

    @property
    def q90_decreasing(self) -> bool:
        q = [r.q90 for r in self.rows]
        return all(b < a for a, b in zip(q, q[1:]))

    @property
    def sd_decreasing(self) -> bool:
        s = [r.sd_h for r in self.rows]
        return all(b < a for a, b in zip(s, s[1:]))


def _grid_seed(seed: int, n: int) -> int:
    return int(np.random.SeedSequence([seed & (2**64 - 1), n]).generate_state(1, dtype=np.uint64)[0])


def hurst_replicates(
    H: float, p: float, lam: int, n: int, reps: int, seed: int, threads: int = 1, chunk: int = 64
) -> np.ndarray:
    """``H_hat`` for ``reps`` independent nested pairs (row ``i`` uses substream ``i``)."""
    lam = _check_lambda(lam)
    model = CovarianceModel.fgn(H)
    sampler = _Sampler(model, lam * n)

    def work(a, b):
        fine = generate_rows(model, lam * n, seed, a, b, sampler=sampler)
        vf = power_variation(fine, p)
        vc = power_variation(block_sums(fine, lam), p)
        return hurst_from_ratio(vf / vc, p, lam)

    return np.concatenate(_run_chunks(work, reps, chunk, threads))


def consistency_experiment(
    H: float,
    p: float,
    lam: int,
    n_grid: Sequence[int],
    reps: int,
    seed: int,
    threads: int = 1,
) -> ConsistencyTable:
    """Distribution of ``sqrt(n / log n) |H_hat - H|`` along an n grid.

    Each n uses an independent stream derived from ``(seed, n)``.
    """
    lam = _check_lambda(lam)
    table = ConsistencyTable(float(H), float(p), lam, int(reps), int(seed))
    if H >= 0.75:
        warnings.warn(f"H = {H} >= 3/4 lies outside the consistency theorem", RegimeViolation, stacklevel=2)
        table.in_theorem = False
        table.notes.append("H >= 3/4")
    if not (p == 2 or p >= 3):
        table.in_theorem = False
        table.notes.append("p in (2, 3) or p < 2")
    for n in n_grid:
        h = hurst_replicates(H, p, lam, int(n), reps, _grid_seed(seed, int(n)), threads)
        stat = math.sqrt(n / math.log(n)) * np.abs(h - H)
        table.rows.append(
            ConsistencyRow(
                n=int(n),
                mean_h=float(h.mean()),
                sd_h=float(h.std(ddof=1)),
                q50=float(np.quantile(stat, 0.5)),
                q90=float(np.quantile(stat, 0.9)),
                mean_stat=float(stat.mean()),
            )
        )
    return table


def read_increments_csv(path) -> np.ndarray:
    """One-column CSV with header ``increment``."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "increment" not in reader.fieldnames:
            raise ValueError("CSV must have an 'increment' column")
        return np.array([float(r["increment"]) for r in reader])
