"""Stationary Gaussian sequences with a prescribed covariance.

Paths are synthesized by circulant embedding. Each path draws from its own
counter-based Philox substream (key from the seed, path index in the top
counter word), so a batch is bit-identical no matter how rows are chunked or
spread over threads, and a smaller batch is a prefix of a larger one.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import fft as sp_fft

from .errors import LagTooLarge, NotEmbeddable

EPS_EMBED = 1e-10
CHOLESKY_MAX_N = 2048
CHOLESKY_JITTER = 1e-12
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class CovarianceModel:
    """Unit-variance stationary covariance ``rho(k)``.

    kinds: ``white``; ``fgn`` (fractional Gaussian noise, Hurst ``H``);
    ``power_law`` with ``rho(k) = (1 + |k|)^(-alpha)``; ``table`` holding
    ``rho(0..L)`` explicitly (zero beyond ``L``).
    """

    kind: str
    H: float | None = None
    alpha: float | None = None
    values: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "fgn":
            if self.H is None or not 0.0 < self.H < 1.0:
                raise ValueError("fgn requires H in (0, 1)")
        elif self.kind == "power_law":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("power_law requires alpha > 0")
        elif self.kind == "table":
            v = np.asarray(self.values, dtype=float)
            if v.size == 0 or v[0] != 1.0:
                raise ValueError("table covariance must start with rho(0) = 1")
            if np.any(np.abs(v) > 1.0):
                raise ValueError("table covariance must satisfy |rho(k)| <= 1")
        elif self.kind != "white":
            raise ValueError(f"unknown covariance kind {self.kind!r}")

    @classmethod
    def white(cls) -> "CovarianceModel":
        return cls("white")

    @classmethod
    def fgn(cls, H: float) -> "CovarianceModel":
        return cls("fgn", H=float(H))

    @classmethod
    def power_law(cls, alpha: float) -> "CovarianceModel":
        return cls("power_law", alpha=float(alpha))

    @classmethod
    def table(cls, values) -> "CovarianceModel":
        return cls("table", values=tuple(float(v) for v in values))

    @property
    def decay_exponent(self) -> float | None:
        """``alpha`` in ``rho(k) ~ k^(-alpha)``; ``inf`` when rho is eventually zero."""
        if self.kind == "white" or (self.kind == "fgn" and self.H == 0.5):
            return math.inf
        if self.kind == "fgn":
            return 2.0 - 2.0 * self.H
        if self.kind == "power_law":
            return self.alpha
        return math.inf

    def rho(self, k):
        k = np.abs(np.asarray(k, dtype=np.int64))
        if self.kind == "white":
            out = (k == 0).astype(float)
        elif self.kind == "fgn":
            kf = k.astype(float)
            h2 = 2.0 * self.H
            out = 0.5 * ((kf + 1.0) ** h2 + np.abs(kf - 1.0) ** h2 - 2.0 * kf**h2)
            out = np.where(k == 0, 1.0, out)
        elif self.kind == "power_law":
            out = (1.0 + k) ** (-self.alpha)
        else:
            v = np.asarray(self.values, dtype=float)
            out = np.where(k < v.size, v[np.minimum(k, v.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "fgn":
            d["H"] = self.H
        elif self.kind == "power_law":
            d["alpha"] = self.alpha
        elif self.kind == "table":
            d["values"] = list(self.values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceModel":
        kind = d["kind"]
        if kind == "fgn":
            return cls.fgn(d["H"])
        if kind == "power_law":
            return cls.power_law(d["alpha"])
        if kind == "table":
            return cls.table(d["values"])
        return cls.white()


def rho(model: CovarianceModel, k):
    return model.rho(k)


def bm_condition_holds(model: CovarianceModel, d: int) -> bool:
    """Whether ``sum_k |rho(k)|^d`` converges for this model."""
    a = model.decay_exponent
    return math.isinf(a) or a * d > 1.0


def abs_rho_partial_sums(model: CovarianceModel, d: float, n_max: int) -> np.ndarray:
    """``S(n) = sum_{|k| <= n} |rho(k)|^d`` for ``n = 0..n_max``."""
    r = np.abs(model.rho(np.arange(n_max + 1))) ** d
    r[1:] *= 2.0
    return np.cumsum(r)


@dataclass(frozen=True, eq=False)
class PathBatch:
    paths: np.ndarray
    n: int
    model: CovarianceModel
    seed: int

    @property
    def num_paths(self) -> int:
        return self.paths.shape[0]

    def sidecar(self) -> dict:
        return {"model": self.model.to_dict(), "n": self.n, "num_paths": self.num_paths, "seed": self.seed}

    def dump(self, path) -> tuple[Path, Path]:
        """Write little-endian float64 rows plus a JSON sidecar next to it."""
        path = Path(path)
        np.ascontiguousarray(self.paths, dtype="<f8").tofile(path)
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps(self.sidecar(), sort_keys=True))
        return path, side

    @classmethod
    def load(cls, path) -> "PathBatch":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        data = np.fromfile(path, dtype="<f8").reshape(meta["num_paths"], meta["n"])
        return cls(data, meta["n"], CovarianceModel.from_dict(meta["model"]), meta["seed"])


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for path ``index``: Philox keyed by the seed, index in the high counter word."""
    counter = np.array([0, 0, 0, index & _U64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed & _U64, counter=counter))


def embedding_size(n: int) -> int:
    """Number of embedded points ``n' >= n`` with ``2(n'-1)`` a fast FFT length.

    For ``n = 2^k`` the plain length ``2(n-1)`` can have a large prime factor
    (``2 * 8191`` at ``n = 8192``), so the embedding is built for ``n'`` points
    and the first ``n`` coordinates are kept.
    """
    return sp_fft.next_fast_len(2 * (n - 1), real=True) // 2 + 1


def circulant_eigenvalues(model: CovarianceModel, n: int) -> np.ndarray:
    """Eigenvalues of the length ``2(n-1)`` circulant whose first row embeds rho(0..n-1).

    Only the ``n`` non-redundant ones (frequencies ``0..n-1``) are returned.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    r = model.rho(np.arange(n))
    row = np.concatenate([r, r[-2:0:-1]])
    return np.fft.rfft(row).real


class _Sampler:
    def __init__(self, model: CovarianceModel, n: int, method: str = "auto"):
        self.n = n
        self.method = method
        if method in ("auto", "circulant"):
            self.n_embed = embedding_size(n)
            lam = circulant_eigenvalues(model, self.n_embed)
            if lam.min() < -EPS_EMBED:
                if method == "circulant" or n > CHOLESKY_MAX_N:
                    raise NotEmbeddable(
                        f"circulant eigenvalue {lam.min():.3g} below -{EPS_EMBED:g} for n={n}"
                    )
                method = "cholesky"
            else:
                self.m = 2 * (self.n_embed - 1)
                self.amp = np.sqrt(np.clip(lam, 0.0, None))
                half = self.m // 2
                self._scale = self.amp * math.sqrt(self.m)
                self._scale[1:half] /= math.sqrt(2.0)
                self.method = "circulant"
        if method == "cholesky":
            k = np.arange(n)
            cov = model.rho(np.abs(k[:, None] - k[None, :]))
            cov[np.diag_indices(n)] += CHOLESKY_JITTER
            self.chol = np.linalg.cholesky(cov)
            self.method = "cholesky"

    def rows(self, rngs) -> np.ndarray:
        if self.method == "cholesky":
            z = np.empty((len(rngs), self.n))
            for i, r in enumerate(rngs):
                r.standard_normal(out=z[i])
            return z @ self.chol.T
        half = self.m // 2
        z = np.empty((len(rngs), self.m))
        for i, r in enumerate(rngs):
            r.standard_normal(out=z[i])
        # Hermitian spectrum: real endpoints, interior from consecutive (re, im) pairs
        spec = np.empty((z.shape[0], half + 1), dtype=complex)
        spec[:, 0] = z[:, 0] * self._scale[0]
        spec[:, half] = z[:, 1] * self._scale[half]
        np.multiply(z[:, 2:].view(complex), self._scale[1:half], out=spec[:, 1:half])
        x = np.fft.irfft(spec, n=self.m, axis=1)
        return x[:, : self.n]


def _run_chunks(fn: Callable[[int, int], np.ndarray], total: int, chunk: int, threads: int) -> list:
    bounds = [(i, min(i + chunk, total)) for i in range(0, total, chunk)]
    if threads <= 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


def generate_rows(
    model: CovarianceModel, n: int, seed: int, start: int, stop: int, method: str = "auto", sampler=None
) -> np.ndarray:
    """Rows ``start..stop-1`` of the batch that ``generate`` would produce."""
    sampler = sampler or _Sampler(model, n, method)
    return np.ascontiguousarray(sampler.rows([path_rng(seed, i) for i in range(start, stop)]))


def generate(
    model: CovarianceModel,
    n: int,
    num_paths: int,
    seed: int,
    threads: int = 1,
    method: str = "auto",
    chunk: int = 256,
) -> PathBatch:
    """Draw ``num_paths`` independent copies of ``(X_1..X_n)`` with covariance ``rho(i-j)``.

    Raises NotEmbeddable when the circulant has a clearly negative
    eigenvalue and the dense Cholesky fallback is not available
    (``n > 2048`` or ``method="circulant"``).
    """
    if n < 2 or num_paths < 1:
        raise ValueError("need n >= 2 and num_paths >= 1")
    sampler = _Sampler(model, n, method)
    parts = _run_chunks(
        lambda a, b: generate_rows(model, n, seed, a, b, sampler=sampler), num_paths, chunk, threads
    )
    paths = np.concatenate(parts, axis=0)
    paths.setflags(write=False)
    return PathBatch(paths, n, model, int(seed))


# self-similarity: n^H (B_{(j+1)/n} - B_{j/n}) has the law of unit-step fGn
fbm_increments_unit_scale = generate


def sample_autocovariance(b: PathBatch | np.ndarray, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Pooled lag-k autocovariance estimates and their standard errors across paths.

    Each path contributes ``(1/(n-k)) sum_j X_j X_{j+k}``; the estimate is the
    mean over paths and the standard error is the across-path standard
    deviation divided by ``sqrt(num_paths)``.
    """
    x = b.paths if isinstance(b, PathBatch) else np.atleast_2d(np.asarray(b, dtype=float))
    n = x.shape[1]
    if max_lag >= n or max_lag < 0:
        raise LagTooLarge(f"max_lag {max_lag} must be < n = {n}")
    per_path = np.empty((x.shape[0], max_lag + 1))
    for k in range(max_lag + 1):
        per_path[:, k] = np.einsum("ij,ij->i", x[:, : n - k], x[:, k:]) / (n - k)
    est = per_path.mean(axis=0)
    if x.shape[0] > 1:
        se = per_path.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
    else:
        se = np.zeros(max_lag + 1)
    return est, se
