"""Experiment configuration and the pipelines behind the command-line tool.

Configs are TOML files whose tables are flattened to dotted keys
(``mc.paths``, ``model.H``, ...). Every output is a pure function of the
config, so reruns are byte-identical for any thread count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import distance, hurst, rates, stein
from .errors import BMTVError, ConfigInvalid, NonSummable, OutOfRegime, RankMismatch
from .hermite import FunctionSpec, expand, hermite_rank
from .paths import CovarianceModel, _run_chunks, _Sampler, bm_condition_holds, generate, generate_rows, sample_autocovariance
from .statistics import sigma_n_squared, sigma_squared, variance_with_se

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXPERIMENTS = ("verify-clt", "rates", "expand", "simulate", "hurst", "check-lemmas")
CSV_COLUMNS = (
    "n",
    "sigma_n",
    "ks",
    "tv_hist",
    "var_du",
    "a2",
    "a3",
    "kappa4",
    "tv_upper_prop31",
    "tv_upper_prop33",
    "bound_value",
    "paths",
    "seed",
    "config_hash",
)
# keys that change where or how fast results are produced but not the results
_HASH_EXCLUDED_PREFIXES = ("output.", "threads")

DEFAULTS: dict[str, Any] = {
    "expansion.M": 40,
    "mc.chunk": 256,
    "mc.nested": True,
    "tolerances.sandwich_se": 5.0,
    "tolerances.duality_se": 4.0,
    "tolerances.variance_se": 4.0,
    "output.path": "out",
    "hurst.p": 2.0,
    "hurst.lam": 2,
    "lemmas.n_grid": list(rates.DEFAULT_N_GRID),
    "simulate.max_lag": 8,
    "simulate.dump": False,
}

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2


# ------------------------------------------------------------------ config


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config(path) -> dict:
    with open(Path(path), "rb") as fh:
        return flatten(tomllib.load(fh))


def _canonical(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return [_canonical(x) for x in v]
    return v


def config_hash(flat: dict) -> str:
    """First 16 hex digits of sha256 over the canonical JSON of the result-relevant keys."""
    keep = {k: _canonical(v) for k, v in flat.items() if not k.startswith(_HASH_EXCLUDED_PREFIXES)}
    blob = json.dumps(keep, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Diagnostic:
    level: str  # "error" or "warning"
    key: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.key}: {self.message}"


def _model_from(flat: dict) -> CovarianceModel:
    kind = flat.get("model.kind")
    if kind == "fgn":
        return CovarianceModel.fgn(flat["model.H"])
    if kind == "power_law":
        return CovarianceModel.power_law(flat["model.alpha"])
    if kind == "table":
        return CovarianceModel.table(flat["model.values"])
    if kind == "white":
        return CovarianceModel.white()
    raise ValueError(f"unknown model kind {kind!r}")


def _function_from(flat: dict) -> FunctionSpec:
    kind = flat.get("function.kind")
    if kind == "hermite_single":
        return FunctionSpec.hermite_single(flat["function.m"])
    if kind == "abs_power":
        return FunctionSpec.abs_power(flat["function.p"], flat.get("function.centered", True))
    if kind == "polynomial":
        return FunctionSpec.polynomial(flat["function.coeffs"])
    if kind == "explicit_hermite":
        return FunctionSpec.explicit_hermite(flat["function.coeffs"])
    raise ValueError(f"unknown function kind {kind!r}")


def _needs(exp: str) -> tuple[bool, bool, bool]:
    """(model, function, mc) sections required by an experiment."""
    return {
        "verify-clt": (True, True, True),
        "rates": (True, True, False),
        "expand": (False, True, False),
        "simulate": (True, False, True),
        "hurst": (False, False, True),
        "check-lemmas": (False, False, False),
    }[exp]


def validate(flat: dict) -> list[Diagnostic]:
    """Every problem found in a flattened config; never raises."""
    diags: list[Diagnostic] = []

    def err(key, msg):
        diags.append(Diagnostic("error", key, msg))

    exp = flat.get("experiment")
    if exp not in EXPERIMENTS:
        err("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        return diags
    need_model, need_func, need_mc = _needs(exp)

    model = None
    if need_model or "model.kind" in flat:
        try:
            model = _model_from(flat)
        except KeyError as ex:
            err(str(ex.args[0]), "missing")
        except (ValueError, TypeError) as ex:
            err("model", str(ex))
    func = None
    d = None
    if need_func or "function.kind" in flat:
        try:
            func = _function_from(flat)
            e = expand(func, int(flat.get("expansion.M", DEFAULTS["expansion.M"])))
            if exp != "expand":
                d = hermite_rank(e)
        except KeyError as ex:
            err(str(ex.args[0]), "missing")
        except (ValueError, TypeError, BMTVError) as ex:
            err("function", str(ex))

    if exp in ("verify-clt", "rates", "simulate", "hurst"):
        nv = flat.get("n_values")
        if not isinstance(nv, list) or len(nv) == 0:
            err("n_values", "must be a non-empty list of integers")
        elif not all(isinstance(x, int) and x >= 2 for x in nv):
            err("n_values", "entries must be integers >= 2")
        elif any(b <= a for a, b in zip(nv, nv[1:])):
            err("n_values", "must be strictly increasing")
    if need_mc:
        paths = flat.get("mc.paths")
        if not isinstance(paths, int) or paths < 2:
            err("mc.paths", "must be an integer >= 2")
        seed = flat.get("mc.seed")
        if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
            err("mc.seed", "must be present as an unsigned 64-bit integer")
        bp = flat.get("mc.bound_paths")
        if bp is not None and (not isinstance(bp, int) or bp < 2):
            err("mc.bound_paths", "must be an integer >= 2")
        ch = flat.get("mc.chunk", DEFAULTS["mc.chunk"])
        if not isinstance(ch, int) or ch < 1:
            err("mc.chunk", "must be a positive integer")
    if exp == "hurst":
        H = flat.get("hurst.H")
        if not isinstance(H, (int, float)) or not 0 < H < 1:
            err("hurst.H", "must lie in (0, 1)")
        lam = flat.get("hurst.lam", DEFAULTS["hurst.lam"])
        if not isinstance(lam, int) or lam < 2:
            err("hurst.lam", "must be an integer >= 2")
        p = flat.get("hurst.p", DEFAULTS["hurst.p"])
        if not isinstance(p, (int, float)) or p < 1:
            err("hurst.p", "must be >= 1")
    if exp == "check-lemmas":
        tags = flat.get("lemmas.tags", list(rates.INEQUALITY_TAGS))
        bad = [t for t in tags if t not in rates.INEQUALITY_TAGS]
        if bad:
            err("lemmas.tags", f"unknown tags {bad}")
        if "lemmas.alphas" not in flat and "model.kind" not in flat:
            err("lemmas.alphas", "give power-law exponents or a model table")
    tag = flat.get("rates.tag")
    if tag is not None and tag not in rates.SMOOTHNESS_TAGS:
        err("rates.tag", f"must be one of {', '.join(rates.SMOOTHNESS_TAGS)}")

    if model is not None and d is not None and not bm_condition_holds(model, d):
        diags.append(
            Diagnostic(
                "warning",
                "model",
                f"Breuer-Major condition fails: alpha*d = {model.decay_exponent * d:g} <= 1",
            )
        )
    return diags


@dataclass
class ExperimentConfig:
    flat: dict
    experiment: str
    model: CovarianceModel | None
    function: FunctionSpec | None
    n_values: list
    paths: int | None
    seed: int | None
    output: Path
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_flat(cls, flat: dict) -> "ExperimentConfig":
        errors = [dg for dg in validate(flat) if dg.level == "error"]
        if errors:
            raise ConfigInvalid("; ".join(str(e) for e in errors))
        full = {**DEFAULTS, **flat}
        return cls(
            flat=dict(flat),
            experiment=full["experiment"],
            model=_model_from(full) if "model.kind" in full else None,
            function=_function_from(full) if "function.kind" in full else None,
            n_values=list(full.get("n_values", [])),
            paths=full.get("mc.paths"),
            seed=full.get("mc.seed"),
            output=Path(full["output.path"]),
            tolerances={k.split(".", 1)[1]: v for k, v in full.items() if k.startswith("tolerances.")},
        )

    def get(self, key: str, default=None):
        return self.flat.get(key, DEFAULTS.get(key, default))

    @property
    def hash(self) -> str:
        return config_hash(self.flat)


# ------------------------------------------------------------------ output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


@dataclass
class RunResult:
    exit_code: int
    csv_path: Path | None
    summary_path: Path | None
    summary: dict


def _slope(points) -> float | None:
    pts = [(n, v) for n, v in points if v is not None and math.isfinite(v) and v > 0]
    if len(pts) < 3:
        return None
    return distance.loglog_rate_fit(pts)[0]


# ------------------------------------------------------------ verify-clt


@dataclass
class CLTSamples:
    """Per-path samples for one n: Y_n, and D_u, D^2_u on the bound subset."""

    n: int
    y: np.ndarray
    du: np.ndarray
    du2: np.ndarray


def clt_samples(
    model: CovarianceModel,
    g: FunctionSpec,
    e,
    n_values,
    paths: int,
    seed: int,
    bound_paths: int | None = None,
    nested: bool = True,
    chunk: int = 256,
    threads: int = 1,
) -> list[CLTSamples]:
    """Simulate ``Y_n`` and the derivative functionals for every n of the grid.

    With ``nested=True`` paths are drawn once at the largest n and each smaller
    n uses the leading coordinates (an exact stationary sample of that length).
    The derivative functionals are evaluated on the first ``bound_paths`` paths.
    """
    bound_paths = paths if bound_paths is None else min(bound_paths, paths)
    n_values = [int(n) for n in n_values]

    def batch(n_gen, ns, a, b):
        x = generate_rows(model, n_gen, seed, a, b, sampler=samplers[n_gen])
        out = []
        # running sums of g(X_j) over consecutive prefix segments
        gx = g(x)
        run = np.zeros(x.shape[0])
        prev = 0
        for n in ns:
            xn = x[:, :n]
            run = run + gx[:, prev:n].sum(axis=1)
            prev = n
            y = run / math.sqrt(n)
            kb = max(0, min(b, bound_paths) - a)
            if kb:
                du = stein.d_u_yn(xn[:kb], e, model)
                du2 = stein.d_u2_yn(xn[:kb], e, model)
            else:
                du = du2 = np.empty(0)
            out.append((y, du, du2))
        return out

    groups = [(max(n_values), n_values)] if nested else [(n, [n]) for n in n_values]
    samplers = {n_gen: _Sampler(model, n_gen) for n_gen, _ in groups}
    results = {}
    for n_gen, ns in groups:
        parts = _run_chunks(lambda a, b: batch(n_gen, ns, a, b), paths, chunk, threads)
        for i, n in enumerate(ns):
            results[n] = CLTSamples(
                n,
                np.concatenate([p[i][0] for p in parts]),
                np.concatenate([p[i][1] for p in parts]),
                np.concatenate([p[i][2] for p in parts]),
            )
    return [results[n] for n in n_values]


def ks_se(m: int) -> float:
    """Largest pointwise standard error of an empirical CDF built from m samples."""
    return 0.5 / math.sqrt(m)


def clt_row(s: CLTSamples, model, e, g, tag, seed, chash, tol) -> tuple[dict, dict]:
    """One CSV row plus its per-n check record."""
    n = s.n
    s2 = sigma_n_squared(model, e, n)
    sig = math.sqrt(s2)
    z = s.y / sig
    dist = distance.distance_estimate(z)
    rep = stein.bound_report(n, s.y[: s.du.size], s.du, s.du2, sig, e)
    try:
        bval = rates.bound_value(tag, model, e, n)
    except RankMismatch:
        bval = float("nan")
    var_y, var_se = variance_with_se(s.y)
    du_mean = float(s.du.mean())
    du_se = float(s.du.std(ddof=1) / math.sqrt(s.du.size))
    ks_noise = ks_se(z.size)
    comb31 = math.hypot(rep.tv_upper_prop31.se, ks_noise)
    comb33 = math.hypot(rep.tv_upper_prop33.se, ks_noise)
    k_sand = tol.get("sandwich_se", 5.0)
    # first chaos: D_u Y_n is deterministic up to FFT round-off
    degenerate = stein._is_degenerate(s.du, s2)
    duality_ok = degenerate or abs(du_mean - s2) <= tol.get("duality_se", 4.0) * du_se
    checks = {
        "n": n,
        "sandwich_prop31": dist.ks <= rep.tv_upper_prop31.value + k_sand * comb31,
        "sandwich_prop33": dist.ks <= rep.tv_upper_prop33.value + k_sand * comb33,
        "duality": duality_ok,
        "duality_z": 0.0 if degenerate else (du_mean - s2) / du_se,
        "variance": abs(var_y - s2) <= tol.get("variance_se", 4.0) * var_se,
        "variance_z": (var_y - s2) / var_se if var_se > 0 else 0.0,
        "var_y": var_y,
        "sigma_n_squared": s2,
        "du_mean": du_mean,
        "tv_upper_prop31_se": rep.tv_upper_prop31.se,
        "tv_upper_prop33_se": rep.tv_upper_prop33.se,
        "tv_upper_prop31_alt": rep.tv_upper_prop31_alt,
        "tv_upper_prop32_partial": rep.tv_upper_prop32_partial,
        "tv_upper_chaos": rep.tv_upper_chaos,
        "bound_paths": int(s.du.size),
    }
    row = {
        "n": n,
        "sigma_n": sig,
        "ks": dist.ks,
        "tv_hist": dist.tv_hist,
        "var_du": rep.var_du.value,
        "a2": rep.a2.value,
        "a3": rep.a3.value,
        "kappa4": rep.kappa4.value,
        "tv_upper_prop31": rep.tv_upper_prop31.value,
        "tv_upper_prop33": rep.tv_upper_prop33.value,
        "bound_value": bval,
        "paths": int(z.size),
        "seed": seed,
        "config_hash": chash,
    }
    return row, checks


def _prediction(model: CovarianceModel, d: int, tag: str) -> dict | None:
    a = model.decay_exponent
    if a is None or math.isinf(a):
        a = 1e9  # summable with room to spare: first row of every table
    try:
        return rates.predicted_rate(d, tag, a).to_dict()
    except OutOfRegime as ex:
        return {"error": str(ex)}


def run_verify_clt(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    g = cfg.function
    e = expand(g, int(cfg.get("expansion.M")))
    d = hermite_rank(e)
    tag = cfg.get("rates.tag") or rates.smoothness_tag(g, d)
    samples = clt_samples(
        cfg.model,
        g,
        e,
        cfg.n_values,
        cfg.paths,
        cfg.seed,
        bound_paths=cfg.get("mc.bound_paths"),
        nested=bool(cfg.get("mc.nested")),
        chunk=int(cfg.get("mc.chunk")),
        threads=threads,
    )
    rows, checks = [], []
    for s in samples:
        r, c = clt_row(s, cfg.model, e, g, tag, cfg.seed, cfg.hash, cfg.tolerances)
        rows.append(r)
        checks.append(c)
    out = cfg.output
    csv_path = out / "verify-clt.csv"
    write_csv(csv_path, CSV_COLUMNS, rows)

    slopes = {
        k: _slope([(r["n"], r[k]) for r in rows])
        for k in ("ks", "tv_hist", "tv_upper_prop31", "tv_upper_prop33", "bound_value")
    }
    flags = {
        "sandwich": all(c["sandwich_prop31"] and c["sandwich_prop33"] for c in checks),
        "duality": all(c["duality"] for c in checks),
        "variance": all(c["variance"] for c in checks),
    }
    tol = cfg.tolerances
    if "ks_slope_max" in tol:
        flags["ks_slope"] = slopes["ks"] is not None and slopes["ks"] <= tol["ks_slope_max"]
    if "bound_slope_tol" in tol:
        which = tol.get("bound_slope_of", "tv_upper_prop33")
        a, b = slopes.get(which), slopes["bound_value"]
        flags["bound_slope"] = a is not None and b is not None and abs(a - b) <= tol["bound_slope_tol"]
    sig2 = None
    if cfg.get("report.sigma_squared", False):
        try:
            sig2 = sigma_squared(cfg.model, e)[0]
        except NonSummable as ex:
            sig2 = str(ex)
    summary = {
        "experiment": "verify-clt",
        "config_hash": cfg.hash,
        "rank": d,
        "smoothness_tag": tag,
        "prediction": _prediction(cfg.model, d, tag),
        "slopes": slopes,
        "checks": checks,
        "flags": flags,
        "sigma_squared": sig2,
        "pass": all(flags.values()),
    }
    sp = out / "verify-clt_summary.json"
    write_json(sp, summary)
    return RunResult(EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED, csv_path, sp, summary)


# ------------------------------------------------------------ other pipelines


def run_rates(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    e = expand(cfg.function, int(cfg.get("expansion.M")))
    d = hermite_rank(e)
    tag = cfg.get("rates.tag") or rates.smoothness_tag(cfg.function, d)
    rows = []
    for n in cfg.n_values:
        try:
            bval = rates.bound_value(tag, cfg.model, e, n)
        except RankMismatch:
            bval = float("nan")
        rows.append({"n": n, "bound_value": bval, "seed": cfg.seed, "config_hash": cfg.hash})
    csv_path = cfg.output / "rates.csv"
    write_csv(csv_path, CSV_COLUMNS, rows)
    pred = _prediction(cfg.model, d, tag)
    summary = {
        "experiment": "rates",
        "config_hash": cfg.hash,
        "rank": d,
        "smoothness_tag": tag,
        "prediction": pred,
        "slopes": {"bound_value": _slope([(r["n"], r["bound_value"]) for r in rows])},
        "pass": pred is not None and "error" not in pred,
    }
    sp = cfg.output / "rates_summary.json"
    write_json(sp, summary)
    return RunResult(EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED, csv_path, sp, summary)


def run_expand(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    M = int(cfg.get("expansion.M"))
    e = expand(cfg.function, M, cfg.get("expansion.quad_nodes"))
    rows = [{"m": m, "c_m": float(c), "config_hash": cfg.hash} for m, c in enumerate(e.float_coeffs)]
    csv_path = cfg.output / "expand.csv"
    write_csv(csv_path, ("m", "c_m", "config_hash"), rows)
    (cfg.output / "expansion.json").write_text(e.to_json() + "\n")
    try:
        rank = hermite_rank(e)
    except BMTVError as ex:
        rank = str(ex)
    summary = {
        "experiment": "expand",
        "config_hash": cfg.hash,
        "rank": rank,
        "norm_sq": e.norm_sq,
        "truncation_error": e.truncation_error,
        "pass": True,
    }
    sp = cfg.output / "expand_summary.json"
    write_json(sp, summary)
    return RunResult(EXIT_OK, csv_path, sp, summary)


def run_simulate(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    max_lag = int(cfg.get("simulate.max_lag"))
    rows, flags = [], {"autocovariance": True}
    for n in cfg.n_values:
        b = generate(cfg.model, n, cfg.paths, cfg.seed, threads=threads, chunk=int(cfg.get("mc.chunk")))
        lag = min(max_lag, n - 1)
        est, se = sample_autocovariance(b, lag)
        rho = cfg.model.rho(np.arange(lag + 1))
        for k in range(lag + 1):
            ok = abs(est[k] - rho[k]) <= 4.0 * se[k] if se[k] > 0 else abs(est[k] - rho[k]) < 1e-12
            flags["autocovariance"] &= bool(ok)
            rows.append(
                {"n": n, "lag": k, "estimate": est[k], "se": se[k], "rho": rho[k], "seed": cfg.seed, "config_hash": cfg.hash}
            )
        if cfg.get("simulate.dump"):
            b.dump(cfg.output / f"paths_n{n}.bin")
    csv_path = cfg.output / "simulate.csv"
    write_csv(csv_path, ("n", "lag", "estimate", "se", "rho", "seed", "config_hash"), rows)
    summary = {"experiment": "simulate", "config_hash": cfg.hash, "flags": flags, "pass": all(flags.values())}
    sp = cfg.output / "simulate_summary.json"
    write_json(sp, summary)
    return RunResult(EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED, csv_path, sp, summary)


def run_hurst(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    H = float(cfg.get("hurst.H"))
    p = float(cfg.get("hurst.p"))
    lam = int(cfg.get("hurst.lam"))
    summary: dict = {"experiment": "hurst", "config_hash": cfg.hash}
    ext = cfg.get("hurst.increments_csv")
    if ext:
        fine = hurst.read_increments_csv(ext)
        fine = fine[: fine.size - fine.size % lam]
        res = hurst.estimate_hurst(hurst.block_sums(fine, lam), fine, p, lam)
        summary["external"] = {"h_hat": res.h_hat, "t_ratio": res.t_ratio, "n": res.n}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = hurst.consistency_experiment(H, p, lam, cfg.n_values, cfg.paths, cfg.seed, threads)
    rows = [
        {
            "n": r.n,
            "mean_h": r.mean_h,
            "sd_h": r.sd_h,
            "q50": r.q50,
            "q90": r.q90,
            "mean_stat": r.mean_stat,
            "reps": cfg.paths,
            "seed": cfg.seed,
            "config_hash": cfg.hash,
        }
        for r in table.rows
    ]
    csv_path = cfg.output / "hurst.csv"
    write_csv(csv_path, ("n", "mean_h", "sd_h", "q50", "q90", "mean_stat", "reps", "seed", "config_hash"), rows)
    bias_tol = cfg.tolerances.get("hurst_bias")
    flags = {"q90_decreasing": table.q90_decreasing}
    if bias_tol is not None:
        flags["bias"] = all(abs(r.mean_h - H) <= bias_tol for r in table.rows)
    summary.update(
        {
            "in_theorem": table.in_theorem,
            "notes": table.notes,
            "warnings": [str(w.message) for w in caught],
            "flags": flags,
            "pass": all(flags.values()),
        }
    )
    sp = cfg.output / "hurst_summary.json"
    write_json(sp, summary)
    return RunResult(EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED, csv_path, sp, summary)


def run_check_lemmas(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    tags = cfg.get("lemmas.tags", list(rates.INEQUALITY_TAGS))
    grid = [int(n) for n in cfg.get("lemmas.n_grid")]
    if cfg.flat.get("lemmas.alphas") is not None:
        models = [(f"power_law({a:g})", CovarianceModel.power_law(a)) for a in cfg.flat["lemmas.alphas"]]
    else:
        models = [(json.dumps(cfg.model.to_dict(), sort_keys=True), cfg.model)]
    slope_max = cfg.tolerances.get("lemma_slope_max", 0.02)
    rows, results = [], []
    flags = {"bounded": True, "holder_le_one": True}
    for label, model in models:
        for tag in tags:
            tb = rates.check_sum_inequality(tag, model, cfg.flat.get(f"lemmas.M.{tag}"), grid)
            for n, lhs, rhs, ratio in tb.rows:
                rows.append(
                    {"inequality": tag, "n": n, "lhs": lhs, "rhs": rhs, "ratio": ratio, "model": label, "config_hash": cfg.hash}
                )
            slope = tb.slope
            bounded = slope <= slope_max
            holder = tag not in rates.HOLDER_TAGS or tb.max_ratio <= 1.0 + 1e-12
            flags["bounded"] &= bounded
            flags["holder_le_one"] &= holder
            rec = {"inequality": tag, "model": label, "M": tb.M, "max_ratio": tb.max_ratio, "slope": slope}
            if tb.literal_rows:
                rec["literal_max_ratio"] = max(r[3] for r in tb.literal_rows)
            results.append(rec)
    csv_path = cfg.output / "check-lemmas.csv"
    write_csv(csv_path, ("inequality", "n", "lhs", "rhs", "ratio", "model", "config_hash"), rows)
    summary = {
        "experiment": "check-lemmas",
        "config_hash": cfg.hash,
        "results": results,
        "flags": flags,
        "pass": all(flags.values()),
    }
    sp = cfg.output / "check-lemmas_summary.json"
    write_json(sp, summary)
    return RunResult(EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED, csv_path, sp, summary)


PIPELINES = {
    "verify-clt": run_verify_clt,
    "rates": run_rates,
    "expand": run_expand,
    "simulate": run_simulate,
    "hurst": run_hurst,
    "check-lemmas": run_check_lemmas,
}


def run(config, threads: int = 1) -> RunResult:
    """Validate and execute a config (flat dict or ExperimentConfig)."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_flat(config)
    cfg.output.mkdir(parents=True, exist_ok=True)
    return PIPELINES[cfg.experiment](cfg, threads=threads)
