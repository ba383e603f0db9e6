"""Monte Carlo consistency experiments for bootstrapped plug-in estimators.

For each sample size ``n`` and outer replicate the bootstrap law of
``sqrt(n) (f(F*_n) - f(F_n))`` is compared in bounded Lipschitz distance with
two references: a sample from the Gaussian limit law and a Monte Carlo
sample of the true sampling law of ``sqrt(n) (f(F_n) - f(F))``.

Randomness is split into independent streams keyed by
``(seed, purpose, n, replicate)``, so results do not depend on the order in
which replicates are processed or on the number of worker threads.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

import jsonschema
import numpy as np
from scipy import stats

from qhboot.bootstrap import BootstrapScheme, draw_weights, validate_circular_params
from qhboot.datagen import AR1, GARCH11, IID, DataModel, datamodel_from_dict, model_to_dict, sample, true_cdf
from qhboot.errors import ConfigError, NotApplicable
from qhboot.functionals import (
    IDENTITY,
    Degenerate,
    DistortionFunction,
    Kernel2,
    distortion_value,
    distortion_values_weighted,
    functional_from_dict,
    vfunctional_values_weighted,
)
from qhboot.limits import (
    ar1_longrun_kernel,
    bridge_kernel,
    brownian_bridge_cov,
    derivative_weights,
    limit_variance_distortion,
    longrun_cov_ar1,
    quantile_grid,
    sample_path,
)
from qhboot.metrics import DiscreteMeasure, bl_distance
from qhboot.stepfn import WeightFunction

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "stream",
    "plugin_values",
    "true_value",
    "sampling_law",
    "bootstrap_law",
    "limit_law_sample",
    "run_consistency",
    "run_process_check",
    "run_variance_check",
    "load_schema",
    "CSV_COLUMNS",
]

# stream purposes
DATA, BOOT, SAMPLING, LIMIT, SURROGATE = range(5)

CSV_COLUMNS = ("n", "rep", "d_bl_limit", "d_bl_sampling", "est", "boot_q05", "boot_q50", "boot_q95")


def stream(seed: int, purpose: int, n: int = 0, rep: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), purpose, int(n), int(rep)]))


def load_schema() -> dict:
    text = resources.files("qhboot").joinpath("configs/experiment.schema.json").read_text()
    return json.loads(text)


def _scheme_from_dict(d: dict) -> BootstrapScheme:
    b = d.get("b", math.inf)
    return BootstrapScheme(
        variant=d["type"],
        gamma=d.get("gamma"),
        block_length=d.get("block_length"),
        p=d.get("p"),
        b=math.inf if b == "inf" else float(b),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    model: DataModel
    functional: Union[DistortionFunction, Kernel2]
    scheme: BootstrapScheme = BootstrapScheme("efron")
    n_grid: tuple = (200, 800)
    M: int = 200
    B: int = 500
    lam: float = 0.0
    m: int = 201
    process_m: int = 2001
    N_limit: int = 5000
    K: int = 200
    surrogate_n: int = 200_000
    ceiling: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid or any(b <= a for a, b in zip(grid[:-1], grid[1:])):
            raise ConfigError("n_grid: must be non-empty and strictly increasing")
        if self.M < 1 or self.B < 1:
            raise ConfigError("M, B: must be at least 1")
        if self.scheme.variant == "circular":
            if self.scheme.gamma is not None:
                if self.scheme.p is None:
                    raise ConfigError("scheme.p: circular scheme with gamma needs the declared moment order p")
                try:
                    diag = validate_circular_params(self.scheme.p, self.scheme.b, self.scheme.gamma)
                except ValueError as exc:
                    raise ConfigError(f"scheme.p: {exc}") from None
                if not diag.ok:
                    raise ConfigError("scheme: " + "; ".join(diag.messages))
            for n in grid:
                if not 1 <= self.scheme.ell(n) < n:
                    raise ConfigError(f"scheme: block length {self.scheme.ell(n)} invalid for n={n}")

    @property
    def phi(self) -> WeightFunction:
        return WeightFunction(self.lam)

    @classmethod
    def from_dict(cls, d: dict, seed: Optional[int] = None) -> "ExperimentConfig":
        """Build from a JSON-like dict; unknown keys and schema violations raise ConfigError."""
        errors = sorted(jsonschema.Draft202012Validator(load_schema()).iter_errors(d), key=lambda e: list(e.path))
        if errors:
            lines = [f"{'.'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors]
            raise ConfigError("\n".join(lines))
        if seed is None:
            seed = d.get("seed")
        if seed is None:
            raise ConfigError("seed: required (in the config or via --seed)")
        try:
            model = datamodel_from_dict(d["model"])
            functional = functional_from_dict(d["functional"])
            scheme = _scheme_from_dict(d["scheme"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"config: {exc}") from None
        kw = {k: d[k] for k in ("M", "B", "m", "process_m", "N_limit", "K", "surrogate_n", "ceiling") if k in d}
        return cls(model, functional, scheme, tuple(d["n_grid"]), lam=float(d.get("lambda", 0.0)), seed=int(seed), **kw)

    def to_dict(self) -> dict:
        return {
            "model": model_to_dict(self.model),
            "functional": self.functional.to_dict(),
            "lambda": self.lam,
            "scheme": self.scheme.to_dict(),
            "n_grid": list(self.n_grid),
            "M": self.M,
            "B": self.B,
            "m": self.m,
            "process_m": self.process_m,
            "N_limit": self.N_limit,
            "K": self.K,
            "surrogate_n": self.surrogate_n,
            "ceiling": self.ceiling,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# plug-in values


def plugin_values(functional, x, weights=None) -> np.ndarray:
    """``f`` of the (weighted) empirical law of each sample.

    ``x`` is one sample ``(n,)`` with ``weights`` of shape ``(B, n)``, or a
    batch ``(M, n)`` of samples with unit weights.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(functional, Kernel2):
        if weights is None:
            rows = np.atleast_2d(x)
            return np.array([vfunctional_values_weighted(functional, r, np.ones(r.size)) for r in rows])
        return vfunctional_values_weighted(functional, x, weights)
    if weights is None:
        rows = np.sort(np.atleast_2d(x), axis=1)
        n = rows.shape[1]
        G = functional(np.arange(1, n) / n)
        return np.einsum("bi,i->b", np.diff(rows, axis=1), G) - rows[:, -1]
    order = np.argsort(x, kind="stable")
    W = np.atleast_2d(weights)[:, order]
    return distortion_values_weighted(functional, x[order], W)


_surrogate_cache: dict = {}


def true_value(config: ExperimentConfig) -> float:
    """``f(F)`` for the stationary marginal; a large-sample surrogate for GARCH."""
    F = true_cdf(config.model)
    f = config.functional
    if F is None:
        key = (config.model, config.surrogate_n, config.seed, f.to_dict().__repr__())
        if key not in _surrogate_cache:
            x = sample(config.model, config.surrogate_n, stream(config.seed, SURROGATE))
            _surrogate_cache[key] = float(plugin_values(f, x)[0])
        return _surrogate_cache[key]
    if isinstance(f, Kernel2):
        if f.name != "variance":
            raise NotApplicable("true value available only for the variance kernel")
        return 0.0 if isinstance(F, Degenerate) else float(F.dist.var())
    return distortion_value(f, F)


def sampling_law(config: ExperimentConfig, n: int) -> DiscreteMeasure:
    """``M`` draws of ``sqrt(n) (f(F_n) - f(F))``."""
    x = sample(config.model, n, stream(config.seed, SAMPLING, n), size=config.M)
    draws = math.sqrt(n) * (plugin_values(config.functional, x) - true_value(config))
    return DiscreteMeasure.from_sample(draws)


def _bootstrap_draws(x, config: ExperimentConfig, rng, weights=None):
    n = x.size
    W = draw_weights(config.scheme, n, rng, size=config.B) if weights is None else np.atleast_2d(weights)
    # the unit-weight row rides along so that F*_n = F_n reproduces f(F_n) bit for bit
    vals = plugin_values(config.functional, x, np.vstack((np.ones((1, n)), W)))
    est = float(vals[0])
    return math.sqrt(n) * (vals[1:] - est), est


def bootstrap_law(x, config: ExperimentConfig, rng=None, weights=None) -> DiscreteMeasure:
    """``B`` draws of ``sqrt(n) (f(F*_n) - f(F_n))`` given the sample ``x``.

    ``weights`` (rows of bootstrap weights) replaces the random draw when given.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if weights is None and rng is None:
        raise ValueError("need a random stream or explicit weights")
    draws, _ = _bootstrap_draws(x, config, rng, weights)
    return DiscreteMeasure.from_sample(draws)


@dataclass(frozen=True)
class LimitSample:
    law: DiscreteMeasure
    draws: np.ndarray
    variance: Optional[float]
    jitter: Optional[float]
    truncation_bound: float


_limit_cache: dict = {}


def _limit_process(config: ExperimentConfig, F, grid):
    if isinstance(config.model, IID):
        return brownian_bridge_cov(F, grid), bridge_kernel(F)
    if isinstance(config.model, AR1):
        return longrun_cov_ar1(config.model.rho, grid, config.K), ar1_longrun_kernel(config.model.rho, config.K)
    raise NotApplicable("no closed-form limit covariance for this model; use the sampling law as reference")


def limit_law_sample(config: ExperimentConfig) -> LimitSample:
    """``N_limit`` draws of the derivative applied to grid paths of the limit process."""
    key = (config.model, config.functional.to_dict().__repr__(), config.m, config.N_limit, config.K, config.seed)
    if key in _limit_cache:
        return _limit_cache[key]
    if isinstance(config.functional, Kernel2):
        raise NotApplicable("limit law simulation is implemented for distortion functionals only")
    if isinstance(config.model, GARCH11):
        raise NotApplicable("no closed-form limit covariance for GARCH; use the sampling law as reference")
    F = true_cdf(config.model)
    if isinstance(F, Degenerate):
        draws = np.zeros(config.N_limit)
        out = LimitSample(DiscreteMeasure.from_sample(draws), draws, 0.0, 0.0, 0.0)
        _limit_cache[key] = out
        return out
    grid = quantile_grid(F, config.m)
    gg, kernel = _limit_process(config, F, grid)
    w = derivative_weights(config.functional, F, grid)
    paths = sample_path(gg, stream(config.seed, LIMIT), size=config.N_limit)
    draws = paths @ w
    var = limit_variance_distortion(config.functional, F, kernel)
    out = LimitSample(DiscreteMeasure.from_sample(draws), draws, var, gg.jitter, gg.truncation_bound)
    _limit_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# reports


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


@dataclass
class ExperimentReport:
    config: dict
    rows: list
    aggregates: dict
    verdicts: dict
    diagnostics: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "aggregates": self.aggregates,
            "verdicts": self.verdicts,
            "diagnostics": self.diagnostics,
            "metadata": self.metadata,
        }


def _cell(config: ExperimentConfig, n: int, rep: int, limit_law, samp_law) -> dict:
    row = {"n": n, "rep": rep}
    x = sample(config.model, n, stream(config.seed, DATA, n, rep))
    draws, est = _bootstrap_draws(x, config, stream(config.seed, BOOT, n, rep))
    law = DiscreteMeasure.from_sample(draws)
    row["d_bl_limit"] = bl_distance(law, limit_law) if limit_law is not None else math.nan
    row["d_bl_sampling"] = bl_distance(law, samp_law)
    row["est"] = est
    q05, q50, q95 = np.quantile(draws, [0.05, 0.5, 0.95])
    row.update(boot_q05=float(q05), boot_q50=float(q50), boot_q95=float(q95))
    return row


def _safe_cell(config, n, rep, limit_law, samp_law):
    try:
        return _cell(config, n, rep, limit_law, samp_law), None
    except Exception as exc:  # recorded per cell, the run continues
        row = {"n": n, "rep": rep, **{c: math.nan for c in CSV_COLUMNS[2:]}}
        return row, f"n={n} rep={rep}: {type(exc).__name__}: {exc}"


def _summary(values) -> dict:
    v = np.asarray([x for x in values if not math.isnan(x)])
    if v.size == 0:
        return {"median": math.nan, "iqr": math.nan, "count": 0}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"median": float(med), "iqr": float(q3 - q1), "count": int(v.size)}


def run_consistency(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Bootstrap-law distances to the limit and sampling laws for each ``n``.

    Verdicts: the median distance to the limit law (to the sampling law when
    no limit law is available) is non-increasing along ``n_grid``, and,
    if ``ceiling`` is set, below it at the largest ``n``.
    """
    t0 = time.perf_counter()
    diagnostics = []
    meta = {"threads": int(threads)}
    try:
        lim = limit_law_sample(config)
        limit_law = lim.law
        meta.update(limit_variance=lim.variance, limit_jitter=lim.jitter, truncation_bound=lim.truncation_bound)
    except NotApplicable as exc:
        limit_law = None
        diagnostics.append(f"limit law unavailable: {exc}")
    rows = []
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for n in config.n_grid:
            try:
                samp = sampling_law(config, n)
            except Exception as exc:
                diagnostics.append(f"n={n}: sampling law failed: {type(exc).__name__}: {exc}")
                samp = None
            if samp is None:
                rows.extend({"n": n, "rep": r, **{c: math.nan for c in CSV_COLUMNS[2:]}} for r in range(config.M))
                continue
            for row, diag in pool.map(lambda r: _safe_cell(config, n, r, limit_law, samp), range(config.M)):
                rows.append(row)
                if diag:
                    diagnostics.append(diag)
    aggregates = {}
    for n in config.n_grid:
        cell = [r for r in rows if r["n"] == n]
        aggregates[str(n)] = {
            "d_bl_limit": _summary(r["d_bl_limit"] for r in cell),
            "d_bl_sampling": _summary(r["d_bl_sampling"] for r in cell),
        }
    key = "d_bl_limit" if limit_law is not None else "d_bl_sampling"
    meds = [aggregates[str(n)][key]["median"] for n in config.n_grid]
    verdicts = {"median_non_increasing": bool(all(b <= a for a, b in zip(meds[:-1], meds[1:])) and not any(map(math.isnan, meds)))}
    if config.ceiling is not None:
        verdicts["below_ceiling"] = bool(meds[-1] < config.ceiling)
    meta.update(reference=key, runtime_s=time.perf_counter() - t0)
    return ExperimentReport(config.to_dict(), rows, aggregates, verdicts, diagnostics, meta)


# ---------------------------------------------------------------------------
# process-level check


def _ks_stat_vs_model(x, F, phi: WeightFunction) -> float:
    """``||F_n - F||_phi``: exact for ``lam = 0``, endpoint-weighted otherwise."""
    xs = np.sort(x)
    n = xs.size
    Fx = F.cdf(xs)
    ph = phi(xs)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(n) / n
    return float(np.max(np.maximum(np.abs(hi - Fx), np.abs(lo - Fx)) * ph))


def _ks_stat_boot(x, W, phi: WeightFunction) -> np.ndarray:
    """``||F*_n - F_n||_phi`` for each weight row (both step functions on ``x``)."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.size
    diff = np.abs(np.cumsum(W[:, order] - 1.0, axis=1)) / n
    ph = phi(xs)
    right = np.concatenate((ph[1:], [math.inf if phi.lam > 0 else 1.0]))
    scale = np.maximum(ph, right)
    with np.errstate(invalid="ignore"):
        vals = diff * scale
    vals = np.where(diff == 0.0, 0.0, vals)
    return vals.max(axis=1)


def run_process_check(config: ExperimentConfig, threads: int = 1, boot_reps: int = 20) -> dict:
    """Weighted-KS statistics of the empirical, bootstrap and limit processes.

    For each ``n``: ``M`` draws of ``||sqrt(n)(F_n - F)||_phi``, bootstrap
    draws of ``||sqrt(n)(F*_n - F_n)||_phi`` for the first ``boot_reps``
    outer samples, and ``N_limit`` draws of ``||xi||_phi`` on a quantile grid
    of ``process_m`` points.  Reports pairwise two-sample KS distances.
    """
    F = true_cdf(config.model)
    if F is None:
        raise NotApplicable("process check needs a closed-form marginal")
    phi = config.phi
    degenerate = isinstance(F, Degenerate)
    if degenerate:
        lim = np.zeros(config.N_limit)
    else:
        grid = quantile_grid(F, config.process_m)
        gg, _ = _limit_process(config, F, grid)
        paths = sample_path(gg, stream(config.seed, LIMIT, 0, 1), size=config.N_limit)
        lim = np.max(np.abs(paths) * phi(grid), axis=1)
    out = {"config": config.to_dict(), "limit_stats": lim, "per_n": {}}

    def emp(n, rep):
        x = sample(config.model, n, stream(config.seed, DATA, n, rep))
        return 0.0 if degenerate else math.sqrt(n) * _ks_stat_vs_model(x, F, phi)

    def boot(n, rep):
        x = sample(config.model, n, stream(config.seed, DATA, n, rep))
        W = draw_weights(config.scheme, n, stream(config.seed, BOOT, n, rep), size=config.B)
        return math.sqrt(n) * _ks_stat_boot(x, np.asarray(W, dtype=float), phi)

    ks_dist = []
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for n in config.n_grid:
            emp_stats = np.array(list(pool.map(lambda r: emp(n, r), range(config.M))))
            boot_stats = list(pool.map(lambda r: boot(n, r), range(min(boot_reps, config.M))))
            d_emp_lim = _ks2(emp_stats, lim)
            d_boot_lim = float(np.median([_ks2(b, lim) for b in boot_stats]))
            d_boot_emp = float(np.median([_ks2(b, emp_stats) for b in boot_stats]))
            out["per_n"][n] = {
                "emp_stats": emp_stats,
                "ks_emp_limit": d_emp_lim,
                "ks_boot_limit_median": d_boot_lim,
                "ks_boot_emp_median": d_boot_emp,
            }
            ks_dist.append(d_emp_lim)
    out["verdict_decreasing"] = bool(all(b <= a for a, b in zip(ks_dist[:-1], ks_dist[1:])))
    return out


def _ks2(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if np.ptp(np.concatenate((a, b))) == 0.0:
        return 0.0
    return float(stats.ks_2samp(a, b).statistic)


def process_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n", "rep", "stat"))
    for n, cell in report["per_n"].items():
        for r, v in enumerate(cell["emp_stats"]):
            w.writerow((n, r, _fmt(v)))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# bootstrap variance


def run_variance_check(config: ExperimentConfig, n: Optional[int] = None) -> dict:
    """Variance of the bootstrap law for one sample against the limit variance."""
    n = config.n_grid[-1] if n is None else n
    x = sample(config.model, n, stream(config.seed, DATA, n, 0))
    draws, est = _bootstrap_draws(x, config, stream(config.seed, BOOT, n, 0))
    F = true_cdf(config.model)
    target = None
    if F is not None and isinstance(config.functional, DistortionFunction):
        _, kernel = _limit_process(config, F, np.array([0.0]))
        target = limit_variance_distortion(config.functional, F, kernel)
    var = float(np.var(draws, ddof=1))
    return {"n": n, "est": est, "boot_variance": var, "limit_variance": target, "draws": draws}
