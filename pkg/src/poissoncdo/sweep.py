"""Parameter sweeps over the altered measure, gain maps and the timing model.

A sweep runs the importance-sampled engine at many altered parameter pairs
``(rho', 1/lambda')`` for a fixed real model and compares the variance of the
weighted default leg with the unweighted one. Two gains are reported:

* ``G_num = sigma^2 / sigma'^2``, the factor by which fewer paths suffice;
* ``G_time``, which also charges for the extra jumps an intensified altered
  process produces, using a linear cost model ``t = c + b rho'``.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from . import __version__
from .model import BP, DomainError, ModelParams
from .montecarlo import SimConfig, run_simulation
from .reweighting import MeasurePair, phase_boundary, sample_variance_sd, variance_report
from .stats import Moments


class UnfittedTimingError(RuntimeError):
    """A time gain was requested without a fitted cost model."""


class DegenerateDesignError(ValueError):
    """Too few distinct intensities to fit the timing line."""


@dataclass(frozen=True)
class TimingModel:
    """Linear CPU cost ``t = c + b rho'`` of a fixed-size run.

    ``c`` is the per-path overhead and ``b`` the marginal cost per unit of
    intensity (both in seconds for the ``n_paths`` used when measuring).
    """

    c: float
    b: float
    r2: float = 1.0
    samples: tuple = ()

    def cost(self, rho) -> float:
        return self.c + self.b * rho


def gain_num(sigma2_base: float, sigma2_alt: float) -> float:
    """Path-count gain ``sigma^2 / sigma'^2``; 0 when the altered variance is infinite."""
    if sigma2_base < 0 or sigma2_alt < 0:
        raise DomainError("variances must be nonnegative")
    if sigma2_alt == 0:
        raise ZeroDivisionError("altered variance is zero")
    if math.isinf(sigma2_alt):
        return 0.0
    return sigma2_base / sigma2_alt


def gain_time(sigma2_base: float, sigma2_alt: float, tm: TimingModel | None,
              rho_base: float, rho_alt: float) -> float:
    """CPU-time gain: the path gain times the per-path cost ratio ``cost(rho) / cost(rho')``."""
    if tm is None:
        raise UnfittedTimingError("gain_time needs a fitted TimingModel")
    if rho_base <= 0 or rho_alt <= 0:
        raise DomainError("intensities must be positive")
    return gain_num(sigma2_base, sigma2_alt) * tm.cost(rho_base) / tm.cost(rho_alt)


def fit_timing(samples) -> TimingModel:
    """Least-squares line through ``(rho', seconds)`` samples, with ``c, b >= 0``.

    Needs at least three distinct intensities so that the residual, and hence
    ``R^2``, says something about linearity.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, 2)
    x, t = pts[:, 0], pts[:, 1]
    if len(np.unique(x)) < 3:
        raise DegenerateDesignError("timing fit needs at least three distinct rho' values")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, t, rcond=None)
    if np.any(coef < 0):
        coef, _ = optimize.nnls(design, t)
    c, b = (float(v) for v in coef)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    ss_res = float(np.sum((t - design @ coef) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return TimingModel(c, b, r2, tuple(map(tuple, pts.tolist())))


def measure_timing(cfg: SimConfig, rho_values, n_paths: int = 1_000_000,
                   repeats: int = 3) -> list[tuple[float, float]]:
    """CPU seconds of single-threaded runs at each altered intensity.

    The whole sweep is repeated ``repeats`` times and the fastest run of each
    point is kept, which filters out interference from other processes.
    """
    if repeats < 1:
        raise DomainError("repeats must be at least 1")
    base = replace(cfg, n_paths=n_paths, threads=1)
    best = {float(r): math.inf for r in rho_values}
    for _ in range(repeats):
        for r in best:
            altered = ModelParams(r, base.altered.lam)
            t0 = time.process_time()
            run_simulation(base.with_altered(altered))
            best[r] = min(best[r], time.process_time() - t0)
    return sorted(best.items())


def jackknife_variance_se(chunks) -> float | np.ndarray:
    """Delete-one-group jackknife standard error of the pooled sample variance."""
    g = len(chunks)
    if g < 2:
        return np.full_like(np.asarray(chunks[0].mean, dtype=float), np.nan) if g else np.nan
    loo = []
    for i in range(g):
        acc = Moments.empty(np.shape(chunks[0].mean))
        for j, m in enumerate(chunks):
            if j != i:
                acc = acc.merge(m)
        loo.append(acc.variance)
    loo = np.array(loo)
    return np.sqrt((g - 1) / g * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


@dataclass
class Curve:
    """One-dimensional sweep: statistics per swept value, tranches along the last axis."""

    axis: str
    values: np.ndarray
    rho_alt: np.ndarray
    mu_alt: np.ndarray
    def_mean: np.ndarray
    def_sd: np.ndarray
    def_se: np.ndarray
    prem_mean: np.ndarray
    prem_sd: np.ndarray
    prem_se: np.ndarray
    analytic_def_sd: np.ndarray
    divergent: np.ndarray
    config: SimConfig


AXES = ("mu_alt", "rho_alt")


def _cell_config(cfg: SimConfig, rho_alt: float, mu_alt: float) -> SimConfig:
    return cfg.with_altered(ModelParams.from_mu(rho_alt, mu_alt))


def _analytic_sd(cfg: SimConfig, mp: MeasurePair) -> np.ndarray:
    # The series gives the variance of the undiscounted terminal tranche loss,
    # which is the default leg only when r = 0.
    if cfg.contract.rate != 0:
        return np.full(len(cfg.tranches), np.nan)
    out = []
    for tr in cfg.tranches:
        rep = variance_report(tr, cfg.contract.maturity, mp)
        out.append(math.sqrt(rep.variance_altered) if rep.finite else math.inf)
    return np.array(out)


def sweep_1d(axis: str, values, cfg: SimConfig) -> Curve:
    """Vary one altered parameter, holding the other at its real value.

    ``axis="mu_alt"`` sweeps the mean jump size ``1/lambda'`` and
    ``axis="rho_alt"`` the intensity ``rho'``.
    """
    if axis not in AXES:
        raise DomainError(f"axis must be one of {AXES}, got {axis!r}")
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or len(vals) == 0 or np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise DomainError("sweep values must be a nonempty list of positive numbers")
    real = cfg.real
    rho = vals if axis == "rho_alt" else np.full_like(vals, real.rho)
    mu = vals if axis == "mu_alt" else np.full_like(vals, real.mu)
    rows = []
    for r, m in zip(rho, mu):
        c = _cell_config(cfg, r, m)
        res = run_simulation(c)
        rows.append((res.default.mean, res.default.sd, res.default.se,
                     res.premium.mean, res.premium.sd, res.premium.se,
                     _analytic_sd(c, c.measures), not phase_boundary(c.measures).finite))
    cols = list(zip(*rows))
    return Curve(axis, vals, rho, mu, *(np.array(col) for col in cols[:7]),
                 np.array(cols[7], dtype=bool), cfg)


@dataclass
class Optimum:
    """Location and value of the best gain for one tranche (``None`` fields if no valid cell)."""

    tranche: int
    g_num: float | None
    num_rho: float | None
    num_mu: float | None
    g_time: float | None
    time_rho: float | None
    time_mu: float | None


@dataclass
class SweepGrid:
    """Two-dimensional map over ``rho_values x mu_values``; per-cell arrays are ``(n_rho, n_mu, T)``."""

    rho_values: np.ndarray
    mu_values: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    se: np.ndarray
    variance_se: np.ndarray
    g_num: np.ndarray
    g_time: np.ndarray
    divergent: np.ndarray
    base_mean: np.ndarray
    base_variance: np.ndarray
    config: SimConfig
    timing: TimingModel | None = None
    # cells whose run raised, as (i, j, message); their statistics are NaN
    failed: tuple = ()

    @property
    def rho_ratios(self) -> np.ndarray:
        return self.rho_values / self.config.real.rho

    @property
    def mu_ratios(self) -> np.ndarray:
        """``mu' / mu``, which equals ``lambda / lambda'``."""
        return self.mu_values / self.config.real.mu

    def optimum(self, tranche: int) -> Optimum:
        ok = ~self.divergent & np.isfinite(self.variance[..., tranche])
        found = []
        for g in (self.g_num[..., tranche], self.g_time[..., tranche]):
            masked = np.where(ok & np.isfinite(g), g, -np.inf)
            if not np.isfinite(masked).any():
                found += [None, None, None]
                continue
            i, j = np.unravel_index(int(np.argmax(masked)), masked.shape)
            found += [float(g[i, j]), float(self.rho_values[i]), float(self.mu_values[j])]
        return Optimum(tranche, *found)

    def optima(self) -> list[Optimum]:
        return [self.optimum(t) for t in range(len(self.config.tranches))]


def ratio_grid(n: int = 10, step: float = 1.0, start: float = 1.0) -> np.ndarray:
    """Ratios ``start, start + step, ...`` (``n`` of them)."""
    return start + step * np.arange(n)


def sweep_2d(cfg: SimConfig, rho_values=None, mu_values=None,
             timing: TimingModel | None = None, workers: int = 1,
             jackknife_groups: int = 10) -> SweepGrid:
    """Gain map over altered intensities and mean jump sizes.

    Defaults to the 10 x 10 grid of ratios 1..10 times the real ``rho`` and
    ``mu``. Every cell uses the seed of ``cfg`` and the baseline is the
    unweighted run with that same seed, so an unaltered cell has gain exactly
    one. Cells past the phase boundary are simulated and flagged; they never
    count as optima. ``G_time`` is filled only when ``timing`` is given.
    """
    real = cfg.real
    rho_values = real.rho * ratio_grid() if rho_values is None else np.asarray(rho_values, float)
    mu_values = real.mu * ratio_grid() if mu_values is None else np.asarray(mu_values, float)
    if np.any(rho_values <= 0) or np.any(mu_values <= 0):
        raise DomainError("grid values must be positive")
    T = len(cfg.tranches)
    chunk = max(1, -(-cfg.n_paths // jackknife_groups))
    base_cfg = replace(cfg, altered=real, chunk_size=chunk, threads=1)
    cells = [(i, j) for i in range(len(rho_values)) for j in range(len(mu_values))]

    def run(cell):
        i, j = cell
        c = _cell_config(base_cfg, rho_values[i], mu_values[j])
        if c.measures.is_identity:
            c = base_cfg
        divergent = not phase_boundary(c.measures).finite
        try:
            res = run_simulation(c)
        except (ArithmeticError, MemoryError, ValueError) as exc:
            nan = np.full(T, np.nan)
            return nan, nan, nan, nan, divergent, f"{type(exc).__name__}: {exc}"
        return res.default.mean, res.default.variance, res.default.se, \
            jackknife_variance_se(res.chunk_default), divergent, None

    base = run_simulation(base_cfg)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(run, cells))
    else:
        out = [run(c) for c in cells]

    shape = (len(rho_values), len(mu_values))
    mean = np.zeros(shape + (T,))
    var = np.zeros_like(mean)
    se = np.zeros_like(mean)
    var_se = np.zeros_like(mean)
    divergent = np.zeros(shape, dtype=bool)
    failed = []
    for (i, j), (m, v, s, vs, dv, err) in zip(cells, out):
        mean[i, j], var[i, j], se[i, j], var_se[i, j], divergent[i, j] = m, v, s, vs, dv
        if err is not None:
            failed.append((i, j, err))

    g_num = np.full_like(mean, np.nan)
    g_time = np.full_like(mean, np.nan)
    for (i, j) in cells:
        for t in range(T):
            if var[i, j, t] > 0:
                g_num[i, j, t] = gain_num(base.default.variance[t], var[i, j, t])
                if timing is not None:
                    g_time[i, j, t] = gain_time(base.default.variance[t], var[i, j, t], timing,
                                                real.rho, rho_values[i])
    return SweepGrid(rho_values, mu_values, mean, var, se, var_se, g_num, g_time, divergent,
                     base.default.mean, base.default.variance, cfg, timing, tuple(failed))


def analytic_variance_map(grid: SweepGrid) -> tuple[np.ndarray, np.ndarray]:
    """Exact variance of the weighted default leg on every cell (``r = 0`` only).

    Also returns the exact standard deviation of the sample variance at the
    grid's path count, which, unlike a resampling estimate, stays honest in
    cells where rare heavily weighted paths dominate.
    """
    cfg = grid.config
    if cfg.contract.rate != 0:
        raise DomainError("the analytic variance covers the undiscounted default leg only")
    var = np.zeros_like(grid.variance)
    sd = np.zeros_like(grid.variance)
    M = cfg.contract.maturity
    for i, r in enumerate(grid.rho_values):
        for j, m in enumerate(grid.mu_values):
            mp = MeasurePair(cfg.real, ModelParams.from_mu(r, m))
            for t, tr in enumerate(cfg.tranches):
                var[i, j, t] = variance_report(tr, M, mp).variance_altered
                sd[i, j, t] = sample_variance_sd(tr, M, mp, cfg.n_paths)
    return var, sd


# ---------------------------------------------------------------- writers

def provenance(cfg: SimConfig, **extra) -> list[str]:
    """Header lines identifying a randomized output."""
    lines = [f"engine poissoncdo {__version__}", f"seed {cfg.seed}", f"n_paths {cfg.n_paths}",
             f"real rho={cfg.real.rho:g} mu={cfg.real.mu:g}",
             f"contract M={cfg.contract.maturity:g} r={cfg.contract.rate:g} "
             f"periods_per_year={cfg.contract.periods_per_year}"]
    lines += [f"{k} {v}" for k, v in extra.items()]
    return lines


def _delimiter(fmt: str) -> str:
    if fmt not in ("csv", "tsv"):
        raise DomainError(f"format must be csv or tsv, got {fmt!r}")
    return "," if fmt == "csv" else "\t"


def write_table(path, header: list[str], rows, notes: list[str], fmt: str):
    with open(path, "w", newline="") as fh:
        for line in notes:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, delimiter=_delimiter(fmt), lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    return f"{float(v):.10g}"


def write_curve(path, curve: Curve, tranche: int, fmt: str = "tsv"):
    """One tranche's 1-D sweep; default-leg columns in bp, premium per unit spread."""
    tr = curve.config.tranches[tranche]
    header = ["value", "rho_alt", "mu_alt", "def_mean_bp", "def_sd_bp", "def_se_bp",
              "def_sd_analytic_bp", "prem_mean", "prem_sd", "prem_se", "divergent"]
    rows = [(curve.values[k], curve.rho_alt[k], curve.mu_alt[k],
             curve.def_mean[k, tranche] * BP, curve.def_sd[k, tranche] * BP,
             curve.def_se[k, tranche] * BP, curve.analytic_def_sd[k, tranche] * BP,
             curve.prem_mean[k, tranche], curve.prem_sd[k, tranche],
             curve.prem_se[k, tranche], curve.divergent[k])
            for k in range(len(curve.values))]
    notes = provenance(curve.config, axis=curve.axis, tranche=tr.label)
    write_table(path, header, rows, notes, fmt)


MAP_QUANTITIES = ("g_num", "g_time", "variance", "mean", "neg_log2_g_num")


def map_values(grid: SweepGrid, quantity: str, tranche: int) -> np.ndarray:
    if quantity not in MAP_QUANTITIES:
        raise DomainError(f"quantity must be one of {MAP_QUANTITIES}")
    if quantity == "neg_log2_g_num":
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.log2(grid.g_num[..., tranche])
    return getattr(grid, quantity)[..., tranche]


def write_map(path, grid: SweepGrid, quantity: str, tranche: int, fmt: str = "tsv"):
    """Matrix file: first row holds ``lambda/lambda'`` ratios, first column ``rho'/rho``."""
    vals = map_values(grid, quantity, tranche)
    header = ["rho_ratio\\mu_ratio"] + [_fmt(v) for v in grid.mu_ratios]
    rows = [[grid.rho_ratios[i]] + list(vals[i]) for i in range(len(grid.rho_values))]
    notes = provenance(grid.config, quantity=quantity,
                       tranche=grid.config.tranches[tranche].label,
                       divergent_cells=int(grid.divergent.sum()), failed_cells=len(grid.failed))
    if grid.timing is not None:
        notes.append(f"timing c={grid.timing.c:.6g} b={grid.timing.b:.6g} r2={grid.timing.r2:.6g}")
    write_table(path, header, rows, notes, fmt)


OPTIMA_HEADER = ["a", "d", "def_mean_bp", "def_sd_bp", "num_rho_alt", "num_mu_alt", "g_num",
                 "time_rho_alt", "time_mu_alt", "g_time"]


def optima_rows(grid: SweepGrid) -> list[list]:
    rows = []
    for opt in grid.optima():
        tr = grid.config.tranches[opt.tranche]
        rows.append([tr.a, tr.d, grid.base_mean[opt.tranche] * BP,
                     math.sqrt(grid.base_variance[opt.tranche]) * BP,
                     opt.num_rho, opt.num_mu, opt.g_num, opt.time_rho, opt.time_mu, opt.g_time])
    return rows


def write_optima(path, grid: SweepGrid, fmt: str = "csv"):
    """Per-tranche optimum table: unweighted mean and sd, then the best cell for each gain."""
    rows = [["" if v is None else v for v in row] for row in optima_rows(grid)]
    write_table(path, OPTIMA_HEADER, rows, provenance(grid.config), fmt)


def write_timing(path, tm: TimingModel, cfg: SimConfig, fmt: str = "tsv"):
    notes = provenance(cfg, fit=f"c={tm.c:.6g} b={tm.b:.6g} r2={tm.r2:.6g}")
    write_table(path, ["rho_alt", "cpu_seconds"], tm.samples, notes, fmt)
