"""Path simulation of the compound Poisson loss under an altered measure.

Paths are grouped in blocks of :data:`BLOCK`, split into sub-blocks sized
so that one holds roughly :data:`SUB_JUMPS` jumps. Each sub-block draws from
its own Philox stream keyed by ``(seed, block, sub-block)``, so path ``i`` is
the same whatever the run length or chunking, and chunks only decide how
the statistics are merged.

Valuation is driven by jumps rather than by the payment grid. Between two
jumps the tranche loss is constant, so each jump contributes its post-jump
tranche loss times the change in discount (default leg) or remaining
annuity (premium leg) between its grid date and the next jump's. Paths
without jumps all share one value and are folded into the statistics in
closed form.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .model import BP, Contract, DomainError, LossSpec, ModelParams, loss_from_default
from .reweighting import MeasurePair, phase_boundary
from .stats import Moments

BLOCK = 1 << 14
SUB_JUMPS = 1 << 15


@dataclass(frozen=True)
class Path:
    """One scenario: jump times in ``(0, M]``, jump sizes and its weight ``dP/dP'``."""

    jump_times: np.ndarray
    jump_sizes: np.ndarray
    rn_weight: float = 1.0

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    @property
    def d_total(self) -> float:
        return float(np.cumsum(self.jump_sizes)[-1]) if self.n_jumps else 0.0


@dataclass(frozen=True)
class SimConfig:
    real: ModelParams
    altered: ModelParams
    contract: Contract = Contract()
    tranches: tuple = ()
    n_paths: int = 100_000
    seed: int = 0
    chunk_size: int = 1 << 16
    loss_spec: LossSpec = LossSpec.EXPONENTIAL
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be at least 1")
        if self.threads < 1:
            raise DomainError("threads must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "tranches", tuple(self.tranches))

    @property
    def measures(self) -> MeasurePair:
        return MeasurePair(self.real, self.altered)

    def with_altered(self, altered: ModelParams, **kw) -> "SimConfig":
        return _replace(self, altered=altered, **kw)


def _replace(cfg, **kw):
    from dataclasses import replace
    return replace(cfg, **kw)


@dataclass(frozen=True)
class LossSurface:
    """Probability of the loss lying in each bin at each payment date.

    Rows are the grid dates ``t_1 .. t_k``, columns equal-width loss bins on
    ``(0, 1]``. The ``L = 0`` state is not included, so rows sum to
    ``P(L_t > 0)``.
    """

    times: np.ndarray
    loss_edges: np.ndarray
    prob: np.ndarray


@dataclass
class SimResult:
    """Moments of the weighted legs ``R X`` (columns are tranches), of ``R`` and of ``N``."""

    config: SimConfig
    default: Moments
    premium: Moments
    weights: Moments
    jumps: Moments
    surface: LossSurface | None = None
    per_path: dict | None = None
    cpu_seconds: float = 0.0
    # default-leg moments of each chunk, in path order (for resampling error bars)
    chunk_default: tuple = ()

    def tranche_row(self, i: int) -> dict:
        d, p = self.default, self.premium
        return {
            "a": self.config.tranches[i].a, "d": self.config.tranches[i].d,
            "def_mean": float(d.mean[i]), "def_sd": float(d.sd[i]), "def_se": float(d.se[i]),
            "prem_mean": float(p.mean[i]), "prem_sd": float(p.sd[i]), "prem_se": float(p.se[i]),
        }


def block_rng(seed: int, block: int, sub: int | None = None) -> np.random.Generator:
    """Independent counter-based stream for one block, or one sub-block of it."""
    key = [seed & 0xFFFFFFFF, seed >> 32, block]
    if sub is not None:
        key.append(sub + 1)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def generate_path(rng: np.random.Generator, altered: ModelParams, M: float,
                  real: ModelParams | None = None) -> Path:
    """Simulate one path jump by jump, accumulating its weight as it goes.

    Each jump multiplies the weight by the ratio of the real to the altered
    densities of its waiting time and size; after the last jump the ratio of
    the no-further-event probabilities is applied.
    """
    real = real or altered
    rho, lam, rho_a, lam_a = real.rho, real.lam, altered.rho, altered.lam
    times, sizes = [], []
    w = 1.0
    t = 0.0
    while True:
        gap = rng.exponential(1.0 / rho_a)
        if t + gap > M:
            break
        t += gap
        size = rng.exponential(1.0 / lam_a)
        times.append(t)
        sizes.append(size)
        w *= (rho * math.exp(-rho * gap)) / (rho_a * math.exp(-rho_a * gap))
        w *= (lam * math.exp(-lam * size)) / (lam_a * math.exp(-lam_a * size))
    w *= math.exp(-(rho - rho_a) * (M - t))
    return Path(np.array(times), np.array(sizes), w)


def value_path(p: Path, tranches, contract: Contract,
               loss_spec: LossSpec = LossSpec.EXPONENTIAL) -> tuple[np.ndarray, np.ndarray]:
    """Default and premium leg of one path on the payment grid, per tranche.

    Straightforward evaluation of the grid sums; the simulation engine uses
    an equivalent jump-driven form.
    """
    grid = contract.grid()
    disc = contract.discount_factors()
    csum = np.cumsum(p.jump_sizes)
    # jumps at or before each grid date
    seen = np.searchsorted(p.jump_times, grid, side="right")
    D = np.where(seen > 0, csum[np.maximum(seen - 1, 0)] if len(csum) else 0.0, 0.0)
    L = loss_from_default(D, loss_spec)
    xdef, xprem = [], []
    for tr in tranches:
        ell = np.minimum(L, tr.d) - np.minimum(L, tr.a)
        xdef.append(float(np.sum(disc[1:] * np.diff(ell))))
        xprem.append(float(np.sum(disc[1:] * (tr.width - ell[1:])) * contract.dt))
    return np.array(xdef), np.array(xprem)


@dataclass
class _Jumps:
    """Jumps of a run of consecutive paths, flattened in path order."""

    counts: np.ndarray
    times: np.ndarray
    sizes: np.ndarray
    # cumulative default level just after each jump, and at the end of each path
    d_after: np.ndarray
    d_total: np.ndarray

    def select(self, lo: int, hi: int) -> "_Jumps":
        """Paths ``lo .. hi - 1`` of this run."""
        if lo == 0 and hi == len(self.counts):
            return self
        counts = self.counts[:hi]
        j0 = int(counts[:lo].sum())
        j1 = j0 + int(counts[lo:].sum())
        h0 = int(np.count_nonzero(counts[:lo]))
        h1 = h0 + int(np.count_nonzero(counts[lo:]))
        return _Jumps(self.counts[lo:hi], self.times[j0:j1], self.sizes[j0:j1],
                      self.d_after[j0:j1], self.d_total[h0:h1])

    @property
    def hit(self) -> np.ndarray:
        return self.counts[self.counts > 0]


def _segment_starts(lengths: np.ndarray) -> np.ndarray:
    starts = np.zeros(len(lengths), dtype=np.intp)
    np.cumsum(lengths[:-1], out=starts[1:])
    return starts


def _sub_block(mean: float) -> int:
    """Paths per sub-block, sized so a sub-block holds about 2^15 jumps or fewer."""
    size = BLOCK
    while size > 1 and size * (mean + 1) > SUB_JUMPS:
        size //= 2
    return size


def _draw_sub(seed: int, block: int, sub: int, n: int, altered: ModelParams, M: float) -> _Jumps:
    """Jumps of ``n`` consecutive paths, drawn as one Poisson process.

    The paths are laid end to end on ``[0, n M)`` and a single process of
    rate ``rho'`` is run over it by accumulating exponential gaps; path ``i``
    owns the events in ``[i M, (i + 1) M)``. Restrictions of a Poisson process
    to disjoint intervals are independent, so this is exact, and the work is
    proportional to the number of jumps rather than to the number of paths.
    """
    rng = block_rng(seed, block, sub)
    # event clock in units of 1 / rho'
    mean = altered.rho * n * M
    clock = np.cumsum(rng.standard_exponential(int(mean + 6 * math.sqrt(mean) + 16)))
    while clock[-1] < mean:
        more = rng.standard_exponential(max(int(mean // 8), 16))
        clock = np.concatenate([clock, clock[-1] + np.cumsum(more)])
    clock = clock[:np.searchsorted(clock, mean)] / altered.rho
    owner = np.minimum((clock / M).astype(np.intp), n - 1)
    counts = np.bincount(owner, minlength=n)
    times = clock - owner * M
    sizes = rng.standard_exponential(len(times)) / altered.lam

    hit = counts[counts > 0]
    if len(hit) == 0:
        empty = np.empty(0)
        return _Jumps(counts, times, sizes, empty, empty)
    starts = _segment_starts(hit)
    cd = np.cumsum(sizes)
    d_after = cd - np.repeat(np.concatenate([[0.0], cd])[starts], hit)
    # summed path by path so the weights do not inherit the running-sum rounding
    d_total = np.add.reduceat(sizes, starts)
    return _Jumps(counts, times, sizes, d_after, d_total)


def _stream(seed: int, altered: ModelParams, M: float, start: int, stop: int):
    """Yield the jumps of paths ``start .. stop - 1`` in sub-block pieces."""
    sub = _sub_block(altered.rho * M)
    for block in range(start // BLOCK, (stop - 1) // BLOCK + 1):
        lo = max(start - block * BLOCK, 0)
        hi = min(stop - block * BLOCK, BLOCK)
        for s in range(lo // sub, (hi - 1) // sub + 1):
            jumps = _draw_sub(seed, block, s, sub, altered, M)
            yield jumps.select(max(lo - s * sub, 0), min(hi - s * sub, sub))


class _Valuer:
    """Per-configuration constants for jump-driven valuation."""

    def __init__(self, cfg: SimConfig):
        c = cfg.contract
        self.cfg = cfg
        self.M = c.maturity
        self.k_max = c.n_periods
        disc = c.discount_factors()
        # index k_max + 1 means "after maturity"
        self.disc = np.append(disc, 0.0)
        tail = np.append(np.cumsum((disc[1:] * c.dt)[::-1])[::-1], 0.0)
        self.annuity_from = np.concatenate([[tail[0]], tail])
        self.a = np.array([t.a for t in cfg.tranches])[:, None]
        self.d = np.array([t.d for t in cfg.tranches])[:, None]
        self.width = (self.d - self.a)[:, 0]
        mp = cfg.measures
        self.log_jump = mp.log_jump_factor
        self.log_w0 = -(cfg.real.rho - cfg.altered.rho) * self.M
        self.w0 = math.exp(self.log_w0)
        self.dlam = cfg.real.lam - cfg.altered.lam
        self.x0_prem = self.width * self.annuity_from[1]

    def value(self, hit, times, d_after, d_total, surface_bins=None):
        """Values of the paths with at least one jump, tranches along axis 0.

        Returns ``(w, xdef, xprem, surface)``; the legs have shape ``(T, len(hit))``.
        """
        T = len(self.width)
        n_hit = len(hit)
        if n_hit == 0:
            return np.empty(0), np.empty((T, 0)), np.empty((T, 0)), None
        k = np.ceil(times * (self.k_max / self.M)).astype(np.intp)
        np.clip(k, 1, self.k_max, out=k)
        starts = _segment_starts(hit)
        k_next = np.empty_like(k)
        k_next[:-1] = k[1:]
        k_next[starts[1:] - 1] = self.k_max + 1
        k_next[-1] = self.k_max + 1

        L = loss_from_default(d_after, self.cfg.loss_spec)
        w = np.exp(hit * self.log_jump + (self.log_w0 - self.dlam * d_total))
        if T:
            ell = np.clip(L[None, :], self.a, self.d)
            ell -= self.a
            contrib = np.empty((len(k), 2 * T))
            np.multiply(ell.T, (self.disc[k] - self.disc[k_next])[:, None], out=contrib[:, :T])
            np.multiply(ell.T, (self.annuity_from[k] - self.annuity_from[k_next])[:, None],
                        out=contrib[:, T:])
            # per-path sums as a product with the path/jump incidence matrix
            indptr = np.append(starts, len(k))
            incidence = sparse.csr_matrix((np.ones(len(k)), np.arange(len(k)), indptr),
                                          shape=(n_hit, len(k)))
            sums = (incidence @ contrib).T
            xdef = sums[:T]
            xprem = self.x0_prem[:, None] - sums[T:]
        else:
            xdef = xprem = np.empty((0, n_hit))

        surf = None
        if surface_bins:
            pid = np.repeat(w, hit)
            b = np.minimum((L * surface_bins).astype(np.intp), surface_bins - 1)
            rows = self.k_max + 2
            idx = np.concatenate([k * surface_bins + b, k_next * surface_bins + b])
            surf = np.bincount(idx, weights=np.concatenate([pid, -pid]),
                               minlength=rows * surface_bins).reshape(rows, surface_bins)
        return w, xdef, xprem, surf


def _chunk_stats(cfg: SimConfig, valuer: _Valuer, start: int, stop: int,
                 surface_bins, keep_paths):
    T = len(cfg.tranches)
    w0, x0 = valuer.w0, valuer.x0_prem
    # All statistics are rows of one stacked array: R Xdef, R Xprem, R, N.
    base = np.concatenate([np.zeros(T), w0 * x0, [w0, 0.0]])
    acc = Moments.empty(base.shape)
    surface = None
    kept = []
    for jumps in _stream(cfg.seed, cfg.altered, valuer.M, start, stop):
        counts, hit, d_total = jumps.counts, jumps.hit, jumps.d_total
        w, xdef, xprem, surf = valuer.value(hit, jumps.times, jumps.d_after, d_total, surface_bins)
        dev = np.empty((len(base), len(hit)))
        np.multiply(xdef, w, out=dev[:T])
        np.multiply(xprem, w, out=dev[T:2 * T])
        dev[T:2 * T] -= (w0 * x0)[:, None]
        np.subtract(w, w0, out=dev[2 * T])
        dev[2 * T + 1] = hit
        acc = acc.merge(Moments.from_sparse(len(counts), base, dev, axis=1))
        if surf is not None:
            surface = surf if surface is None else surface + surf
        if keep_paths:
            kept.append(_dense(counts, valuer, w, d_total, xdef, xprem))
    return acc, surface, kept


def _split(acc: Moments, T: int):
    def part(i, j):
        return Moments(acc.n, acc.mean[i:j], acc.m2[i:j])
    default, premium = part(0, T), part(T, 2 * T)
    weights = Moments(acc.n, acc.mean[2 * T], acc.m2[2 * T])
    jumps = Moments(acc.n, acc.mean[2 * T + 1], acc.m2[2 * T + 1])
    return default, premium, weights, jumps


def _dense(counts, valuer, w, d_total, xdef, xprem):
    n = len(counts)
    mask = counts > 0
    out = {
        "n_jumps": counts.copy(),
        "weight": np.full(n, valuer.w0),
        "d_total": np.zeros(n),
        "xdef": np.zeros((n, len(valuer.width))),
        "xprem": np.tile(valuer.x0_prem, (n, 1)),
    }
    out["weight"][mask] = w
    out["d_total"][mask] = d_total
    out["xdef"][mask] = xdef.T
    out["xprem"][mask] = xprem.T
    return out


def run_simulation(cfg: SimConfig, surface_bins: int | None = None,
                   keep_paths: bool = False) -> SimResult:
    """Simulate ``cfg.n_paths`` paths and accumulate per-tranche leg statistics.

    Deterministic in ``(seed, n_paths)``; ``chunk_size`` and ``threads`` only
    change how partial results are grouped before merging. The variance of
    the weighted legs is only meaningful when the altered mean jump size is
    above half the real one; see :func:`~poissoncdo.reweighting.phase_boundary`.
    """
    valuer = _Valuer(cfg)
    bounds = [(s, min(s + cfg.chunk_size, cfg.n_paths))
              for s in range(0, cfg.n_paths, cfg.chunk_size)]
    t0 = time.process_time()

    def work(b):
        return _chunk_stats(cfg, valuer, b[0], b[1], surface_bins, keep_paths)

    if cfg.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]

    T = len(cfg.tranches)
    acc = Moments.empty((2 * T + 2,))
    surf = None
    kept = []
    chunks = []
    for a, s, k in parts:
        acc = acc.merge(a)
        chunks.append(_split(a, T)[0])
        if s is not None:
            surf = s if surf is None else surf + s
        kept.extend(k)
    default, premium, weights, jumps = _split(acc, T)
    surface = None
    if surface_bins:
        k_max = cfg.contract.n_periods
        if surf is None:
            surf = np.zeros((k_max + 2, surface_bins))
        prob = np.cumsum(surf, axis=0)[1:k_max + 1] / cfg.n_paths
        surface = LossSurface(cfg.contract.grid()[1:], np.linspace(0, 1, surface_bins + 1),
                              np.maximum(prob, 0.0))
    per_path = None
    if keep_paths:
        per_path = {key: np.concatenate([k[key] for k in kept]) for key in kept[0]}
    return SimResult(cfg, default, premium, weights, jumps, surface, per_path,
                     time.process_time() - t0, tuple(chunks))


def loss_surface(cfg: SimConfig, bins: int = 50) -> LossSurface:
    """Weighted histogram of the loss at each payment date (``L = 0`` excluded)."""
    if bins < 1:
        raise DomainError("need at least one loss bin")
    return run_simulation(_replace(cfg, tranches=()), surface_bins=bins).surface


def sample_paths(cfg: SimConfig, start: int, stop: int) -> list[Path]:
    """Materialise paths ``start .. stop - 1`` of the engine's stream."""
    out = []
    for jumps in _stream(cfg.seed, cfg.altered, cfg.contract.maturity, start, stop):
        offs = np.concatenate([[0], np.cumsum(jumps.counts)])
        for i in range(len(jumps.counts)):
            t = jumps.times[offs[i]:offs[i + 1]]
            s = jumps.sizes[offs[i]:offs[i + 1]]
            out.append(Path(t, s, math.exp(_log_weight_stepwise(t, s, cfg))))
    return out


def _log_weight_stepwise(times, sizes, cfg: SimConfig) -> float:
    r, a = cfg.real, cfg.altered
    M = cfg.contract.maturity
    logw = 0.0
    prev = 0.0
    for t, s in zip(times, sizes):
        gap = t - prev
        logw += math.log(r.rho / a.rho) - (r.rho - a.rho) * gap
        logw += math.log(r.lam / a.lam) - (r.lam - a.lam) * s
        prev = t
    return logw - (r.rho - a.rho) * (M - prev)


def divergence_warning(cfg: SimConfig) -> str | None:
    """Message if the reweighted default-leg variance is infinite for this measure."""
    pb = phase_boundary(cfg.measures)
    if pb.finite:
        return None
    return (f"altered mean jump size {cfg.altered.mu:.4g} is not above half the real one "
            f"({cfg.real.mu / 2:.4g}): the weighted estimator has infinite variance "
            f"(2*lambda - lambda' = {pb.margin:.4g} <= 0)")


def summary_bp(result: SimResult) -> list[dict]:
    rows = []
    for i in range(len(result.config.tranches)):
        row = result.tranche_row(i)
        rows.append({k: (v * BP if k.startswith("def") else v) for k, v in row.items()})
    return rows
