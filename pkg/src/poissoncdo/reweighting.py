"""Closed-form diagnostics of the reweighted default-leg estimator at r = 0.

Paths are simulated under an altered measure ``(rho', lam')`` and weighted
by the likelihood ratio ``R = dP/dP'``. Everything here is exact given the
joint law of the jump count ``N_M`` and the default level ``D_M``: the
expectation of the default leg, the weighted second moment ``E[R X^2]``, and
from them the variance the simulation will observe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .analytic import DEFAULT_SERIES, SeriesControl, SeriesConvergenceError
from .model import DomainError, ModelParams, Tranche


@dataclass(frozen=True)
class MeasurePair:
    """Real measure used for pricing and altered measure used for sampling."""

    real: ModelParams
    altered: ModelParams

    @classmethod
    def identical(cls, params: ModelParams) -> "MeasurePair":
        return cls(params, params)

    @property
    def is_identity(self) -> bool:
        return self.real == self.altered

    @property
    def log_jump_factor(self) -> float:
        """Log of the per-jump ratio ``rho lam / (rho' lam')``."""
        r, a = self.real, self.altered
        return math.log(r.rho * r.lam / (a.rho * a.lam))


@dataclass(frozen=True)
class VarianceReport:
    mean: float
    second_moment_weighted: float
    variance_altered: float
    finite: bool
    terms_used: int

    @property
    def sd_altered(self) -> float:
        return math.sqrt(self.variance_altered)


@dataclass(frozen=True)
class PhaseBoundary:
    """Integrability of the weighted second moment.

    ``margin`` is ``2 lam - lam'``; the dominant term is integrable iff it is
    positive. ``weak_margin`` belongs to the term carrying an extra
    ``exp(-h)`` factor, integrable iff ``2 lam - lam' + 1 > 0``.
    """

    finite: bool
    margin: float
    weak_finite: bool
    weak_margin: float


def rn_weight(n_jumps: int, d_total: float, M: float, mp: MeasurePair) -> float:
    """Likelihood ratio ``dP/dP'`` of a path with ``n_jumps`` totalling ``d_total``."""
    if n_jumps < 0 or d_total < 0 or M < 0:
        raise DomainError("jump count, default level and horizon must be nonnegative")
    if (n_jumps == 0) != (d_total == 0):
        raise DomainError("a path has zero total default exactly when it has no jumps")
    return math.exp(log_rn_weight(n_jumps, d_total, M, mp))


def log_rn_weight(n_jumps, d_total, M: float, mp: MeasurePair):
    """Log-space weight; vectorises over ``n_jumps`` and ``d_total``."""
    r, a = mp.real, mp.altered
    return (n_jumps * mp.log_jump_factor - (r.rho - a.rho) * M
            - (r.lam - a.lam) * np.asarray(d_total, dtype=float))


def joint_density(n: int, h, M: float, params: ModelParams):
    """Density of ``(N_M = n, D_M = h)``, defective by ``P(N_M = 0)``."""
    if n < 1 or int(n) != n:
        raise DomainError(f"jump count must be a positive integer, got {n}")
    hh = np.asarray(h, dtype=float)
    if np.any(hh < 0) or np.any(np.isnan(hh)):
        raise DomainError("level must be nonnegative")
    rho, lam = params.rho, params.lam
    with np.errstate(divide="ignore"):
        log_h = np.log(hh)
    log_f = (-lam * hh - rho * M + n * math.log(rho * M * lam)
             - math.lgamma(n + 1) - math.lgamma(n))
    if n > 1:
        log_f = log_f + (n - 1) * log_h
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def _delta_p(n: int, nu: float, l: float, u: float) -> float:
    """``P(n, nu u) - P(n, nu l)`` for ``nu > 0``, picking the accurate tail."""
    xl = nu * l
    xu = nu * u if math.isfinite(u) else math.inf
    if xl > n:
        qu = 0.0 if math.isinf(xu) else special.gammaincc(n, xu)
        return special.gammaincc(n, xl) - qu
    pu = 1.0 if math.isinf(xu) else special.gammainc(n, xu)
    return pu - special.gammainc(n, xl)


def log_gamma_slice(n: int, nu: float, l: float, u: float) -> float:
    """Log of :func:`gamma_slice`; ``-inf`` for an empty slice, ``+inf`` if divergent."""
    if n < 1 or int(n) != n:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not (0 <= l <= u):
        raise DomainError(f"need 0 <= l <= u, got l={l}, u={u}")
    if l == u:
        return -math.inf
    if math.isinf(u) and nu <= 0:
        return math.inf
    if nu > 0 and (math.isinf(u) or nu * u > 1.0):
        dp = _delta_p(n, nu, l, u)
        if dp <= 0:
            return -math.inf
        return math.lgamma(n) - n * math.log(nu) + math.log(dp)
    # Growing, flat or barely decaying exponential on a finite slice, where the
    # regularized gamma difference would underflow:
    # int_0^x t^(n-1) e^(-nu t) dt = x^n / n * 1F1(n; n + 1; -nu x).
    hi = math.log(u) * n - math.log(n) + math.log(special.hyp1f1(n, n + 1, -nu * u))
    if l == 0:
        return hi
    lo = math.log(l) * n - math.log(n) + math.log(special.hyp1f1(n, n + 1, -nu * l))
    return hi + math.log(-math.expm1(lo - hi))


def gamma_slice(n: int, nu: float, l: float, u: float) -> float:
    """``int_l^u exp(-nu h) h^(n-1) dh``, ``+inf`` when ``u = inf`` and ``nu <= 0``."""
    return math.exp(log_gamma_slice(n, nu, l, u))


def _sum_series(term, bound, ctl: SeriesControl, what: str):
    """Sum ``term(n)`` for ``n >= 1`` until the tail bound drops below tolerance.

    ``bound(n)`` must dominate the sum of all terms after ``n``.
    """
    total = 0.0
    for n in range(1, ctl.max_terms + 1):
        t = term(n)
        if math.isinf(t):
            return math.inf, n
        total += t
        if bound(n) < ctl.abs_tol:
            return total, n
    raise SeriesConvergenceError(f"{what} did not converge in {ctl.max_terms} terms")



def expected_def_term(n: int, tr: Tranche, M: float, params: ModelParams) -> float:
    """Contribution of paths with exactly ``n`` jumps to the undiscounted default leg."""
    rho, lam = params.rho, params.lam
    log_pois = -rho * M + n * math.log(rho * M) - math.lgamma(n + 1)
    # f(n, h) dh integrates to Poisson(n) * lam^n / Gamma(n) * slice
    body = (1 - tr.a) * _delta_p(n, lam, tr.ha, tr.hd) \
        - math.exp(n * math.log(lam / (lam + 1))) * _delta_p(n, lam + 1, tr.ha, tr.hd) \
        + tr.width * _delta_p(n, lam, tr.hd, math.inf)
    return float(math.exp(log_pois) * body)


def expected_def(tr: Tranche, M: float, params: ModelParams,
                 ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """``E[X_def]`` at zero rate: expected tranche loss at maturity."""
    if tr.width == 0:
        return 0.0
    x = params.rho * M
    # each term is at most (d - a) P(N = n)
    val, _ = _sum_series(lambda n: expected_def_term(n, tr, M, params),
                         lambda n: tr.width * special.pdtrc(n, x), ctl, "expected_def")
    return val


def phase_boundary(mp: MeasurePair) -> PhaseBoundary:
    margin = 2 * mp.real.lam - mp.altered.lam
    return PhaseBoundary(margin > 0, margin, margin + 1 > 0, margin + 1)


class _WeightedPower:
    """Per-jump-count terms of ``E'[(R X_def)^p] = E[R^(p-1) X_def^p]``.

    With ``q = p - 1``, ``R^q f`` for ``n`` jumps at level ``h`` equals
    ``exp(-(rho + q (rho - rho')) M) (kappa theta)^n h^(n-1) exp(-nu h) / (n! (n-1)!)``,
    where ``kappa = rho M (rho / rho')^q``, ``theta = lam (lam / lam')^q`` and
    ``nu = lam + q (lam - lam')``. Expanding ``(1 - a - e^{-h})^p`` on
    ``[ha, hd]`` gives slices with decay rates ``nu + k``; the saturated part
    ``(d - a)^p`` lives on ``[hd, inf)`` with rate ``nu``. For ``p = 2`` this
    is the second moment, with ``nu = 2 lam - lam'``.
    """

    def __init__(self, tr: Tranche, M: float, mp: MeasurePair, p: int = 2,
                 h_max: float = math.inf):
        if p < 1 or int(p) != p:
            raise DomainError(f"power must be a positive integer, got {p}")
        r, a = mp.real, mp.altered
        q = p - 1
        self.tr, self.p = tr, p
        self.log_pref = -(r.rho + q * (r.rho - a.rho)) * M
        self.log_kt = (math.log(r.rho * M) + q * math.log(r.rho / a.rho)
                       + math.log(r.lam) + q * math.log(r.lam / a.lam))
        self.nu = r.lam + q * (r.lam - a.lam)
        ha = min(tr.ha, h_max)
        hd = min(tr.hd, h_max)
        self.pieces = []  # (coefficient, decay, lower, upper)
        if ha < hd:
            one_a = 1 - tr.a
            self.pieces += [(math.comb(p, k) * (-1) ** k * one_a ** (p - k), self.nu + k, ha, hd)
                            for k in range(p + 1)]
        if hd < h_max and tr.width > 0:
            self.pieces.append((tr.width ** p, self.nu, hd, h_max))

    @property
    def divergent(self) -> bool:
        return any(c != 0 and math.isinf(u) and nu <= 0 for c, nu, _, u in self.pieces)

    def term(self, n: int) -> float:
        base = self.log_pref + n * self.log_kt - math.lgamma(n + 1) - math.lgamma(n)
        total = 0.0
        for c, nu, l, u in self.pieces:
            lg = log_gamma_slice(n, nu, l, u)
            if math.isinf(lg) and lg > 0:
                return math.inf
            total += c * math.exp(base + lg)
        return max(total, 0.0)

    def tail_bound(self, n: int) -> float:
        """Bound on the sum of terms after ``n``.

        The payoff power is at most ``(d - a)^p``, so each term is dominated
        by the same density integrated over all of ``[ha, inf)``. For
        ``nu > 0`` that is a Poisson-like series in ``z = kappa theta / nu``.
        """
        if self.nu <= 0:
            return math.inf
        z = math.exp(self.log_kt) / self.nu
        return self.tr.width ** self.p * math.exp(self.log_pref + z) * special.pdtrc(n, z)


def second_moment_term(n: int, tr: Tranche, M: float, mp: MeasurePair) -> float:
    """Contribution of paths with exactly ``n`` jumps to ``E[R X_def^2]``."""
    return _WeightedPower(tr, M, mp).term(n)


def _weighted_moment(tr, M, mp, ctl, p=2):
    if tr.width == 0:
        return 0.0, 0
    sm = _WeightedPower(tr, M, mp, p)
    if sm.divergent:
        return math.inf, 0
    return _sum_series(sm.term, sm.tail_bound, ctl, "weighted_second_moment")


def weighted_second_moment(tr: Tranche, M: float, mp: MeasurePair,
                           ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """``E[R X_def^2] = E'[(R X_def)^2]``, or ``+inf`` past the phase boundary."""
    return _weighted_moment(tr, M, mp, ctl)[0]


def partial_second_moment(tr: Tranche, M: float, mp: MeasurePair, n_terms: int,
                          h_max: float = math.inf) -> float:
    """Sum of the first ``n_terms`` jump-count contributions to ``E[R X_def^2]``.

    ``h_max`` restricts the default level to ``D_M <= h_max``; past the phase
    boundary the restricted sums stay finite and grow without bound in it.
    """
    sm = _WeightedPower(tr, M, mp, h_max=h_max)
    return math.fsum(sm.term(n) for n in range(1, n_terms + 1))


def variance_report(tr: Tranche, M: float, mp: MeasurePair,
                    ctl: SeriesControl = DEFAULT_SERIES) -> VarianceReport:
    """Mean, weighted second moment and observable variance of ``R X_def`` under P'."""
    mean = expected_def(tr, M, mp.real, ctl)
    m2, used = _weighted_moment(tr, M, mp, ctl)
    if math.isinf(m2):
        return VarianceReport(float(mean), math.inf, math.inf, False, used)
    return VarianceReport(float(mean), float(m2), max(float(m2 - mean * mean), 0.0), True, used)


def weighted_moment(tr: Tranche, M: float, mp: MeasurePair, p: int,
                    ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """``E'[(R X_def)^p]``; finite iff ``lam + (p - 1)(lam - lam') > 0``."""
    return _weighted_moment(tr, M, mp, ctl, p)[0]


def sample_variance_sd(tr: Tranche, M: float, mp: MeasurePair, n_paths: int,
                       ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """Exact standard deviation of the sample variance of ``R X_def`` over ``n_paths`` paths.

    Uses the central fourth moment ``mu4`` and the variance ``s2`` of one
    sample: ``Var(s^2) = mu4 / n - s2^2 (n - 3) / (n (n - 1))``.
    """
    if n_paths < 2:
        raise DomainError("need at least two paths")
    m = [weighted_moment(tr, M, mp, p, ctl) for p in (1, 2, 3, 4)]
    if any(math.isinf(v) for v in m):
        return math.inf
    m1, m2, m3, m4 = m
    s2 = m2 - m1 * m1
    mu4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 ** 4
    n = n_paths
    return math.sqrt(max(mu4 / n - s2 * s2 * (n - 3) / (n * (n - 1)), 0.0))
