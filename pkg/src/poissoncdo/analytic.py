"""Exact pricing through the first-passage transform of the default process.

``phi(h, M, r)`` is the discounted probability ``E[exp(-r T_h); T_h < M]``
that the cumulative default level reaches ``h`` before maturity. Both legs
are one-dimensional integrals of it against ``exp(-h)`` over the tranche's
log-levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import Contract, DomainError, ModelParams, Tranche
from .quadrature import integrate


class SeriesConvergenceError(RuntimeError):
    """The series tail bound did not fall below tolerance within ``max_terms``."""


@dataclass(frozen=True)
class SeriesControl:
    abs_tol: float = 1e-12
    max_terms: int = 4096

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be at least 1")


@dataclass(frozen=True)
class QuadControl:
    rel_tol: float = 1e-9
    # exp(-36) ~ 2.3e-16: beyond this the exp(-h) weight is below double precision.
    h_cap: float = 36.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if not self.h_cap > 0:
            raise DomainError("h_cap must be positive")


# Below this r*M the 1/r form of the premium leg loses more than ~1e-13 to cancellation.
SMALL_RATE_TIME = 1e-3

DEFAULT_SERIES = SeriesControl()
DEFAULT_QUAD = QuadControl()


def _as_levels(h):
    arr = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("levels must be nonnegative")
    return arr


def _check_time(M):
    if not (M >= 0 and math.isfinite(M)):
        raise DomainError(f"horizon must be finite and nonnegative, got {M}")


def _ret(out, h):
    return float(out[0]) if np.ndim(h) == 0 else out


def phi(h, M: float, r: float, params: ModelParams, ctl: SeriesControl = DEFAULT_SERIES):
    """Discounted first-passage probability ``E[exp(-r T_h); T_h < M]``.

    The outer sum runs over the number of jumps, weighted by Poisson masses
    of mean ``(rho + r) M``; the inner sum is a truncated exponential series
    in ``lam * rho * h / (rho + r)`` that is extended by one term per outer
    step. ``h = 0`` returns the continuous extension. Accepts scalar or
    array ``h``.
    """
    _check_time(M)
    if r < 0:
        raise DomainError(f"rate must be nonnegative, got {r}")
    hh = _as_levels(h)
    out = np.zeros_like(hh)
    finite = np.isfinite(hh)
    if M == 0 or not finite.any():
        return _ret(out, h)
    hv = hh[finite]
    rho, lam = params.rho, params.lam
    s = rho + r
    x = s * M
    y = lam * rho * hv / s
    with np.errstate(divide="ignore"):
        log_y = np.log(y)
    log_x = math.log(x)

    # log of exp(-lam h) y^k / k!, advanced in k
    log_inner = -lam * hv
    inner = np.exp(log_inner)
    log_p = -x
    total = np.zeros_like(hv)
    # inner sum never exceeds exp(-lam h + y)
    envelope = float(np.exp(np.max(-lam * hv + y)))
    for n in range(1, ctl.max_terms + 1):
        log_p += log_x - math.log(n)
        total += math.exp(log_p) * inner
        if ctl.abs_tol > 0 and envelope * special.pdtrc(n, x) * rho / s < ctl.abs_tol:
            out[finite] = rho / s * total
            return _ret(np.clip(out, 0.0, 1.0), h)
        with np.errstate(invalid="ignore"):
            log_inner = log_inner + log_y - math.log(n)
        inner = inner + np.exp(log_inner)
    raise SeriesConvergenceError(
        f"phi did not converge in {ctl.max_terms} terms (h up to {hv.max():.4g}, M={M})")


def phi0(h, M: float, params: ModelParams, ctl: SeriesControl = DEFAULT_SERIES):
    """First-passage probability ``P(T_h < M)`` (the undiscounted transform).

    Sum over jump counts ``n`` of ``P(N_M = n) * P(Poisson(lam h) < n)``;
    the second factor is the regularized upper incomplete gamma function.
    """
    _check_time(M)
    hh = _as_levels(h)
    out = np.zeros_like(hh)
    finite = np.isfinite(hh)
    if M == 0 or not finite.any():
        return _ret(out, h)
    x = params.rho * M
    lh = params.lam * hh[finite]
    total = np.zeros_like(lh)
    for n in range(1, ctl.max_terms + 1):
        total += math.exp(-x + n * math.log(x) - math.lgamma(n + 1)) * special.gammaincc(n, lh)
        if special.pdtrc(n, x) < ctl.abs_tol:
            out[finite] = total
            return _ret(np.clip(out, 0.0, 1.0), h)
    raise SeriesConvergenceError(f"phi0 did not converge in {ctl.max_terms} terms (M={M})")


def discounted_overshoot(h, M: float, r: float, params: ModelParams,
                         ctl: SeriesControl = DEFAULT_SERIES):
    """``E[int_{min(T_h, M)}^M exp(-r s) ds]``, discounted time spent above ``h``.

    Equals the time integral of ``exp(-r s) phi0(h, s)`` over ``[0, M]``.
    Integrating each Poisson mass against the discount factor gives
    ``rho^n / (rho + r)^(n+1) * P(n + 1, (rho + r) M)`` with ``P`` the
    regularized lower incomplete gamma, so no ``1/r`` cancellation occurs
    and ``r = 0`` needs no special case.
    """
    _check_time(M)
    if r < 0:
        raise DomainError(f"rate must be nonnegative, got {r}")
    hh = _as_levels(h)
    out = np.zeros_like(hh)
    finite = np.isfinite(hh)
    if M == 0 or not finite.any():
        return _ret(out, h)
    rho = params.rho
    s = rho + r
    x = s * M
    lh = params.lam * hh[finite]
    total = np.zeros_like(lh)
    log_ratio = math.log(rho / s)
    for n in range(1, ctl.max_terms + 1):
        total += math.exp(n * log_ratio) * special.gammainc(n + 1, x) * special.gammaincc(n, lh)
        # remaining masses sum to at most E[(N - n - 1)^+] / s <= x P(N > n) / s
        if x * special.pdtrc(n, x) / s < ctl.abs_tol:
            out[finite] = total / s
            return _ret(out, h)
    raise SeriesConvergenceError(f"overshoot series did not converge in {ctl.max_terms} terms")


def _upper(tr: Tranche, q: QuadControl) -> float:
    return min(tr.hd, q.h_cap)


def def_pv(tr: Tranche, c: Contract, params: ModelParams,
           ctl: SeriesControl = DEFAULT_SERIES, q: QuadControl = DEFAULT_QUAD) -> float:
    """Expected discounted default-leg payments of the tranche."""
    lo, hi = tr.ha, _upper(tr, q)
    if hi <= lo:
        return 0.0
    M, r = c.maturity, c.rate
    val = integrate(lambda h: phi(h, M, r, params, ctl) * np.exp(-h), lo, hi, rel_tol=q.rel_tol)
    return min(max(val, 0.0), tr.width)


def prem_pv_1bp(tr: Tranche, c: Contract, params: ModelParams,
                ctl: SeriesControl = DEFAULT_SERIES, q: QuadControl = DEFAULT_QUAD) -> float:
    """Expected discounted outstanding notional, paid continuously, per unit spread.

    The premium is the full-width annuity minus the value lost once the loss
    passes each level. For ``r M`` above :data:`SMALL_RATE_TIME` the lost part
    combines the discounted and undiscounted transforms,
    ``(phi_r - e^{-rM} phi_0) / r``; below it that difference cancels
    catastrophically, so :func:`discounted_overshoot` is integrated instead
    (it is exact for every ``r``, including the ``r = 0`` limit).
    """
    M, r = c.maturity, c.rate
    lo, hi = tr.ha, _upper(tr, q)
    if hi <= lo or M == 0:
        return 0.0
    if r * M < SMALL_RATE_TIME:
        lost = integrate(lambda h: discounted_overshoot(h, M, r, params, ctl) * np.exp(-h),
                         lo, hi, rel_tol=q.rel_tol)
    else:
        disc = math.exp(-r * M)

        def lost_integrand(h):
            return (phi(h, M, r, params, ctl) - disc * phi0(h, M, params, ctl)) / r * np.exp(-h)

        lost = integrate(lost_integrand, lo, hi, rel_tol=q.rel_tol)
    return annuity_continuous(r, M) * tr.width - lost


def annuity_continuous(r: float, M: float) -> float:
    """``int_0^M exp(-r s) ds``."""
    return M if r == 0 else -math.expm1(-r * M) / r


def expected_tranche_loss(tr: Tranche, t: float, params: ModelParams,
                          ctl: SeriesControl = DEFAULT_SERIES, q: QuadControl = DEFAULT_QUAD) -> float:
    """``E[tranche loss at time t]``, the undiscounted default leg to horizon ``t``."""
    if t == 0:
        return 0.0
    return def_pv(tr, Contract(maturity=t, rate=0.0), params, ctl, q)


def grid_legs(tr: Tranche, c: Contract, params: ModelParams,
              ctl: SeriesControl = DEFAULT_SERIES, q: QuadControl = DEFAULT_QUAD) -> tuple[float, float]:
    """Expected legs on the discrete payment grid, as the path simulation values them.

    Losses are settled and premium on the end-of-period outstanding notional
    is paid at each grid date. Returns ``(default_leg, premium_per_unit_spread)``.
    """
    t = c.grid()
    disc = c.discount_factors()
    el = np.array([expected_tranche_loss(tr, tk, params, ctl, q) for tk in t])
    default_leg = float(np.sum(disc[1:] * np.diff(el)))
    premium = float(np.sum(disc[1:] * (tr.width - el[1:])) * c.dt)
    return default_leg, premium
