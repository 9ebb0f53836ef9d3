"""Domain types and cashflow arithmetic for the compound Poisson loss model.

All amounts are fractions of the total portfolio notional. Conversion to
basis points happens only when reporting (see :data:`BP`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

BP = 1.0e4


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class ModelParams:
    """Compound Poisson default process.

    Args:
        rho: Event intensity (events per year).
        lam: Inverse mean jump size, i.e. jumps are exponential with rate ``lam``.
    """

    rho: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise DomainError(f"rho must be positive and finite, got {self.rho}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"lambda must be positive and finite, got {self.lam}")

    @property
    def mu(self) -> float:
        """Mean jump size."""
        return 1.0 / self.lam

    @classmethod
    def from_mu(cls, rho: float, mu: float) -> "ModelParams":
        if not mu > 0:
            raise DomainError(f"mu must be positive, got {mu}")
        return cls(rho, 1.0 / mu)


@dataclass(frozen=True)
class Contract:
    """Maturity, flat continuously compounded rate and payment grid density."""

    maturity: float = 5.0
    rate: float = 0.0
    periods_per_year: int = 4

    def __post_init__(self):
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise DomainError(f"rate must be nonnegative, got {self.rate}")
        if int(self.periods_per_year) != self.periods_per_year or self.periods_per_year < 1:
            raise DomainError(f"periods_per_year must be a positive integer, got {self.periods_per_year}")

    @property
    def n_periods(self) -> int:
        """Number of payment dates; at least one."""
        return max(1, int(round(self.maturity * self.periods_per_year)))

    @property
    def dt(self) -> float:
        return self.maturity / self.n_periods

    def grid(self) -> np.ndarray:
        """Payment dates ``t_0 = 0, ..., t_k = maturity``."""
        return np.linspace(0.0, self.maturity, self.n_periods + 1)

    def discount_factors(self) -> np.ndarray:
        return np.exp(-self.rate * self.grid())

    def annuity(self) -> float:
        """Value of one unit of notional paid at every grid date after t_0."""
        return float(self.discount_factors()[1:].sum() * self.dt)


@dataclass(frozen=True)
class Tranche:
    """Loss interval ``[a, d]`` as fractions of the portfolio notional."""

    a: float
    d: float
    ha: float = field(init=False, repr=False)
    hd: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.a <= self.d <= 1.0):
            raise DomainError(f"need 0 <= a <= d <= 1, got a={self.a}, d={self.d}")
        if self.a == 1.0:
            raise DomainError("attachment must be below 1")
        object.__setattr__(self, "ha", log_level(self.a))
        object.__setattr__(self, "hd", log_level(self.d))

    @property
    def width(self) -> float:
        return self.d - self.a

    @property
    def label(self) -> str:
        return f"{self.a:.2f}-{self.d:.2f}"


class LossSpec(enum.Enum):
    """Mapping from cumulative default level to portfolio loss."""

    EXPONENTIAL = "exponential"
    LINEAR = "linear"


def log_level(x: float) -> float:
    """Return ``-ln(1 - x)``, the default level at which loss reaches ``x``."""
    if not (math.isfinite(x) and 0.0 <= x <= 1.0):
        raise DomainError(f"loss fraction must lie in [0, 1], got {x}")
    if x == 1.0:
        return math.inf
    return -math.log1p(-x)


def loss_from_default(D, spec: LossSpec = LossSpec.EXPONENTIAL):
    """Portfolio loss fraction for a cumulative default level ``D >= 0``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    arr = np.asarray(D, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("default level must be nonnegative")
    if spec is LossSpec.EXPONENTIAL:
        out = -np.expm1(-arr)
    elif spec is LossSpec.LINEAR:
        out = np.minimum(arr, 1.0)
    else:
        raise DomainError(f"unknown loss specification {spec!r}")
    return float(out) if out.ndim == 0 else out


def _check_loss(L):
    arr = np.asarray(L, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DomainError("portfolio loss must lie in [0, 1]")
    return arr


def tranche_loss(L, tr: Tranche):
    """Loss absorbed by the tranche, ``min(L, d) - min(L, a)``."""
    arr = _check_loss(L)
    out = np.minimum(arr, tr.d) - np.minimum(arr, tr.a)
    return float(out) if out.ndim == 0 else out


def outstanding_notional(L, tr: Tranche):
    """Remaining tranche width on which premium accrues."""
    arr = _check_loss(L)
    out = tr.width - (np.minimum(arr, tr.d) - np.minimum(arr, tr.a))
    return float(out) if out.ndim == 0 else out


def fair_spread(def_pv: float, prem_pv_1bp: float) -> float:
    """Zero-upfront break-even spread in basis points."""
    if prem_pv_1bp == 0:
        raise ZeroDivisionError("premium leg value per unit spread is zero")
    if prem_pv_1bp < 0:
        raise DomainError(f"premium leg value must be positive, got {prem_pv_1bp}")
    return BP * def_pv / prem_pv_1bp


# Equity, mezzanines, seniors, super senior and index.
STANDARD_TRANCHES = (
    Tranche(0.00, 0.03),
    Tranche(0.03, 0.07),
    Tranche(0.07, 0.10),
    Tranche(0.10, 0.15),
    Tranche(0.15, 0.30),
    Tranche(0.30, 1.00),
    Tranche(0.00, 1.00),
)
SUPER_SENIOR = STANDARD_TRANCHES[5]
INDEX = STANDARD_TRANCHES[6]
