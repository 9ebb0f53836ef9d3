"""Tranche pricing under a compound Poisson loss model, with importance sampling.

The analytic pricer values tranche legs exactly through the first-passage
transform of the default process; the Monte Carlo engine simulates the same
model under an altered measure and reweights; the reweighting module gives
the exact variance of the reweighted estimator and its phase boundary.
"""
__version__ = "0.1.0"

from .model import (BP, INDEX, STANDARD_TRANCHES, SUPER_SENIOR, Contract, DomainError,  # noqa: E402
                    LossSpec, ModelParams, Tranche, fair_spread, loss_from_default,
                    tranche_loss)
from .analytic import def_pv, phi, phi0, prem_pv_1bp  # noqa: E402
from .reweighting import (MeasurePair, phase_boundary, variance_report,  # noqa: E402
                          weighted_second_moment)
from .montecarlo import SimConfig, run_simulation  # noqa: E402

__all__ = [
    "BP", "INDEX", "STANDARD_TRANCHES", "SUPER_SENIOR", "Contract", "DomainError", "LossSpec",
    "ModelParams", "Tranche", "fair_spread", "loss_from_default", "tranche_loss",
    "def_pv", "phi", "phi0", "prem_pv_1bp", "MeasurePair", "phase_boundary",
    "variance_report", "weighted_second_moment", "SimConfig", "run_simulation",
]
