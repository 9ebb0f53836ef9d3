"""Quick cross-checks between the analytic, series and simulation engines.

Each check compares an engine against an independent oracle and passes
when the discrepancy is strictly below its tolerance. Tolerances are
multiplied by ``tolerance_scale``; a scale of zero makes every check fail,
which exercises the failure path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import SeriesControl, def_pv, phi, phi0, prem_pv_1bp
from .model import INDEX, STANDARD_TRANCHES, SUPER_SENIOR, Contract, ModelParams, Tranche
from .montecarlo import SimConfig, run_simulation, sample_paths
from .reweighting import (MeasurePair, expected_def, sample_variance_sd, variance_report,
                          weighted_second_moment)

STANDARD = ModelParams(0.05, 10.0)


@dataclass
class Check:
    name: str
    error: float
    tolerance: float
    unit: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.error < self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.error:.3g} < {self.tolerance:.3g}{self.unit}"


def _rel(x, y):
    return abs(x - y) / abs(y)


def _closed_form(scale, p=STANDARD, M=5.0):
    c = Contract(M, 0.0)
    k = p.rho * M / (p.lam + 1)
    dp = -math.expm1(-k)
    pp = (p.lam + 1) / p.rho * dp
    return [Check("index default leg vs closed form (rel)", _rel(def_pv(INDEX, c, p), dp), 1e-6 * scale),
            Check("index premium leg vs closed form (rel)", _rel(prem_pv_1bp(INDEX, c, p), pp),
                  1e-6 * scale)]


def _boundaries(scale, p=STANDARD):
    r = 0.03
    errs = []
    for M in (1.0, 3.0, 5.0):
        s = p.rho + r
        errs.append(abs(phi(1e-12, M, r, p) - p.rho / s * -math.expm1(-s * M)))
    zero = max(abs(phi(h, 0.0, r, p)) for h in (0.1, 0.5, 2.0))
    return [Check("phi(0+, M) boundary value", max(errs), 1e-9 * scale),
            Check("phi(h, 0) = 0", zero, 1e-15 * scale)]


def _phi_vs_phi0(scale, p=STANDARD):
    ctl = SeriesControl()
    hs = np.linspace(0.05, 2.0, 10)
    err = max(float(np.max(np.abs(phi(hs, M, 0.0, p, ctl) - phi0(hs, M, p, ctl))))
              for M in np.linspace(0.5, 5.0, 10))
    return [Check("phi at r=0 vs phi0 on 10x10 grid", err, 2 * ctl.abs_tol * scale)]


def pde_residual(step: float, p: ModelParams = STANDARD, r: float = 0.03,
                 hs=(0.1, 0.325, 0.55, 0.775, 1.0), Ms=(1.0, 2.0, 3.0, 4.0, 5.0)) -> float:
    """Max central-difference residual of the transform's hyperbolic PDE on an interior grid."""
    ctl = SeriesControl(abs_tol=1e-15)

    def f(h, M):
        return phi(h, M, r, p, ctl)

    d = step
    worst = 0.0
    for h in hs:
        for M in Ms:
            f_hm = (f(h + d, M + d) - f(h + d, M - d) - f(h - d, M + d) + f(h - d, M - d)) / (4 * d * d)
            f_m = (f(h, M + d) - f(h, M - d)) / (2 * d)
            f_h = (f(h + d, M) - f(h - d, M)) / (2 * d)
            res = f_hm + p.lam * f_m + (p.rho + r) * f_h + p.lam * r * f(h, M)
            worst = max(worst, abs(res))
    return worst


def _pde(scale):
    coarse, fine = pde_residual(0.02), pde_residual(0.01)
    # second-order scheme: halving the step divides the residual by about 4
    return [Check("PDE residual at step 0.01", fine, 1e-3 * scale),
            Check("PDE residual order under halving (|log2 ratio - 2|)",
                  abs(math.log2(coarse / fine) - 2), 0.1 * scale)]


def _continuity_and_additivity(scale, p=STANDARD):
    tr = SUPER_SENIOR
    v0 = prem_pv_1bp(tr, Contract(5.0, 0.0), p)
    v1 = prem_pv_1bp(tr, Contract(5.0, 1e-8), p)
    c = Contract(5.0, 0.03)
    parts = sum(def_pv(t, c, p) for t in STANDARD_TRANCHES[:6])
    return [Check("premium leg r=1e-8 vs r=0 (rel)", _rel(v1, v0), 1e-6 * scale),
            Check("default leg additivity over [0,1] (rel)", _rel(parts, def_pv(INDEX, c, p)),
                  1e-8 * scale)]


def _first_passage_mc(scale, seed, p=STANDARD, n_paths=200_000):
    # D_M with exact jump counts and gamma sizes, independent of the engine
    rng = np.random.default_rng(seed)
    worst = 0.0
    for M in (1.0, 5.0):
        n = rng.poisson(p.rho * M, n_paths)
        D = np.where(n > 0, rng.gamma(np.maximum(n, 1), 1 / p.lam), 0.0)
        for h in (0.05, 0.3, 1.0):
            est = np.mean(D >= h)
            se = math.sqrt(max(est * (1 - est), 1 / n_paths) / n_paths)
            worst = max(worst, abs(est - phi0(h, M, p)) / se)
    return [Check("phi0 vs independent MC (max |z|)", worst, 4.0 * scale)]


def _importance_sampling(scale, seed, p=STANDARD, n_paths=200_000):
    c = Contract(5.0, 0.0)
    checks = []
    alt = ModelParams.from_mu(0.05, 0.28)
    res = run_simulation(SimConfig(p, alt, c, (SUPER_SENIOR, INDEX), n_paths=n_paths, seed=seed))
    z = max(abs(res.default.mean[i] - expected_def(t, 5.0, p)) / res.default.se[i]
            for i, t in enumerate((SUPER_SENIOR, INDEX)))
    checks.append(Check("reweighted mean vs analytic (max |z|)", z, 4.0 * scale))
    checks.append(Check("E'(R) = 1 (|z|)", abs(res.weights.mean - 1) / res.weights.se, 4.0 * scale))
    mp = MeasurePair(p, alt)
    rep = variance_report(SUPER_SENIOR, 5.0, mp)
    sd = sample_variance_sd(SUPER_SENIOR, 5.0, mp, n_paths)
    checks.append(Check("reweighted variance vs analytic (|z|)",
                        abs(res.default.variance[0] - rep.variance_altered) / sd, 5.0 * scale))
    return checks


def _weights(scale, seed, p=STANDARD):
    alt = ModelParams.from_mu(0.2, 0.3)
    cfg = SimConfig(p, alt, Contract(5.0, 0.0), (), n_paths=2000, seed=seed)
    res = run_simulation(cfg, keep_paths=True)
    paths = sample_paths(cfg, 0, cfg.n_paths)
    stepwise = np.array([q.rn_weight for q in paths])
    err = float(np.max(np.abs(stepwise / res.per_path["weight"] - 1)))
    return [Check("engine weights vs jump-by-jump product (rel)", err, 1e-12 * scale)]


def _phase(scale, p=STANDARD):
    tr = Tranche(0.3, 1.0)
    on = weighted_second_moment(tr, 5.0, MeasurePair(p, ModelParams(p.rho, 2 * p.lam)))
    below = weighted_second_moment(tr, 5.0, MeasurePair(p, ModelParams(p.rho, 1.95 * p.lam)))
    # reported as distances from the expected outcome
    return [Check("second moment infinite at lam' = 2 lam", 0.0 if math.isinf(on) else 1.0,
                  0.5 * scale),
            Check("second moment finite at lam' = 1.95 lam", 0.0 if math.isfinite(below) else 1.0,
                  0.5 * scale)]


def run_checks(tolerance_scale: float = 1.0, seed: int = 12345) -> list[Check]:
    """Run every check; tolerances are scaled by ``tolerance_scale``."""
    s = tolerance_scale
    return (_closed_form(s) + _boundaries(s) + _phi_vs_phi0(s) + _pde(s)
            + _continuity_and_additivity(s) + _first_passage_mc(s, seed)
            + _importance_sampling(s, seed) + _weights(s, seed) + _phase(s))
