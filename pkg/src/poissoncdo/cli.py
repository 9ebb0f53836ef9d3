"""Command-line front end.

Subcommands read an optional JSON configuration (see :mod:`poissoncdo.config`);
without one they use the calm-economy defaults ``rho = 0.05``, ``mu = 0.1``,
five-year maturity, zero rate and the standard tranche set. Leg values are
printed in basis points; written files carry both bp and fraction columns.

Exit codes: 0 success, 2 configuration error, 3 validation failure,
4 divergent altered measure under ``--strict-divergence``.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .analytic import def_pv, prem_pv_1bp
from .config import ConfigError, RunConfig, load_config
from .model import BP, DomainError, ModelParams, fair_spread
from .montecarlo import divergence_warning, run_simulation
from .sweep import (MAP_QUANTITIES, fit_timing, measure_timing, provenance, sweep_1d, sweep_2d,
                    TimingModel, write_curve, write_map, write_optima, write_timing, write_table)
from .validate import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_DIVERGENT = 0, 2, 3, 4

DEFAULT_CONFIG = RunConfig(real=ModelParams.from_mu(0.05, 0.1), altered=ModelParams.from_mu(0.05, 0.1))


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--paths", type=int, metavar="N")
    common.add_argument("--threads", type=int, metavar="N")
    common.add_argument("--format", choices=("csv", "tsv"))

    p = argparse.ArgumentParser(prog="poissoncdo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("price", parents=[common], help="analytic leg values and fair spreads")
    sim = sub.add_parser("simulate", parents=[common], help="importance-sampled simulation")
    sim.add_argument("--strict-divergence", action="store_true",
                     help="exit with status 4 if the altered measure has infinite variance")
    sub.add_parser("sweep", parents=[common], help="1-D sweep of one altered parameter")
    sub.add_parser("map", parents=[common], help="2-D gain map and optima table")
    sub.add_parser("timing", parents=[common], help="CPU time against altered intensity")
    val = sub.add_parser("validate", parents=[common], help="cross-check the engines")
    val.add_argument("--tolerance-scale", type=float, default=1.0,
                     help="multiply every tolerance (0 forces failures)")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else DEFAULT_CONFIG
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.paths is not None:
        kw["paths"] = args.paths
    if args.threads is not None:
        kw["threads"] = args.threads
    if args.format is not None:
        kw["fmt"] = args.format
    if args.out is not None:
        kw["out_dir"] = args.out
    cfg = replace(cfg, **kw)
    if cfg.paths < 1 or cfg.threads < 1 or not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("--paths and --threads must be positive and --seed an unsigned 64-bit integer")
    return cfg


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _print_table(header, rows):
    cells = [header] + [[v if isinstance(v, str) else f"{v:.6g}" for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    for r in cells:
        print("  ".join(s.rjust(w) for s, w in zip(r, widths)))


def cmd_price(cfg: RunConfig) -> int:
    rows = []
    for tr in cfg.tranches:
        dp = def_pv(tr, cfg.contract, cfg.real)
        pp = prem_pv_1bp(tr, cfg.contract, cfg.real)
        spread = fair_spread(dp, pp) if pp > 0 else float("nan")
        rows.append([tr.label, dp * BP, pp, spread])
    _print_table(["tranche", "def_pv_bp", "prem_pv_1bp", "spread_bp"], rows)
    if cfg.out_dir != ".":
        write_table(_out(cfg, f"price.{cfg.fmt}"),
                     ["a", "d", "def_pv_bp", "def_pv", "prem_pv_1bp", "spread_bp"],
                     [[t.a, t.d, r[1], r[1] / BP, r[2], r[3]] for t, r in zip(cfg.tranches, rows)],
                     [f"engine poissoncdo {__version__}", "analytic"], cfg.fmt)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, strict: bool = False) -> int:
    sim = cfg.sim_config()
    warning = divergence_warning(sim)
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    res = run_simulation(sim)
    rows = []
    for i, tr in enumerate(cfg.tranches):
        analytic = def_pv(tr, cfg.contract, cfg.real)
        z = (res.default.mean[i] - analytic) / res.default.se[i] if res.default.se[i] > 0 else 0.0
        rows.append([tr.label, res.default.mean[i] * BP, res.default.sd[i] * BP,
                     res.default.se[i] * BP, analytic * BP, z,
                     res.premium.mean[i], res.premium.sd[i], res.premium.se[i]])
    flag = "  [DIVERGENT MEASURE]" if warning else ""
    print(f"# {cfg.paths} paths, seed {cfg.seed}, altered rho'={cfg.altered.rho:g} "
          f"mu'={cfg.altered.mu:g}, {res.cpu_seconds:.2f} s{flag}")
    _print_table(["tranche", "def_mean_bp", "def_sd_bp", "def_se_bp", "def_analytic_bp", "z",
                  "prem_mean", "prem_sd", "prem_se"], rows)
    print(f"# weights: mean {res.weights.mean:.6g} (se {res.weights.se:.3g}), "
          f"jumps per path {res.jumps.mean:.4g}")
    if cfg.out_dir != ".":
        header = ["a", "d", "def_mean_bp", "def_sd_bp", "def_se_bp", "def_analytic_bp",
                  "def_mean", "def_sd", "def_se", "prem_mean", "prem_sd", "prem_se"]
        out_rows = [[t.a, t.d, r[1], r[2], r[3], r[4], r[1] / BP, r[2] / BP, r[3] / BP,
                     r[6], r[7], r[8]] for t, r in zip(cfg.tranches, rows)]
        notes = provenance(sim, altered=f"rho={cfg.altered.rho:g} mu={cfg.altered.mu:g}",
                           divergent=int(bool(warning)))
        write_table(_out(cfg, f"simulate.{cfg.fmt}"), header, out_rows, notes, cfg.fmt)
    return EXIT_DIVERGENT if (warning and strict) else EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    curve = sweep_1d(cfg.sweep.axis, cfg.sweep.values, cfg.sim_config())
    if curve.divergent.any():
        print(f"warning: {int(curve.divergent.sum())} swept values lie past the phase boundary "
              f"(mu' <= mu/2) and have infinite variance", file=sys.stderr)
    for t, tr in enumerate(cfg.tranches):
        path = _out(cfg, f"sweep_{cfg.sweep.axis}_{tr.label}.{cfg.fmt}")
        write_curve(path, curve, t, cfg.fmt)
        print(path)
    return EXIT_OK


def _timing_model(cfg: RunConfig) -> TimingModel:
    if cfg.timing.c is not None:
        return TimingModel(cfg.timing.c, cfg.timing.b)
    samples = measure_timing(cfg.sim_config(), cfg.timing.rho_values, cfg.timing.paths,
                             cfg.timing.repeats)
    return fit_timing(samples)


def cmd_timing(cfg: RunConfig) -> int:
    samples = measure_timing(cfg.sim_config(), cfg.timing.rho_values, cfg.timing.paths,
                             cfg.timing.repeats)
    tm = fit_timing(samples)
    for r, s in samples:
        print(f"rho'={r:g}  {s:.4f} s")
    print(f"fit: t = {tm.c:.4g} + {tm.b:.4g} rho'   R^2 = {tm.r2:.5f}")
    path = _out(cfg, f"timing.{cfg.fmt}")
    write_timing(path, tm, replace(cfg.sim_config(), n_paths=cfg.timing.paths), cfg.fmt)
    print(path)
    return EXIT_OK


def cmd_map(cfg: RunConfig) -> int:
    tm = _timing_model(cfg)
    sim = cfg.sim_config(n_paths=cfg.map.paths)
    grid = sweep_2d(sim, cfg.real.rho * np.asarray(cfg.map.rho_ratios),
                    cfg.real.mu * np.asarray(cfg.map.mu_ratios), timing=tm, workers=cfg.threads)
    for i, j, msg in grid.failed:
        print(f"warning: cell rho'={grid.rho_values[i]:g} mu'={grid.mu_values[j]:g} failed: {msg}",
              file=sys.stderr)
    for t, tr in enumerate(cfg.tranches):
        for q in MAP_QUANTITIES:
            write_map(_out(cfg, f"map_{q}_{tr.label}.{cfg.fmt}"), grid, q, t, cfg.fmt)
    path = _out(cfg, f"optima.{cfg.fmt}")
    write_optima(path, grid, cfg.fmt)
    rows = []
    for opt in grid.optima():
        tr = cfg.tranches[opt.tranche]
        rows.append([tr.label,
                     *(("-",) * 3 if opt.g_num is None else
                       (opt.num_rho / cfg.real.rho, opt.num_mu / cfg.real.mu, opt.g_num)),
                     *(("-",) * 3 if opt.g_time is None or not np.isfinite(opt.g_time) else
                       (opt.time_rho / cfg.real.rho, opt.time_mu / cfg.real.mu, opt.g_time))])
    _print_table(["tranche", "rho'/rho", "mu'/mu", "G_num", "rho'/rho", "mu'/mu", "G_time"], rows)
    print(path)
    return EXIT_OK


def cmd_validate(tolerance_scale: float, seed: int) -> int:
    checks = run_checks(tolerance_scale, seed)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_VALIDATION if failed else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "validate":
            return cmd_validate(args.tolerance_scale, args.seed if args.seed is not None else 12345)
        if args.command == "price":
            return cmd_price(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.strict_divergence)
        return {"sweep": cmd_sweep, "map": cmd_map, "timing": cmd_timing}[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
