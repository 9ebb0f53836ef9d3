# %% [markdown]
# # Gain maps over the altered measure
#
# Two gains summarise a measure change. `G_num = sigma^2 / sigma'^2` is the
# factor by which fewer paths reach the same error. `G_time` also charges
# for the extra jumps a more intense altered process produces, using a
# linear timing model `t = c + b rho'` fitted to measured CPU time.

# %%
import numpy as np

from poissoncdo import STANDARD_TRANCHES, Contract, ModelParams, SimConfig
from poissoncdo.sweep import fit_timing, measure_timing, ratio_grid, sweep_2d

calm = ModelParams.from_mu(0.05, 0.1)
cfg = SimConfig(calm, calm, Contract(5.0, 0.0), STANDARD_TRANCHES, n_paths=10 ** 5, seed=0)

# %% [markdown]
# ## Timing model
# Work scales with the number of jumps, so CPU time is linear in `rho'`.

# %%
samples = measure_timing(cfg, [0.05, 0.5, 1, 2, 4, 6], n_paths=2 * 10 ** 5, repeats=2)
tm = fit_timing(samples)
print(f"t = {tm.c:.3g} + {tm.b:.3g} rho'  (R^2 {tm.r2:.4f})")

# %% [markdown]
# ## The 10 x 10 map
# Ratios `rho'/rho` and `mu'/mu` run from 1 to 10; every cell reuses the
# seed so that neighbouring cells share noise and the map stays smooth.

# %%
grid = sweep_2d(cfg, calm.rho * ratio_grid(10), calm.mu * ratio_grid(10), timing=tm)
ss = STANDARD_TRANCHES.index(next(t for t in STANDARD_TRANCHES if t.a == 0.3))
np.set_printoptions(precision=1, suppress=True, linewidth=120)
print("G_num, super senior (rows rho'/rho, columns mu'/mu)")
print(grid.g_num[..., ss])

# %%
print(f"{'tranche':>10} {'G_num':>7} {'at':>12} {'G_time':>7} {'at':>12}")
for opt in grid.optima():
    tr = STANDARD_TRANCHES[opt.tranche]
    print(f"{tr.label:>10} {opt.g_num:7.1f} ({opt.num_rho / calm.rho:4.0f},{opt.num_mu / calm.mu:4.0f})"
          f" {opt.g_time:7.1f} ({opt.time_rho / calm.rho:4.0f},{opt.time_mu / calm.mu:4.0f})")
