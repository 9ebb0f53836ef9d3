# %% [markdown]
# # Pricing the standard tranches analytically
#
# The default process is compound Poisson: events arrive at rate `rho` and
# each adds an exponential amount with mean `1/lam` to the default level `D`.
# The portfolio loss is `L = 1 - exp(-D)`, so a tranche `[a, d]` is hit once
# `D` passes `-ln(1 - a)`.
#
# Both legs can be written as integrals over default levels of the
# first-passage transform `phi_r(h, M)`, the expected discount factor at the
# first time `D` reaches `h` (zero if that happens after `M`).

# %%
import numpy as np

from poissoncdo import BP, INDEX, STANDARD_TRANCHES, Contract, ModelParams, def_pv, phi, prem_pv_1bp
from poissoncdo.model import fair_spread

calm = ModelParams.from_mu(rho=0.05, mu=0.1)
contract = Contract(maturity=5.0, rate=0.0)

# %% [markdown]
# ## The transform itself
# `phi` falls from `rho/(rho+r) (1 - exp(-(rho+r) M))` at `h = 0` towards zero
# as the level rises; discounting only lowers it.

# %%
levels = np.array([0.01, 0.1, 0.3, 0.6, 1.0, 2.0])
for r in (0.0, 0.05):
    print(f"r={r:.2f}", np.round(phi(levels, 5.0, r, calm), 6))

# %% [markdown]
# ## Tranche table
# Default legs are quoted in basis points of portfolio notional; the premium
# leg is the value of paying one unit of spread on the outstanding notional.

# %%
print(f"{'tranche':>10} {'defPV bp':>10} {'premPV1bp':>10} {'spread bp':>10}")
for tr in STANDARD_TRANCHES:
    d, p = def_pv(tr, contract, calm), prem_pv_1bp(tr, contract, calm)
    print(f"{tr.label:>10} {d * BP:10.3f} {p:10.5f} {fair_spread(d, p):10.3f}")

# %% [markdown]
# For the index tranche `E(1 - L_t) = exp(-rho t / (lam + 1))`, which gives
# both legs in closed form; the spread is then `rho / (lam + 1)` exactly.

# %%
k = calm.rho * 5 / (calm.lam + 1)
print("closed form defPV", (1 - np.exp(-k)) * BP, "bp")
print("spread", fair_spread(def_pv(INDEX, contract, calm), prem_pv_1bp(INDEX, contract, calm)),
      "vs", calm.rho / (calm.lam + 1) * BP)

# %% [markdown]
# ## Discounting
# With a positive rate both legs shrink; tranche legs still add up to the index.

# %%
c3 = Contract(5.0, 0.03)
parts = sum(def_pv(t, c3, calm) for t in STANDARD_TRANCHES[:-1])
print("sum of tranches", parts * BP, "index", def_pv(INDEX, c3, calm) * BP)
