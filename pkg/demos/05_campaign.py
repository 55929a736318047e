"""
Monte-Carlo comparison of observation models
============================================

Run a short campaign per model on a corridor, print a results table and
sweep one parameter.  The CLI does the same at full scale:

    tristate-dfl --scenario corridor:3 --runs 100 --out results/
"""

from tristate_dfl.experiment import RunSetup, run_campaign, sweep_parameter
from tristate_dfl.metrics import format_table
from tristate_dfl.simulate import corridor_scenario

setup = RunSetup(corridor_scenario(3.0))
camp = run_campaign(setup, runs=5, seed=0)
print(format_table([c.mean for c in camp.values()], [c.std for c in camp.values()]))

#%%
# Larger assumed measurement noise flattens the likelihood and spreads
# the particle cloud.
for row in sweep_parameter(setup, "sigma_p", [1.5, 6.0], ("three-state",), runs=3):
    print(f"sigma_p = {row['value']:4.1f} dB -> {row['eps_pct']:.1f} % of particles on the person")
