"""
RSS statistics in the three link states
=======================================

Each state has its own density of linear-scale RSS.  We draw samples,
refit them by maximum likelihood and check the fits with a
Kolmogorov-Smirnov test.
"""

import numpy as np

from tristate_dfl.stats import STATE_DENSITIES, fit_mle, ks_test

rng = np.random.default_rng(0)
names = ("non-fading", "reflection", "shadowing")

for name, d in zip(names, STATE_DENSITIES):
    x = d.sample(rng, 20_000)
    f = fit_mle(d.family, x)
    res = ks_test(x[:2000], f)
    print(f"{name:10s} {d.family:9s} true ({d.p1:.3f}, {d.p2:.3f})  "
          f"fit ({f.p1:.3f}, {f.p2:.3f})  KS p = {res.p_value:.2f}")

#%%
# The wrong family is easy to spot with enough data.
x = STATE_DENSITIES[1].sample(rng, 10_000)
for fam in ("lognormal", "weibull", "gamma"):
    r = ks_test(x, fit_mle(fam, x))
    print(f"reflection samples vs {fam:9s}: D = {r.statistic:.4f}, reject = {r.reject_h0}")
