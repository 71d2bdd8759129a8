"""The exponential clock picture and the renewal laws.

Quenched, the index of the currently occupied deep valley behaves like the
counting variable of an exponential clock driven by the valley weights:
l_t is close in total variation to l^(e) + 1 where l^(e) counts partial
sums of W_k e_k below t.  Annealed, the normalized entry times follow
Dynkin-type generalized arcsine laws.  Both comparisons run on the cheap
edge-count level sampler, so modest horizons finish in seconds.
"""

import numpy as np

from rwrelab import (
    clock_model_comparison,
    dynkin_left_cdf,
    dynkin_right_cdf,
    renewal_test,
    validate_spec,
)

spec = validate_spec("lognormal", {"mu": -0.25, "sigma": 1.0})
SEED = 99

print("== clock model: per-environment TV(law(l_t), law(l^(e)+1)) ==")
for t in (1e4, 1e5):
    res = clock_model_comparison(spec, t, n_env=15, n_walks_per_env=400,
                                 seed=SEED)
    q1, q2, q3 = res.tv_quartiles
    print(f"t = {t:g}: median TV = {res.tv_median:.3f} "
          f"(quartiles {q1:.3f}/{q2:.3f}/{q3:.3f}, "
          f"{res.n_env_valid}/{res.n_env} environments)")

print("\n== renewal laws: entry times around the horizon ==")
for t in (1e4, 1e5):
    res = renewal_test(spec, t, n_replicas=1200, seed=SEED)
    print(f"t = {t:g}: KS(T_l/t vs left Dynkin law) = {res.ks_left:.3f} "
          f"(n = {res.n_level_pos}), sandwich frequency = {res.sandwich_freq:.3f}")

print("\n== the two Dynkin laws integrate to one ==")
for kappa in (0.3, 0.5, 0.7):
    left = dynkin_left_cdf(kappa, 0.0, 1.0)
    right = dynkin_right_cdf(kappa, 0.0, np.inf)
    print(f"kappa = {kappa}: left mass = {left:.12f}, right mass = {right:.12f}")
