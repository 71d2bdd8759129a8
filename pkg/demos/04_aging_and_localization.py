"""Aging and localization at desk scale.

The aging probability P(|X_th - X_t| <= eta log t) converges to a
generalized arcsine integral depending only on (kappa, h); localization
says the walk at time t sits within eta log t of the bottom of the last
deep valley it entered.  This demo runs a small annealed batch per horizon
(minutes, single core) and prints estimates against the closed-form
references; bump the replica counts for tighter intervals.
"""

import math

from rwrelab import arcsine_aging_value, estimate_aging, localization_rate, validate_spec

spec = validate_spec("lognormal", {"mu": -0.25, "sigma": 1.0})  # kappa = 1/2
ETA = 1.0
N = 1500
SEED = 2026

print(f"spec: lognormal kappa = {spec.kappa}, eta = {ETA}, {N} replicas/cell")

print("\n== aging across h at t = 1e5 ==")
for h in (1.5, 2.0, 4.0):
    cell = estimate_aging(spec, 1e5, h, ETA, N, SEED)
    ref = arcsine_aging_value(spec.kappa, h)
    print(f"h = {h}: estimate = {cell.estimate:.4f} "
          f"[{cell.ci_lo:.4f}, {cell.ci_hi:.4f}]  arcsine limit = {ref:.4f} "
          f"(n = {cell.n}, excluded = {cell.flags})")

print("\n== aging across t at h = 2 (limit 1/2) ==")
for t in (1e4, 1e5):
    cell = estimate_aging(spec, t, 2.0, ETA, N, SEED)
    print(f"t = {t:g}: estimate = {cell.estimate:.4f} "
          f"window = eta log t = {ETA * math.log(t):.1f} sites")

print("\n== localization rate (limit 1) ==")
for t in (1e4, 1e5):
    cell = localization_rate(spec, t, ETA, N, SEED)
    print(f"t = {t:g}: rate = {cell.estimate:.4f} "
          f"[{cell.ci_lo:.4f}, {cell.ci_hi:.4f}] (n = {cell.n})")
