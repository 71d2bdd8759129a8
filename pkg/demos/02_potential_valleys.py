"""The potential landscape and its deep valleys.

The potential V is the running sum of log rho; the walk behaves like a
diffusion in this landscape, so the time-t behavior is governed by the
excursions of V whose height clears the critical scale h_t = log t -
log log t.  This demo prints the anatomy of the deep valleys of one
realization and the diagnostics that certify the environment is "good"
for the valley bookkeeping.
"""

from rwrelab import (
    build_potential,
    critical_scales,
    deep_valleys,
    excursion_heights,
    good_env_diagnostics,
    sample_environment,
    valley_weight,
    validate_spec,
)

spec = validate_spec("lognormal", {"mu": -0.25, "sigma": 1.0})
t = 1e5

scales = critical_scales(t, spec.kappa)
print(f"t = {t:g}: h_t = {scales.h:.3f}, n_t = {scales.n}, D_t = {scales.D:.3f}")

env = sample_environment(spec, -64, 2048, seed=20)
pot = build_potential(env)

heights = excursion_heights(pot, scales.n)
print(f"\nfirst {scales.n} excursion heights: max = {heights.max():.2f}, "
      f"#deep (>= h_t) = {(heights >= scales.h).sum()}")

valleys = deep_valleys(pot, t)
print(f"\n{len(valleys)} deep valleys within the first n_t excursions:")
print(f"{'j':>3} {'a':>6} {'b':>6} {'c':>6} {'d':>6} {'height':>8} {'log W':>8}")
for v in valleys:
    print(f"{v.j:>3} {v.a:>6} {v.b:>6} {v.c:>6} {v.d:>6} "
          f"{v.height:>8.3f} {v.log_weight:>8.3f}")
    assert abs(valley_weight(pot, v) - v.weight) < 1e-9 * max(v.weight, 1.0)

diag = good_env_diagnostics(pot, t)
print(f"\ngood-environment diagnostics: all hold = {diag.all_good}")
for event in diag.events:
    print(f"  {event.name}: holds={event.holds} witness={event.witness:.4g} "
          f"threshold={event.threshold:.4g}")
