"""Closed forms vs the tridiagonal oracle vs Monte Carlo.

Everything quenched about a nearest-neighbor chain on an interval is a
small linear system.  The closed-form layer (hit_prob, escape_prob,
expected_hit_time_reflected, invariant_measure) is checked here against
the generic tridiagonal solve and against straight simulation, including
the valley crossing-time identity E[tau(b -> d)] = W - (d - b).
"""

import numpy as np

from rwrelab import (
    IntervalProblem,
    build_potential,
    chain_oracle,
    deep_valleys,
    escape_prob,
    expected_hit_time_reflected,
    hit_prob,
    invariant_measure,
    sample_environment,
    sim_first_passage_nb,
    sim_hitting_time,
    valley_weight,
    validate_spec,
)

spec = validate_spec("lognormal", {"mu": -0.25, "sigma": 1.0})
env = sample_environment(spec, -20, 120, seed=31)

print("== exit probabilities on [0, 40] from 12 ==")
exact = hit_prob(env, 0, 40, start=12)
oracle = chain_oracle(IntervalProblem(env, 0, 40, start=12))
print(f"closed form P(hit 40 before 0) = {exact:.12f}")
print(f"tridiagonal oracle             = {oracle.absorb_right:.12f}")

hits = sum(sim_hitting_time(env, 12, 40, seed=1000 + k, cap=200_000).steps
           < sim_hitting_time(env, 12, 0, seed=1000 + k, cap=200_000).steps
           for k in range(2000))
print(f"crude Monte Carlo (2000 walks) ~ {hits / 2000:.3f}")

print("\n== stationary measure of the reflected chain ==")
pi = invariant_measure(env, 0, 40, 12)
print(f"stationarity defect |pi P - pi| = {pi.stationarity_defect:.3g}")

print("\n== a deep valley and its crossing-time identity ==")
pot = build_potential(env)
valleys = deep_valleys(pot, 3000.0)
v = valleys[0]
w = valley_weight(pot, v)
target = w - (v.d - v.b)
exact_mean = expected_hit_time_reflected(env, v.a, v.b, v.d)
print(f"valley j={v.j}: a={v.a} b={v.b} d={v.d} height={v.height:.3f}")
print(f"W - (d - b)            = {target:.6f}")
print(f"exact E[tau(b -> d)]   = {exact_mean:.6f}")
print(f"escape probability     = {escape_prob(env, v.b, v.d):.6g}")

draws = np.array([sim_first_passage_nb(env, v.b, v.d, seed=5000 + k,
                                       reflect_at=v.a)
                  for k in range(4000)])
se = draws.std(ddof=1) / np.sqrt(len(draws))
print(f"edge-count sampler mean = {draws.mean():.2f} "
      f"(z = {(draws.mean() - target) / se:+.2f} over 4000 draws)")
