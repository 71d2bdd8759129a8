"""Jitted inner loops: per-replica RNG, discrete samplers, walk steppers.

Everything here is deliberately free of Python objects: kernels take the
environment as a raw ``(omega, lo)`` array-plus-offset pair and thread an
explicit splitmix64 state (one independent stream per replica, seeded from
:func:`rwrelab.rng.substream_seed`).  Numpy ``Generator`` objects are not
usable from nopython code, and index-addressed replica streams are a
reproducibility requirement, so the generator lives here.

Boundary contract: kernels box the returned state as a plain Python int, and
the dispatcher types plain ints by value — so Python-level callers must
rewrap with ``np.uint64(...)`` before passing a state back in.  Failing to
do so either overflows (value >= 2**63 meeting an int64 overload) or, worse,
silently compiles a signed variant whose arithmetic right shifts bias every
uniform below 0.5.  Each kernel also normalizes its state argument on entry,
which keeps jitted-to-jitted threading and int64-typed entries correct.

The distribution samplers (gamma via Marsaglia-Tsang, Poisson via inversion /
Hoermann's PTRS transformed rejection, negative binomial via the
gamma-Poisson mixture) are the standard exact algorithms; they are
unit-tested against scipy's distributions.

Counts that would be astronomically large are saturated: any negative
binomial whose mean exceeds ``SATURATE_MEAN`` returns ``SATURATED`` instead
of sampling.  Everywhere these values are consumed, only the comparison
"duration > remaining horizon" matters, and the neglected probability mass
(a heavy-count variable falling below ~1e-6 of its mean) is far below float
resolution, so the walk's law on any horizon that fits the step cap is
unaffected.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "SATURATED",
    "SATURATE_MEAN",
    "u01",
    "standard_normal",
    "gamma_sample",
    "poisson_sample",
    "negbin_sample",
    "nb_segment",
    "direct_steps",
    "excursion_once",
    "failure_excursions",
    "success_excursion",
    "reflected_crossing",
    "crossing_direct_obs",
    "hitting_steps",
    "walk_path",
    "warm_up",
]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U53 = 1.0 / 9007199254740992.0

SATURATE_MEAN = 1.0e12
SATURATED = 1.0e18

# status codes shared by the stepping kernels
DONE = 0
NEED_LEFT = -1
NEED_RIGHT = 1
HIT = 2


@njit(cache=True, inline="always")
def u01(state):
    """Advance the splitmix64 stream; return (state, uniform in (0,1))."""
    # States re-entering from Python are plain ints; values below 2**63 would
    # type as int64, whose right shift sign-extends and corrupts the mixer.
    state = np.uint64(state) + _GAMMA
    z = state
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return state, ((z >> _S11) + np.float64(0.5)) * _U53


@njit(cache=True)
def standard_normal(state):
    """Box-Muller (cosine branch only; state handling stays scalar)."""
    state = np.uint64(state)
    state, u1 = u01(state)
    state, u2 = u01(state)
    return state, math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def gamma_sample(state, shape):
    """Gamma(shape, scale=1) by Marsaglia-Tsang, with the shape<1 boost."""
    state = np.uint64(state)
    boost = 1.0
    if shape < 1.0:
        state, u = u01(state)
        boost = u ** (1.0 / shape)
        shape += 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        state, x = standard_normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        state, u = u01(state)
        if u < 1.0 - 0.0331 * x * x * x * x:
            return state, boost * d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return state, boost * d * v


@njit(cache=True)
def poisson_sample(state, lam):
    """Poisson(lam): Knuth inversion below 10, Hoermann PTRS above."""
    state = np.uint64(state)
    if lam <= 0.0:
        return state, 0.0
    if lam < 10.0:
        limit = math.exp(-lam)
        k = -1.0
        p = 1.0
        while p > limit:
            state, u = u01(state)
            p *= u
            k += 1.0
        return state, k
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        state, u = u01(state)
        u -= 0.5
        state, v = u01(state)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return state, k
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if math.log(v * inv_alpha / (a / (us * us) + b)) <= (
            k * math.log(lam) - lam - math.lgamma(k + 1.0)
        ):
            return state, k


@njit(cache=True)
def negbin_sample(state, r, p):
    """Failures before the r-th success at success probability p.

    Integer-valued float r.  Small r sums geometric draws; large r uses the
    exact gamma-Poisson mixture.  A mean above SATURATE_MEAN short-circuits
    to SATURATED (see module docstring).
    """
    state = np.uint64(state)
    if r <= 0.0 or p >= 1.0:
        return state, 0.0
    mean = r * (1.0 - p) / p
    if mean > SATURATE_MEAN:
        return state, SATURATED
    if r < 16.0:
        log_q = math.log1p(-p)
        total = 0.0
        n = int(r)
        for _ in range(n):
            state, u = u01(state)
            total += math.floor(math.log(u) / log_q)
        return state, total
    state, g = gamma_sample(state, r)
    return poisson_sample(state, g * (1.0 - p) / p)


@njit(cache=True)
def nb_segment(omega, lo, start, floor_site, i, d_carry, total_carry, state):
    """Resumable edge-count sampler for the first-passage duration start->target.

    The leftward crossing counts of the edges below the target form a
    downward chain: with D_{target} = 0 and U_i the rightward crossings of
    edge (i, i+1), path counting forces U_i = D_{i+1} + 1 for
    start <= i < target and U_i = D_{i+1} below the start; each departure
    from site i is an independent Bernoulli(omega_i), and the walk departs i
    exactly U_i times rightward, so D_i | D_{i+1} ~ NegBin(U_i, omega_i).
    The duration is (target - start) + 2 * sum_i D_i.  Sites at or below
    ``floor_site`` depart rightward surely (the reflected convention), so
    the scan stops there; an unreflected walk passes a very negative floor.

    Call with i = target - 1, d_carry = 0, total_carry = 0; on NEED_LEFT,
    extend the window below ``lo`` and call again with the returned state.
    Returns (status, i, d_carry, total, state); a total of SATURATED means
    the duration exceeds every representable horizon.
    """
    state = np.uint64(state)
    d = d_carry
    total = total_carry
    while True:
        if i <= floor_site:
            return DONE, i, d, total, state
        r = d + 1.0 if i >= start else d
        if r <= 0.0:
            return DONE, i, d, total, state
        if i < lo:
            return NEED_LEFT, i, d, total, state
        state, d = negbin_sample(state, r, omega[i - lo])
        total += d
        if total >= SATURATED or d >= SATURATED:
            return DONE, i, 0.0, SATURATED, state
        i -= 1


@njit(cache=True)
def direct_steps(omega, lo, x, n_now, n_stop, stop_site, site_map, hit_times, state):
    """Step the chain from time n_now to n_stop (absolute step counts).

    Stops early with HIT at the first visit of ``stop_site`` (pass a site
    far outside the range to disable).  ``site_map`` is either empty (no
    recording) or aligned with ``omega``: ``site_map[s - lo]`` holds the
    milestone index of site s, or -1.  The first visit (n >= 1) of each
    milestone is recorded into ``hit_times`` (initialized to -1); entries
    already >= 0 are never overwritten, so resumed calls are safe.
    Returns (status, x, n_now, state); NEED_LEFT / NEED_RIGHT ask the
    caller to extend the window and resume.
    """
    state = np.uint64(state)
    hi = lo + len(omega) - 1
    track = len(site_map) > 0
    while n_now < n_stop:
        if x < lo:
            return NEED_LEFT, x, n_now, state
        if x > hi:
            return NEED_RIGHT, x, n_now, state
        state, u = u01(state)
        if u < omega[x - lo]:
            x += 1
        else:
            x -= 1
        n_now += 1
        if track:
            mi = site_map[x - lo]
            if mi >= 0 and hit_times[mi] < 0.0:
                hit_times[mi] = np.float64(n_now)
        if x == stop_site:
            return HIT, x, n_now, state
    return DONE, x, n_now, state


@njit(cache=True)
def excursion_once(omega, lo, a, b, d, state):
    """One excursion of the a-reflected walk from b.

    Returns (reached_d, steps, state): reached_d is True when the excursion
    hits d before returning to b.  The window must already cover [a, d];
    reflection at a consumes no randomness.
    """
    state = np.uint64(state)
    x = b
    n = 0.0
    while True:
        if x == a:
            x = a + 1
        else:
            state, u = u01(state)
            if u < omega[x - lo]:
                x += 1
            else:
                x -= 1
        n += 1.0
        if x == b:
            return False, n, state
        if x == d:
            return True, n, state


@njit(cache=True)
def failure_excursions(omega, lo, a, b, d, count, state):
    """Total duration of `count` excursions conditioned to return to b.

    Each is drawn by rejection: re-simulate until the excursion fails to
    reach d (acceptance probability 1 - escape_prob, essentially 1).
    Returns (total_steps, tries, state).
    """
    state = np.uint64(state)
    total = 0.0
    tries = 0
    for _ in range(count):
        while True:
            tries += 1
            reached, n, state = excursion_once(omega, lo, a, b, d, state)
            if not reached:
                total += n
                break
    return total, tries, state


@njit(cache=True)
def success_excursion(omega, lo, a, b, d, budget, state):
    """Rejection-sample one excursion conditioned to reach d before b.

    Returns (accepted, attempts, steps, state); accepted is False when the
    attempt budget is exhausted (the caller falls back to a direct
    crossing).
    """
    state = np.uint64(state)
    attempts = 0
    for _ in range(budget):
        attempts += 1
        reached, n, state = excursion_once(omega, lo, a, b, d, state)
        if reached:
            return True, attempts, n, state
    return False, attempts, 0.0, state


@njit(cache=True)
def reflected_crossing(omega, lo, a, b, d, cap, state):
    """Direct crossing b -> d of the a-reflected walk, capped at `cap` steps.

    Returns (completed, steps, state).
    """
    state = np.uint64(state)
    x = b
    n = 0.0
    while n < cap:
        if x == a:
            x = a + 1
        else:
            state, u = u01(state)
            if u < omega[x - lo]:
                x += 1
            else:
                x -= 1
        n += 1.0
        if x == d:
            return True, n, state
    return False, n, state


@njit(cache=True)
def crossing_direct_obs(omega, lo, a, b, d, obs1, obs2, cap, state):
    """Unconditioned a-reflected crossing b -> d with two observation reads.

    obs1 < obs2 are local step offsets (pass huge sentinels when absent);
    x1 / x2 hold the walk's position at those offsets once reached.  Stops
    at d (status 1, steps = crossing time) or at `cap` steps (status 0).
    Returns (status, steps, x1, x2, x_final, state).
    """
    state = np.uint64(state)
    x = b
    n = 0
    x1 = -(2**62)
    x2 = -(2**62)
    while n < cap:
        if x == a:
            x = a + 1
        else:
            state, u = u01(state)
            if u < omega[x - lo]:
                x += 1
            else:
                x -= 1
        n += 1
        if n == obs1:
            x1 = x
        if n == obs2:
            x2 = x
        if x == d:
            return 1, n, x1, x2, x, state
    return 0, n, x1, x2, x, state


@njit(cache=True)
def hitting_steps(omega, lo, x, target, n_now, cap, state):
    """Walk until the first visit (n >= 1) of `target`, up to `cap` steps.

    Returns (status, x, n_now, state): HIT on arrival, DONE when the cap is
    reached first, NEED_LEFT / NEED_RIGHT on window escape (resume after
    extension).
    """
    state = np.uint64(state)
    hi = lo + len(omega) - 1
    while n_now < cap:
        if x < lo:
            return NEED_LEFT, x, n_now, state
        if x > hi:
            return NEED_RIGHT, x, n_now, state
        state, u = u01(state)
        if u < omega[x - lo]:
            x += 1
        else:
            x -= 1
        n_now += 1
        if x == target:
            return HIT, x, n_now, state
    return DONE, x, n_now, state


@njit(cache=True)
def walk_path(omega, lo, x, n_now, n_stop, path, state):
    """Step from time n_now to n_stop recording path[n] = X_n.

    path has length n_stop + 1 and path[n_now] is already set by the caller.
    Returns (status, x, n_now, state) with the usual window-escape statuses.
    """
    state = np.uint64(state)
    hi = lo + len(omega) - 1
    while n_now < n_stop:
        if x < lo:
            return NEED_LEFT, x, n_now, state
        if x > hi:
            return NEED_RIGHT, x, n_now, state
        state, u = u01(state)
        if u < omega[x - lo]:
            x += 1
        else:
            x -= 1
        n_now += 1
        path[n_now] = x
    return DONE, x, n_now, state


def warm_up() -> None:
    """Compile every kernel once (cache=True persists the machine code).

    Called before forking worker processes so children inherit warm caches.
    """
    omega = np.full(8, 0.5)
    state = np.uint64(1)
    state, _ = u01(state)
    state, _ = standard_normal(np.uint64(state))
    state, _ = gamma_sample(np.uint64(state), 2.5)
    state, _ = poisson_sample(np.uint64(state), 3.0)
    state, _ = poisson_sample(np.uint64(state), 50.0)
    state, _ = negbin_sample(np.uint64(state), 3.0, 0.5)
    state, _ = negbin_sample(np.uint64(state), 40.0, 0.5)
    state = np.uint64(state)
    nb_segment(omega, -2, 0, -(2**62), 3, 0.0, 0.0, state)
    site_map = np.full(8, -1, dtype=np.int64)
    site_map[4] = 0
    times = np.full(1, -1.0)
    direct_steps(omega, -2, 0, 0, 4, 10**9, site_map, times, state)
    direct_steps(omega, -2, 0, 0, 4, 10**9, np.empty(0, dtype=np.int64), np.empty(0), state)
    excursion_once(omega, -2, -1, 0, 3, state)
    failure_excursions(omega, -2, -1, 0, 3, 2, state)
    success_excursion(omega, -2, -1, 0, 3, 16, state)
    reflected_crossing(omega, -2, -1, 0, 3, 10**6, state)
    crossing_direct_obs(omega, -2, -1, 0, 3, 2, 2**62, 10**6, state)
    hitting_steps(omega, -2, 0, 2, 0, 10**6, state)
    path = np.zeros(5, dtype=np.int64)
    walk_path(omega, -2, 0, 0, 4, path, state)
