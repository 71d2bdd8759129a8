"""Trajectory simulation for the quenched walk.

Two trajectory engines share one bookkeeping convention:

* ``direct`` — step-by-step simulation to the far observation time,
  recording first visits of every valley bottom b_k and recentering point
  d_k through a site-indexed milestone map.

* ``geometric-hybrid`` — the walk is decomposed into inter-valley legs
  (simulated directly) and valley crossings b_k -> d_k.  A crossing is
  drawn by the geometric-attempt construction (a geometric number of
  excursions conditioned to return, then one conditioned to escape), which
  yields its duration without exposing interior positions.  When a pending
  observation time would land inside the crossing — detected exactly on
  the event {crossing duration >= pending offset} — the partial
  construction is discarded and the crossing is redrawn as a plain
  reflected walk with position reads, *conditioned on that same event* by
  rejection.  Conditioning is what keeps the stitched law exact: an
  unconditioned redraw would overweight short crossings, because the kept
  branch is implicitly conditioned on finishing early.  The escape-budget
  fallback is likewise decided before the construction starts, by a coin
  with the budget's exact blow probability: a budget event discovered
  mid-loop is only reachable when the failure part stayed short, so acting
  on it there would skew the mixture.  Reflecting crossings at the left
  barrier a_k is the one modeling approximation in this mode; the direct
  engine exists to audit it.

Every replica consumes a single splitmix64 stream derived from
``(master_seed, "walk", replica)``; the clock surrogate uses
``(master_seed, "clock", replica)`` so walk and clock randomness live on a
product space.  Observation times, entry times, and durations are kept as
exact integers throughout (the level-only sampler returns floats because
its negative-binomial counts may saturate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .envmodel import Environment
from .quenched import escape_prob
from .rng import site_uniforms, substream_seed

__all__ = [
    "DEFAULT_STEP_CAP",
    "S_REJECTION_BUDGET",
    "MODES",
    "WalkConfig",
    "HittingSample",
    "CrossingSample",
    "ClockRealization",
    "LevelsSample",
    "TrajectorySummary",
    "step_walk",
    "sim_hitting_time",
    "sim_first_passage_nb",
    "sim_valley_crossing_geometric",
    "run_trajectory",
    "run_levels_only",
    "clock_model",
]

DEFAULT_STEP_CAP = 10_000_000_000
S_REJECTION_BUDGET = 256
MODES = ("direct", "geometric-hybrid")

_FAR_SITE = 2**62
_MAX_WINDOW = 1 << 26


def _u64(value) -> np.uint64:
    """Normalize any integer (kernel-returned states included) to uint64."""
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class WalkConfig:
    """Horizon and window parameters for one trajectory study.

    ``t`` is the observation time, ``h`` the aging ratio (the second
    observation happens at round(t*h)), and ``eta`` scales the
    localization/aging window ``eta * log t``.
    """

    t: int
    h: float
    eta: float
    master_seed: int
    step_cap: int = DEFAULT_STEP_CAP
    mode: str = "direct"

    def __post_init__(self):
        if not isinstance(self.t, (int, np.integer)) or self.t < 1:
            raise ValueError(f"t must be a positive integer, got {self.t!r}")
        if not self.h > 1:
            raise ValueError(f"aging ratio h must exceed 1, got {self.h!r}")
        if not self.eta > 0:
            raise ValueError(f"window coefficient eta must be positive, got {self.eta!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.step_cap < self.t * self.h:
            raise ValueError(
                f"step cap {self.step_cap} is below t*h = {self.t * self.h}"
            )

    @property
    def th(self) -> int:
        """The far observation time round(t*h)."""
        return int(round(self.t * self.h))

    @property
    def window(self) -> float:
        """The localization / aging window eta * log t."""
        return self.eta * math.log(self.t)


@dataclass(frozen=True)
class HittingSample:
    """First-passage draw: steps taken, and whether the cap cut it short."""

    steps: int
    capped: bool


@dataclass(frozen=True)
class CrossingSample:
    """One valley-crossing time from the geometric-attempt construction."""

    duration: int
    n_failures: int
    s_attempts: int
    fallback_direct: bool


@dataclass(frozen=True)
class ClockRealization:
    """Weights, exponential draws, and the resulting clock level."""

    weights: tuple[float, ...]
    draws: tuple[float, ...]
    level: int


@dataclass(frozen=True)
class LevelsSample:
    """Valley entry/exit times from the edge-count sampler (no positions).

    Times are floats because saturated counts map to a beyond-any-horizon
    sentinel; unsaturated values are exact integers.
    """

    level: int
    entry_times: tuple[float, ...]
    exit_times: tuple[float, ...]

    def sandwich(self, t: float) -> bool:
        """True when entry(level) <= t < exit(level) for the current level."""
        if self.level < 1:
            return False
        return self.exit_times[self.level - 1] > t


_CSV_FIELDS = (
    "replica",
    "mode",
    "t",
    "th",
    "x_t",
    "x_th",
    "level_t",
    "level_th",
    "b_site",
    "localized_t",
    "localized_th",
    "aged",
    "sandwich",
    "total_steps",
    "s_fallbacks",
    "step_cap_exceeded",
    "beyond_valleys",
    "no_deep_valley",
    "entry_times",
    "exit_times",
)


@dataclass(frozen=True)
class TrajectorySummary:
    """Per-replica outcome of a two-observation trajectory run."""

    replica: int
    mode: str
    t: int
    th: int
    x_t: int | None
    x_th: int | None
    level_t: int
    level_th: int
    b_site: int | None
    entry_times: tuple[int, ...]
    exit_times: tuple[int | None, ...]
    localized_t: bool
    localized_th: bool
    aged: bool
    sandwich: bool
    total_steps: int
    s_fallbacks: int
    step_cap_exceeded: bool
    beyond_valleys: bool
    no_deep_valley: bool

    @staticmethod
    def csv_header() -> list[str]:
        return list(_CSV_FIELDS)

    def to_csv_row(self) -> list:
        def cell(value):
            if value is None:
                return ""
            if isinstance(value, bool):
                return int(value)
            return value

        times = ";".join(str(v) for v in self.entry_times)
        exits = ";".join("" if v is None else str(v) for v in self.exit_times)
        return [
            self.replica, self.mode, self.t, self.th,
            cell(self.x_t), cell(self.x_th), self.level_t, self.level_th,
            cell(self.b_site), cell(self.localized_t), cell(self.localized_th),
            cell(self.aged), cell(self.sandwich), self.total_steps,
            self.s_fallbacks, cell(self.step_cap_exceeded),
            cell(self.beyond_valleys), cell(self.no_deep_valley),
            times, exits,
        ]


class _Window:
    """Environment view that extends on demand as the walk escapes it."""

    def __init__(self, env: Environment, lo: int, hi: int):
        self.env = env.extended(min(lo, env.lo), max(hi, env.hi))
        self.extensions = 0

    @property
    def omega(self) -> np.ndarray:
        return self.env.omega

    @property
    def lo(self) -> int:
        return self.env.lo

    @property
    def hi(self) -> int:
        return self.env.hi

    def _grow(self, lo: int, hi: int) -> None:
        if hi - lo + 1 > _MAX_WINDOW:
            raise RuntimeError(
                f"environment window would exceed {_MAX_WINDOW} sites; "
                "the walk has escaped any plausible range"
            )
        self.env = self.env.extended(lo, hi)
        self.extensions += 1

    def extend_left(self) -> None:
        pad = max(64, (self.hi - self.lo + 1) // 2)
        self._grow(self.lo - pad, self.hi)

    def extend_right(self) -> None:
        pad = max(64, (self.hi - self.lo + 1) // 2)
        self._grow(self.lo, self.hi + pad)


def _initial_window(env: Environment, valleys: Sequence, horizon: int) -> _Window:
    pad = 64 + 8 * int(math.log(horizon + 1) + 1)
    bounds = [_valley_abd(v) for v in valleys]
    sites = [0] + [a for a, _, _ in bounds] + [d for _, _, d in bounds]
    return _Window(env, min(sites) - pad, max(sites) + pad)


def _build_site_map(win: _Window, sites: Sequence[int]) -> np.ndarray:
    site_map = np.full(win.hi - win.lo + 1, -1, dtype=np.int64)
    for idx, site in enumerate(sites):
        site_map[site - win.lo] = idx
    return site_map


_EMPTY_MAP = np.empty(0, dtype=np.int64)
_EMPTY_TIMES = np.empty(0)


def step_walk(env: Environment, start: int, n_steps: int, seed: int,
              *, return_path: bool = False):
    """Simulate ``n_steps`` of the chain from ``start``.

    Returns the final site, or ``(final site, path array)`` with
    ``path[n] = X_n`` when ``return_path`` is set.  Deterministic in
    (seed, start, n_steps); the window extends itself as needed.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    pad = 32 + 4 * int(math.isqrt(n_steps + 1))
    win = _Window(env, start - pad, start + pad)
    state = _u64(seed)
    x = start
    if return_path:
        path = np.empty(n_steps + 1, dtype=np.int64)
        path[0] = start
        n = 0
        while True:
            status, x, n, state = K.walk_path(win.omega, win.lo, x, n, n_steps, path, state)
            state = _u64(state)
            if status == K.NEED_LEFT:
                win.extend_left()
            elif status == K.NEED_RIGHT:
                win.extend_right()
            else:
                return int(x), path
    n = 0
    while True:
        status, x, n, state = K.direct_steps(
            win.omega, win.lo, x, n, n_steps, _FAR_SITE, _EMPTY_MAP, _EMPTY_TIMES, state)
        state = _u64(state)
        if status == K.NEED_LEFT:
            win.extend_left()
        elif status == K.NEED_RIGHT:
            win.extend_right()
        else:
            return int(x)


def sim_hitting_time(env: Environment, start: int, target: int, seed: int,
                     cap: int = DEFAULT_STEP_CAP) -> HittingSample:
    """First-passage time of ``target`` from ``start`` (tau counts from n >= 1).

    A draw that exhausts ``cap`` steps is returned flagged, not dropped.
    """
    lo, hi = min(start, target), max(start, target)
    win = _Window(env, lo - 32, hi + 32)
    state = _u64(seed)
    x, n = start, 0
    while True:
        status, x, n, state = K.hitting_steps(win.omega, win.lo, x, target, n, cap, state)
        state = _u64(state)
        if status == K.NEED_LEFT:
            win.extend_left()
        elif status == K.NEED_RIGHT:
            win.extend_right()
        elif status == K.HIT:
            return HittingSample(steps=int(n), capped=False)
        else:
            return HittingSample(steps=int(n), capped=True)


def _nb_passage(win: _Window, start: int, target: int, reflect_at: int | None,
                state: np.uint64) -> tuple[float, np.uint64]:
    floor_site = reflect_at if reflect_at is not None else -(2**62)
    i = target - 1
    d_carry = 0.0
    total = 0.0
    while True:
        status, i, d_carry, total, state = K.nb_segment(
            win.omega, win.lo, start, floor_site, i, d_carry, total, state)
        state = _u64(state)
        if status == K.NEED_LEFT:
            win.extend_left()
        else:
            break
    if total >= K.SATURATED:
        return K.SATURATED, state
    return float(target - start) + 2.0 * total, state


def sim_first_passage_nb(env: Environment, start: int, target: int, seed: int,
                         *, reflect_at: int | None = None) -> float:
    """Exact-in-law first-passage duration via the edge-count construction.

    Scanning edges downward from the target, each leftward crossing count is
    negative binomial given the count one edge above; the duration is
    ``(target - start) + 2 * sum of counts``.  Cost is proportional to the
    number of sites scanned, not to the duration, which is what makes deep
    crossings affordable.  With ``reflect_at`` the walk is reflected there
    (sites at or below it step right surely).  Returns a float; saturated
    astronomically long passages come back as ``_kernels.SATURATED``.
    """
    if target <= start:
        raise ValueError("target must lie to the right of start")
    if reflect_at is not None and reflect_at > start:
        raise ValueError("reflection barrier cannot lie right of start")
    left_edge = start if reflect_at is None else reflect_at
    win = _Window(env, left_edge - 32, target + 32)
    duration, _ = _nb_passage(win, start, target, reflect_at, _u64(seed))
    return duration


def _valley_abd(valley) -> tuple[int, int, int]:
    if hasattr(valley, "a"):
        return int(valley.a), int(valley.b), int(valley.d)
    a, b, d = valley
    return int(a), int(b), int(d)


def _geometric_failures(esc: float, u: float) -> int:
    """Number of failed escape attempts before the first success."""
    if esc >= 1.0:
        return 0
    log_q = math.log1p(-esc)
    if log_q == 0.0:
        return 2**62
    return int(math.log(u) / log_q)


def sim_valley_crossing_geometric(env: Environment, valley, seed: int,
                                  *, s_budget: int = S_REJECTION_BUDGET) -> CrossingSample:
    """Crossing time b -> d of the valley-reflected walk, by decomposition.

    Draws the number of failed escape attempts as a geometric variable with
    the exact escape probability, simulates that many excursions conditioned
    to return (rejection), then one conditioned to escape (rejection with
    ``s_budget`` attempts).  If the escape budget is exhausted the whole
    crossing is redrawn as a plain reflected walk — exact, because the
    budget event is independent of the construction's value.  Cost is
    comparable to direct crossing; the value of the construction is that it
    exposes the attempt structure (failure count, escape attempts).
    """
    a, b, d = _valley_abd(valley)
    if not a < b < d:
        raise ValueError(f"valley anatomy must satisfy a < b < d, got {(a, b, d)}")
    win = _Window(env, a, d)
    esc = escape_prob(win.env, b, d)
    state = _u64(seed)

    state, u = K.u01(state)
    state = _u64(state)
    n_fail = _geometric_failures(esc, u)

    total_f, _, state = K.failure_excursions(win.omega, win.lo, a, b, d, n_fail, state)
    state = _u64(state)
    accepted, s_attempts, s_steps, state = K.success_excursion(
        win.omega, win.lo, a, b, d, s_budget, state)
    state = _u64(state)
    if accepted:
        return CrossingSample(duration=int(total_f + s_steps), n_failures=n_fail,
                              s_attempts=int(s_attempts), fallback_direct=False)
    _, steps, state = K.reflected_crossing(win.omega, win.lo, a, b, d, 1e18, state)
    return CrossingSample(duration=int(steps), n_failures=n_fail,
                          s_attempts=int(s_attempts), fallback_direct=True)


def clock_model(weights: Iterable[float], t: float, seed: int,
                *, draws: Iterable[float] | None = None) -> ClockRealization:
    """The exponential-clock surrogate: level of the weighted partial sums.

    Draws i.i.d. unit exponentials e_k (deterministically from ``seed``,
    on a stream separate from any walk), and returns the largest i with
    ``W_1 e_1 + ... + W_i e_i <= t``.  Pass ``draws`` to force the e_k.
    """
    w = tuple(float(v) for v in weights)
    if any(v <= 0 for v in w):
        raise ValueError("clock weights must be positive")
    if draws is None:
        if w:
            u = site_uniforms(seed, 0, len(w) - 1)
            e = tuple(-math.log(v) for v in u)
        else:
            e = ()
    else:
        e = tuple(float(v) for v in draws)
        if len(e) != len(w):
            raise ValueError("draws must match weights in length")
    partial = 0.0
    level = 0
    for wk, ek in zip(w, e):
        partial += wk * ek
        if partial <= t:
            level += 1
        else:
            break
    return ClockRealization(weights=w, draws=e, level=level)


class _TrajectoryRun:
    """Mutable state shared by the trajectory engines."""

    def __init__(self, env: Environment, valleys: Sequence, cfg: WalkConfig,
                 replica: int):
        for v in valleys:
            a, b, d = _valley_abd(v)
            if not a < b < d:
                raise ValueError(f"valley anatomy must satisfy a < b < d, got {(a, b, d)}")
        bs = [_valley_abd(v)[1] for v in valleys]
        if any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])):
            raise ValueError("valley bottoms must be strictly increasing")
        self.env = env
        self.valleys = list(valleys)
        self.cfg = cfg
        self.replica = replica
        self.state = _u64(substream_seed(cfg.master_seed, "walk", replica))
        self.win = _initial_window(env, self.valleys, cfg.th)
        self.x = 0
        self.T = 0                      # model time (hybrid bookkeeping)
        self.total = 0                  # simulated steps, rejections included
        self.obs = [cfg.t, cfg.th]
        self.obs_x: dict[int, int] = {}
        self.entries: list[int] = []
        self.exits: list[int | None] = []
        self.s_fallbacks = 0
        self.capped = False

    def budget(self) -> int:
        return self.cfg.step_cap - self.total

    def charge(self, steps) -> None:
        self.total += int(steps)
        if self.total >= self.cfg.step_cap:
            self.capped = True

    def commit_due(self) -> None:
        """Commit any observation falling exactly at the current model time."""
        while self.obs and self.obs[0] == self.T:
            self.obs_x[self.obs[0]] = self.x
            self.obs.pop(0)

    def summary(self) -> TrajectorySummary:
        cfg = self.cfg
        t, th = cfg.t, cfg.th
        entries = tuple(self.entries)
        exits = tuple(self.exits) + (None,) * (len(entries) - len(self.exits))
        level_t = sum(1 for v in entries if v <= t)
        level_th = sum(1 for v in entries if v <= th)
        x_t = self.obs_x.get(t)
        x_th = self.obs_x.get(th)
        window = cfg.window

        def b_of(level: int) -> int | None:
            if level < 1:
                return None
            return _valley_abd(self.valleys[level - 1])[1]

        b_t = b_of(level_t)
        b_th = b_of(level_th)
        localized_t = (b_t is not None and x_t is not None
                       and abs(x_t - b_t) <= window)
        localized_th = (b_th is not None and x_th is not None
                        and abs(x_th - b_th) <= window)
        aged = (x_t is not None and x_th is not None
                and abs(x_th - x_t) <= window)
        if level_t >= 1:
            exit_l = exits[level_t - 1]
            sandwich = exit_l is None or exit_l > t
        else:
            sandwich = False
        n_v = len(self.valleys)
        beyond = bool(n_v and len(entries) == n_v and exits
                      and exits[-1] is not None)
        return TrajectorySummary(
            replica=self.replica, mode=cfg.mode, t=t, th=th,
            x_t=x_t, x_th=x_th, level_t=level_t, level_th=level_th,
            b_site=b_t, entry_times=entries, exit_times=exits,
            localized_t=localized_t, localized_th=localized_th, aged=aged,
            sandwich=sandwich, total_steps=self.total,
            s_fallbacks=self.s_fallbacks, step_cap_exceeded=self.capped,
            beyond_valleys=beyond, no_deep_valley=(n_v == 0),
        )


def _run_direct(run: _TrajectoryRun) -> TrajectorySummary:
    cfg = run.cfg
    m_sites: list[int] = []
    for v in run.valleys:
        _, b, d = _valley_abd(v)
        m_sites += [b, d]
    hit_times = np.full(len(m_sites), -1.0)
    site_map = _build_site_map(run.win, m_sites) if m_sites else _EMPTY_MAP
    x, n, state = run.x, 0, run.state
    for obs in (cfg.t, cfg.th):
        while n < obs:
            status, x, n, state = K.direct_steps(
                run.win.omega, run.win.lo, x, n, obs, _FAR_SITE,
                site_map, hit_times, state)
            state = _u64(state)
            if status == K.NEED_LEFT:
                run.win.extend_left()
                site_map = _build_site_map(run.win, m_sites) if m_sites else _EMPTY_MAP
            elif status == K.NEED_RIGHT:
                run.win.extend_right()
                site_map = _build_site_map(run.win, m_sites) if m_sites else _EMPTY_MAP
        run.obs_x[obs] = int(x)
    run.total = n
    run.state = state
    for k in range(len(run.valleys)):
        tb, td = hit_times[2 * k], hit_times[2 * k + 1]
        if tb < 0:
            break
        run.entries.append(int(tb))
        run.exits.append(int(td) if td >= 0 else None)
    return run.summary()


def _hybrid_delta_leg(run: _TrajectoryRun, stop_site: int) -> str:
    """Direct leg until ``stop_site``, the next observation, or the cap.

    Returns "hit", "obs", or "capped"; model time equals simulated steps
    within a direct leg.
    """
    run.commit_due()
    if not run.obs:
        return "obs"
    while True:
        next_obs = run.obs[0]
        span = min(next_obs - run.T, run.budget())
        if span <= 0:
            run.capped = True
            return "capped"
        status, x, n, state = K.direct_steps(
            run.win.omega, run.win.lo, run.x, 0, span, stop_site,
            _EMPTY_MAP, _EMPTY_TIMES, run.state)
        run.state = _u64(state)
        run.x = int(x)
        run.T += int(n)
        run.charge(n)
        if status == K.NEED_LEFT:
            run.win.extend_left()
            continue
        if status == K.NEED_RIGHT:
            run.win.extend_right()
            continue
        if status == K.HIT:
            return "hit"
        if run.T == next_obs:
            run.obs_x[next_obs] = run.x
            run.obs.pop(0)
            return "obs"
        run.capped = True
        return "capped"


def _hybrid_crossing(run: _TrajectoryRun, a: int, b: int, d: int) -> str:
    """One valley crossing with observation awareness.

    Phase A runs the geometric-attempt construction, whose positions are
    unknown between excursion boundaries, and aborts exactly on the event
    {crossing duration >= o} where o is the offset of the next pending
    observation.  The redraw then samples a plain reflected crossing with
    position reads, rejected until it realizes the abort event, so the
    output law is exactly the crossing law sequentially composed with the
    observation reads.

    The escape-budget fallback is decided by a coin flipped *before* phase
    A, with the budget's exact blow probability (1 - esc)^budget.  Deciding
    it inside the escape loop would bias the mixture: the loop is only
    reached when the failure part stayed below o, so a budget event found
    there is not independent of the construction, and an unconditioned
    redraw then suppresses early completions.  The up-front coin is
    independent by fiat, and the fallback branch reads the crossing from
    one plain reflected walk, so each branch — and hence the mixture — is
    the exact crossing law.  Returns "crossed", "obs", or "capped".
    """
    run.commit_due()
    if not run.obs:
        return "obs"
    t_entry = run.T
    o_rel = run.obs[0] - t_entry
    omega, lo = run.win.omega, run.win.lo
    esc = escape_prob(run.win.env, b, d)
    state = run.state

    state, u = K.u01(state)
    state = _u64(state)
    p_blow = math.exp(S_REJECTION_BUDGET * math.log1p(-min(esc, 1.0)))
    redraw = u < p_blow
    conditioned = False
    if redraw:
        run.s_fallbacks += 1

    t_cur = 0
    if not redraw:
        state, u = K.u01(state)
        state = _u64(state)
        n_fail = _geometric_failures(esc, u)

        # Phase A: excursions conditioned to return, then one conditioned
        # to escape (the up-front coin already ruled out a budget blow, so
        # the escape loop may run until it succeeds).  Rejected attempts
        # cost simulated steps but no model time.
        f_done = 0
        while f_done < n_fail:
            if run.budget() <= 0:
                run.capped = True
                run.state = state
                return "capped"
            reached, steps, state = K.excursion_once(omega, lo, a, b, d, state)
            state = _u64(state)
            run.charge(steps)
            if reached:
                continue
            t_cur += int(steps)
            f_done += 1
            if t_cur >= o_rel:
                redraw = True
                conditioned = True
                break
    if not redraw:
        while True:
            if run.budget() <= 0:
                run.capped = True
                run.state = state
                return "capped"
            reached, steps, state = K.excursion_once(omega, lo, a, b, d, state)
            state = _u64(state)
            run.charge(steps)
            if not reached:
                continue
            if t_cur + int(steps) >= o_rel:
                redraw = True
                conditioned = True
                break
            t_cur += int(steps)
            run.T = t_entry + t_cur
            run.x = d
            run.exits.append(run.T)
            run.state = state
            return "crossed"

    # Redraw: plain reflected crossing with position reads at the pending
    # observation offsets.  Phase-A time is discarded; nothing was
    # committed inside it, so the discard is clean.
    rel1 = o_rel
    rel2 = run.obs[1] - t_entry if len(run.obs) > 1 else _FAR_SITE
    last_rel = rel2 if rel2 != _FAR_SITE else rel1
    while True:
        budget = run.budget()
        if budget <= 0:
            run.capped = True
            run.state = state
            return "capped"
        cap = min(last_rel, budget)
        status, steps, x1, x2, _xf, state = K.crossing_direct_obs(
            omega, lo, a, b, d, rel1, rel2, cap, state)
        state = _u64(state)
        run.charge(steps)
        steps = int(steps)
        if conditioned and status == 1 and steps < rel1:
            continue          # the redraw must realize {duration >= o}
        break
    run.state = state
    for rel, pos in ((rel1, x1), (rel2, x2)):
        if rel != _FAR_SITE and rel <= steps and run.obs:
            run.obs_x[run.obs[0]] = int(pos)
            run.obs.pop(0)
    if status == 1:
        run.T = t_entry + steps
        run.x = d
        run.exits.append(run.T)
        return "crossed"
    if not run.obs:
        return "obs"
    run.capped = True
    return "capped"


def _run_hybrid(run: _TrajectoryRun) -> TrajectorySummary:
    k = 0
    n_v = len(run.valleys)
    while run.obs and not run.capped:
        if k < n_v:
            a, b, d = _valley_abd(run.valleys[k])
            outcome = _hybrid_delta_leg(run, b)
            if outcome != "hit":
                continue
            run.entries.append(run.T)
            if _hybrid_crossing(run, a, b, d) == "crossed":
                k += 1
        else:
            _hybrid_delta_leg(run, _FAR_SITE)
    return run.summary()


def run_trajectory(env: Environment, valleys: Sequence, cfg: WalkConfig,
                   replica: int = 0) -> TrajectorySummary:
    """Simulate one replica to time round(t*h) and summarize it.

    ``valleys`` is the deep-valley list computed at horizon t; the same
    list drives the level bookkeeping at both observation times.  Entry
    times are first visits of the b_k in direct mode and the stitched
    composition times in hybrid mode; the two coincide except when
    consecutive valleys overlap, a discrepancy the mode-equivalence audit
    measures.
    """
    run = _TrajectoryRun(env, valleys, cfg, replica)
    if cfg.mode == "direct":
        return _run_direct(run)
    return _run_hybrid(run)


def run_levels_only(env: Environment, valleys: Sequence, t: float,
                    seed: int) -> LevelsSample:
    """Valley entry/exit times by edge-count durations alone (no positions).

    Inter-valley legs are unreflected first passages; crossings reflect at
    a_k, matching the hybrid convention.  Cost per replica scales with the
    total valley width, not with t, which makes quenched law-of-level
    batches at large horizons affordable.  Sampling stops once the running
    time passes t (later entries cannot change the level).
    """
    state = _u64(seed)
    win = _initial_window(env, valleys, max(int(t), 1))
    T = 0.0
    entries: list[float] = []
    exits: list[float] = []
    prev = 0
    for v in valleys:
        a, b, d = _valley_abd(v)
        dur, state = _nb_passage(win, prev, b, None, state)
        T += dur
        entries.append(T)
        if T > t:
            break
        dur, state = _nb_passage(win, b, d, a, state)
        T += dur
        exits.append(T)
        prev = d
        if T > t:
            break
    level = sum(1 for v in entries if v <= t)
    return LevelsSample(level=level, entry_times=tuple(entries),
                        exit_times=tuple(exits))
