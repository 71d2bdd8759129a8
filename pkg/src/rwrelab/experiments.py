"""Reference limit laws and the experiments that confront simulation with them.

Three layers:

* Closed-form limit functions — the generalized arcsine aging value and the
  two Dynkin renewal laws — computed by adaptive quadrature with every
  endpoint singularity removed by an exact power substitution, so the
  advertised 1e-10 absolute accuracy is real and not endpoint luck.

* Small statistical tools: Wilson score intervals, total-variation distance
  on finite laws, and a Kolmogorov-Smirnov distance that supports censored
  right tails (needed because the forward renewal time has infinite mean).

* Experiment batches: aging/localization indicator batches over fresh
  environments (annealed), the level-law vs clock-model comparison over a
  panel of fixed environments (quenched), renewal-law sampling, the
  excursion-height tail slope, and an oracle battery that pits every closed
  form against the extended-precision chain solver.

Determinism contract: every replica draws from streams addressed as
``(master_seed, label, index...)``, so results are a pure function of
(config, master seed) — the worker count changes scheduling only.  Batches
fan out over processes with a fork context after the jit kernels are warm.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate

from . import _kernels as K
from .envmodel import EnvSpec, sample_environment
from .potential import (
    ScanExhaustedError,
    build_potential,
    deep_valleys,
    estimate_mean_excursion_length,
    excursion_heights,
    valley_weight,
)
from .quenched import (
    IntervalProblem,
    chain_oracle,
    escape_prob,
    expected_hit_time_reflected,
    hit_prob,
    invariant_measure,
)
from .rng import substream_seed
from .walker import (
    DEFAULT_STEP_CAP,
    WalkConfig,
    clock_model,
    run_levels_only,
    run_trajectory,
)

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "arcsine_aging_value",
    "dynkin_left_cdf",
    "dynkin_right_cdf",
    "wilson_interval",
    "tv_distance",
    "ks_distance",
    "empirical_law",
    "CellResult",
    "ExperimentReport",
    "TrajectoryBatch",
    "trajectory_batch",
    "estimate_aging",
    "localization_rate",
    "RenewalResult",
    "renewal_test",
    "ClockCompareResult",
    "clock_model_comparison",
    "TailSlope",
    "excursion_tail_slope",
    "OracleBattery",
    "oracle_battery",
    "write_report",
    "write_rows",
]

REPORT_SCHEMA_VERSION = "1"

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=200)


# ---------------------------------------------------------------------------
# reference limit laws
# ---------------------------------------------------------------------------


def _quad(f: Callable[[float], float], a: float, b: float) -> float:
    if not b > a:
        return 0.0
    val, _err = integrate.quad(f, a, b, **_QUAD_OPTS)
    return val


def _beta_piece_quad(p: float, q: float, x1: float, x2: float) -> float:
    """integral of y^(p-1) (1-y)^(q-1) over [x1, x2] inside [0, 1].

    The y -> u^(1/p) substitution flattens the left-endpoint singularity
    exactly (the integrand becomes (1 - u^(1/p))^(q-1) / p), and 1-y ->
    w^(1/q) does the same on the right; splitting at 1/2 keeps each
    substituted integrand smooth on its whole interval.
    """
    total = 0.0
    mid_lo, mid_hi = min(x2, 0.5), max(x1, 0.5)
    if x1 < mid_lo:  # branch with the y -> 0 singularity
        total += _quad(
            lambda u: (1.0 - u ** (1.0 / p)) ** (q - 1.0) / p,
            x1**p,
            mid_lo**p,
        )
    if mid_hi < x2:  # branch with the y -> 1 singularity
        total += _quad(
            lambda w: (1.0 - w ** (1.0 / q)) ** (p - 1.0) / q,
            (1.0 - x2) ** q,
            (1.0 - mid_hi) ** q,
        )
    return total


def _check_kappa(kappa: float) -> float:
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa!r}")
    return float(kappa)


def arcsine_aging_value(kappa: float, h: float) -> float:
    """The aging limit: sin(kappa pi)/pi * integral_0^(1/h) y^(kappa-1) (1-y)^(-kappa) dy.

    Strictly decreasing in h, with value 1 as h -> 1+ and 0 as h -> infinity;
    at kappa = 1/2 it collapses to (2/pi) arcsin(1/sqrt(h)).
    """
    kappa = _check_kappa(kappa)
    if not h > 1.0:
        raise ValueError(f"aging ratio h must exceed 1, got {h!r}")
    integral = _beta_piece_quad(kappa, 1.0 - kappa, 0.0, 1.0 / h)
    return math.sin(kappa * math.pi) / math.pi * integral


def dynkin_left_cdf(kappa: float, x1: float, x2: float) -> float:
    """Mass of the backward-renewal (generalized arcsine) law on [x1, x2].

    Density sin(kappa pi)/pi * (1-x)^(kappa-1) x^(-kappa) on (0, 1).
    """
    kappa = _check_kappa(kappa)
    if not 0.0 <= x1 < x2 <= 1.0:
        raise ValueError(f"need 0 <= x1 < x2 <= 1, got ({x1!r}, {x2!r})")
    integral = _beta_piece_quad(1.0 - kappa, kappa, x1, x2)
    return math.sin(kappa * math.pi) / math.pi * integral


def dynkin_right_cdf(kappa: float, x1: float, x2: float) -> float:
    """Mass of the forward-renewal law on [x1, x2], x2 = inf allowed.

    Density sin(kappa pi)/pi / (x^kappa (1+x)) on (0, inf).  Quadrature runs
    directly on this density: x -> u^(1/(1-kappa)) removes the origin
    singularity, and the tail is folded through x -> 1/s (whose own
    s^(kappa-1) singularity at 0 is removed by s -> v^(1/kappa)), so the
    identity with the aging value is a genuine cross-check of two
    independent integral representations, not one routine called twice.
    """
    kappa = _check_kappa(kappa)
    if not (0.0 <= x1 < x2):
        raise ValueError(f"need 0 <= x1 < x2, got ({x1!r}, {x2!r})")
    total = 0.0
    lo, hi = x1, min(x2, 1.0)
    if lo < hi:  # [x1, 1] branch carries the x -> 0 singularity
        e = 1.0 - kappa
        total += _quad(
            lambda u: 1.0 / ((1.0 + u ** (1.0 / e)) * e),
            lo**e,
            hi**e,
        )
    lo = max(x1, 1.0)
    if lo < x2:  # [1, x2] branch folded through x -> 1/s
        s_hi = 1.0 / lo
        s_lo = 0.0 if math.isinf(x2) else 1.0 / x2
        total += _quad(
            lambda v: 1.0 / ((1.0 + v ** (1.0 / kappa)) * kappa),
            s_lo**kappa,
            s_hi**kappa,
        )
    return math.sin(kappa * math.pi) / math.pi * total


# ---------------------------------------------------------------------------
# statistical tools
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} outside [0, {trials}]")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    from scipy.stats import norm

    z = float(norm.ppf(0.5 * (1.0 + level)))
    n = float(trials)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    # the endpoints are exactly 0 at p = 0 and exactly 1 at p = 1 (the
    # half-width then equals the center's distance to the boundary); snap
    # them so float round-off cannot push a degenerate estimate outside
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


def empirical_law(values: Iterable[int]) -> dict[int, float]:
    """Finite empirical distribution of integer-valued draws."""
    counts = Counter(int(v) for v in values)
    n = sum(counts.values())
    if n == 0:
        raise ValueError("empirical law of an empty sample")
    return {k: c / n for k, c in sorted(counts.items())}


def tv_distance(p: Mapping[Any, float], q: Mapping[Any, float]) -> float:
    """Total-variation distance: half the L1 distance over the union support."""
    support = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in support)


def ks_distance(sample: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray],
                *, n_total: int | None = None, xmax: float | None = None) -> float:
    """sup_x |empirical CDF - cdf(x)|, optionally truncated at xmax.

    ``cdf`` must accept a numpy array.  With ``xmax``, the supremum runs over
    x <= xmax only and ``n_total`` may exceed ``len(sample <= xmax)`` to
    account for censored observations known to lie beyond the truncation
    point (they enter the denominator but contribute no jump inside it).
    """
    xs = np.sort(np.asarray(list(sample), dtype=float))
    n = len(xs) if n_total is None else int(n_total)
    if n < 1:
        raise ValueError("KS distance of an empty sample")
    if xmax is not None:
        xs = xs[xs <= xmax]
    if len(xs) == 0:
        d = 0.0
    else:
        f = np.asarray(cdf(xs), dtype=float)
        i = np.arange(len(xs), dtype=float)
        d = max(float(np.max(f - i / n)), float(np.max((i + 1.0) / n - f)))
    if xmax is not None:
        f_end = float(np.asarray(cdf(np.asarray([xmax])), dtype=float)[0])
        d = max(d, abs(len(xs) / n - f_end))
    return d


def _cdf_on_grid(increment: Callable[[float, float], float], grid: np.ndarray) -> np.ndarray:
    """Cumulative values of a law on a grid from its interval-mass function."""
    masses = [increment(float(a), float(b)) for a, b in zip(grid[:-1], grid[1:])]
    out = np.empty(len(grid))
    out[0] = 0.0
    np.cumsum(masses, out=out[1:])
    return out


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    """One grid cell of an experiment: estimate, interval, reference, flags."""

    t: int
    h: float | None
    eta: float | None
    estimate: float | None
    ci_lo: float | None
    ci_hi: float | None
    reference: float | None
    n: int
    flags: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if (self.ci_lo is None) != (self.ci_hi is None):
            raise ValueError("ci_lo and ci_hi must be given together")
        if self.ci_lo is not None:
            if self.estimate is None:
                raise ValueError("confidence interval without an estimate")
            if not self.ci_lo <= self.estimate <= self.ci_hi:
                raise ValueError(
                    f"interval [{self.ci_lo}, {self.ci_hi}] does not contain "
                    f"the estimate {self.estimate}"
                )

    def as_json(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "h": self.h,
            "eta": self.eta,
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "reference": self.reference,
            "n": self.n,
            "flags": dict(sorted(self.flags.items())),
        }


@dataclass
class ExperimentReport:
    """Serializable outcome of one experiment run.

    Everything outside ``manifest["execution"]`` is a pure function of
    (config, master seed); the execution object quarantines worker counts,
    wall times and timestamps so byte-level report comparisons can simply
    drop it.
    """

    experiment: str
    config: dict[str, Any]
    kappa: float
    grid: list[dict[str, Any]]
    cells: list[CellResult]
    distances: dict[str, Any]
    manifest: dict[str, Any]
    schema: str = REPORT_SCHEMA_VERSION

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": self.schema,
            "experiment": self.experiment,
            "config": self.config,
            "kappa": self.kappa,
            "grid": self.grid,
            "cells": [c.as_json() for c in self.cells],
            "distances": self.distances,
            "manifest": self.manifest,
        }

    def body_bytes(self) -> bytes:
        """Canonical bytes of the deterministic report body."""
        body = self.to_json()
        body["manifest"] = {k: v for k, v in self.manifest.items() if k != "execution"}
        return json.dumps(body, sort_keys=True, separators=(",", ":"),
                          allow_nan=False).encode()


def write_report(report: ExperimentReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_rows(path: str, rows: Sequence[Mapping[str, Any]]) -> None:
    """Per-replica rows as CSV with a sorted union header (None -> empty)."""
    import csv

    header: list[str] = sorted({k for row in rows for k in row})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                ["" if row.get(k) is None else row.get(k) for k in header]
            )


# ---------------------------------------------------------------------------
# batch fan-out
# ---------------------------------------------------------------------------


def _fanout(fn: Callable[[tuple], dict], tasks: list[tuple], workers: int) -> list[dict]:
    """Map ``fn`` over tasks, optionally across forked worker processes.

    Results come back in task order whatever the scheduling, and every task
    derives its randomness from its own substream address, so the worker
    count cannot change any numeric output.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    K.warm_up()  # compile before forking so children inherit the jit cache
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("fork")) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


def _fresh_valleys(spec: EnvSpec, t: float, master_seed: int, index: int,
                   *, extra: int = 0):
    """Sample a fresh environment and scan its deep valleys.

    Returns (potential, valleys) or (None, flag-string) when the scan gives
    up; the environment window starts small and grows on demand (extension
    is per-site addressed, so growth never changes already-sampled sites).
    """
    env_seed = substream_seed(master_seed, "env", index)
    env = sample_environment(spec, -64, 512, env_seed)
    pot = build_potential(env)
    try:
        valleys = deep_valleys(pot, float(t), _extra=extra)
    except ScanExhaustedError:
        return None, "scan_exhausted"
    return pot, valleys


def _trajectory_replica(task: tuple) -> dict[str, Any]:
    spec, t, h, eta, master_seed, i, mode, step_cap = task
    pot, valleys = _fresh_valleys(spec, t, master_seed, i, extra=2)
    if pot is None:
        return {"replica": i, "flag": valleys}
    cfg = WalkConfig(t=int(t), h=float(h), eta=float(eta),
                     master_seed=master_seed, step_cap=step_cap, mode=mode)
    s = run_trajectory(pot.env, valleys, cfg, replica=i)
    flag = None
    if s.no_deep_valley:
        flag = "no_deep_valley"
    elif s.step_cap_exceeded:
        flag = "step_cap_exceeded"
    return {
        "replica": i,
        "flag": flag,
        "aged": s.aged,
        "localized_t": s.localized_t,
        "localized_th": s.localized_th,
        "sandwich": s.sandwich,
        "level_t": s.level_t,
        "level_th": s.level_th,
        "x_t": s.x_t,
        "x_th": s.x_th,
        "total_steps": s.total_steps,
        "s_fallbacks": s.s_fallbacks,
    }


_INDICATORS = ("aged", "localized_t", "localized_th", "sandwich")

# Denominator for each indicator: the limit statements are unconditional, but
# P(no deep valley entered by the relevant observation time) vanishes only
# like a power of 1/log t, far too slowly to average over at any reachable t.
# Replicas whose walk never entered a deep valley within the indicator's span
# carry the no-deep-valley flag and are excluded with counts; the conditional
# estimator shares the unconditional limit and actually attains it.
_TRIAL_LEVEL = {
    "aged": "level_th",
    "localized_t": "level_t",
    "localized_th": "level_th",
    "sandwich": "level_t",
}


@dataclass
class TrajectoryBatch:
    """Aggregated annealed trajectory batch (one (t, h, eta) cell).

    ``n_valid`` counts replicas whose trajectory ran to completion;
    ``trials[ind]`` restricts those to replicas that entered at least one
    deep valley within the indicator's observation span (by t for the
    localization and sandwich indicators, by th for the aging ones), and
    ``counts[ind]`` are the successes among them.
    """

    t: int
    h: float
    eta: float
    mode: str
    n_requested: int
    n_valid: int
    counts: dict[str, int]
    trials: dict[str, int]
    excluded: dict[str, int]
    level_hist: dict[int, int]
    rows: list[dict[str, Any]]

    def rate(self, indicator: str) -> float:
        if self.trials[indicator] == 0:
            raise ValueError(f"no replica entered a deep valley within the "
                             f"{indicator!r} observation span")
        return self.counts[indicator] / self.trials[indicator]

    def cell(self, indicator: str, reference: float | None,
             level: float = 0.99) -> CellResult:
        flags = dict(self.excluded)
        not_entered = self.n_valid - self.trials[indicator]
        if not_entered:
            flags["no_deep_valley"] = flags.get("no_deep_valley", 0) + not_entered
        n = self.trials[indicator]
        if n == 0:
            return CellResult(t=self.t, h=self.h, eta=self.eta, estimate=None,
                              ci_lo=None, ci_hi=None, reference=reference,
                              n=0, flags=flags)
        lo, hi = wilson_interval(self.counts[indicator], n, level)
        return CellResult(
            t=self.t, h=self.h, eta=self.eta,
            estimate=self.rate(indicator), ci_lo=lo, ci_hi=hi,
            reference=reference, n=n, flags=flags,
        )


def trajectory_batch(spec: EnvSpec, t: float, h: float, eta: float,
                     n_replicas: int, seed: int, *,
                     mode: str = "geometric-hybrid", workers: int = 1,
                     step_cap: int = DEFAULT_STEP_CAP) -> TrajectoryBatch:
    """Fresh environment + one trajectory per replica; indicator counts.

    The annealed viewpoint: each replica resamples the environment, so
    indicator frequencies estimate the annealed probabilities that the
    limit theorems are stated for.  Replicas whose protocol failed (scan
    exhausted, step cap) are excluded from everything; replicas that ran
    but never entered a deep valley within an indicator's span are
    excluded from that indicator's denominator (see ``_TRIAL_LEVEL``).
    """
    if n_replicas < 1:
        raise ValueError(f"need at least one replica, got {n_replicas}")
    if not spec.non_lattice:
        raise ValueError("limit-law experiments require a non-lattice spec")
    tasks = [(spec, float(t), float(h), float(eta), int(seed), i, mode, int(step_cap))
             for i in range(n_replicas)]
    rows = _fanout(_trajectory_replica, tasks, workers)
    counts = {name: 0 for name in _INDICATORS}
    trials = {name: 0 for name in _INDICATORS}
    excluded: dict[str, int] = {}
    level_hist: Counter = Counter()
    n_valid = 0
    for row in rows:
        flag = row.get("flag")
        if flag is not None:
            excluded[flag] = excluded.get(flag, 0) + 1
            continue
        n_valid += 1
        level_hist[row["level_t"]] += 1
        for name in _INDICATORS:
            if row[_TRIAL_LEVEL[name]] >= 1:
                trials[name] += 1
                counts[name] += bool(row[name])
    return TrajectoryBatch(
        t=int(t), h=float(h), eta=float(eta), mode=mode,
        n_requested=n_replicas, n_valid=n_valid, counts=counts, trials=trials,
        excluded=dict(sorted(excluded.items())),
        level_hist=dict(sorted(level_hist.items())), rows=rows,
    )


def estimate_aging(spec: EnvSpec, t: float, h: float, eta: float,
                   n_replicas: int, seed: int, *,
                   mode: str = "geometric-hybrid", workers: int = 1) -> CellResult:
    """Annealed estimate of P(|X_th - X_t| <= eta log t) with its limit.

    Replicas that never enter a deep valley by time th are flagged
    no_deep_valley and excluded with counts (the flagged fraction vanishes
    in the limit, so the estimator is consistent for the arcsine value).
    """
    batch = trajectory_batch(spec, t, h, eta, n_replicas, seed,
                             mode=mode, workers=workers)
    return batch.cell("aged", arcsine_aging_value(spec.kappa, h))


def localization_rate(spec: EnvSpec, t: float, eta: float,
                      n_replicas: int, seed: int, *, h: float = 2.0,
                      mode: str = "geometric-hybrid", workers: int = 1) -> CellResult:
    """Annealed estimate of P(|X_t - b_(l_t)| <= eta log t); the limit is 1.

    The rate is taken among replicas with l_t >= 1 (a walk that has not yet
    reached any deep valley has no bottom to be localized around); the
    others are flagged no_deep_valley and excluded with counts.
    """
    batch = trajectory_batch(spec, t, h, eta, n_replicas, seed,
                             mode=mode, workers=workers)
    return batch.cell("localized_t", 1.0)


# ---------------------------------------------------------------------------
# renewal laws
# ---------------------------------------------------------------------------


def _levels_replica(task: tuple) -> dict[str, Any]:
    spec, t, horizon, master_seed, i = task
    pot, valleys = _fresh_valleys(spec, t, master_seed, i, extra=2)
    if pot is None:
        return {"replica": i, "flag": valleys}
    if not valleys:
        return {"replica": i, "flag": "no_deep_valley"}
    walk_seed = substream_seed(master_seed, "walk", i)
    ls = run_levels_only(pot.env, valleys, float(horizon), walk_seed)
    entries = ls.entry_times
    level = sum(1 for e in entries if e <= t)
    row: dict[str, Any] = {"replica": i, "flag": None, "level": level}
    if level >= 1:
        row["entry"] = entries[level - 1]
        row["exit"] = ls.exit_times[level - 1] if len(ls.exit_times) >= level else None
        row["next_entry"] = entries[level] if len(entries) > level else None
    return row


@dataclass
class RenewalResult:
    """KS distances of the renewal-time laws plus the sandwich frequency."""

    t: int
    n_requested: int
    n_level_pos: int
    ks_left: float
    n_right: int
    right_censored: int
    ks_right: float
    sandwich_freq: float
    horizon_mult: float
    excluded: dict[str, int]
    rows: list[dict[str, Any]]


def renewal_test(spec: EnvSpec, t: float, n_replicas: int, seed: int, *,
                 horizon_mult: float = 4.0, workers: int = 1,
                 grid_points: int = 1201) -> RenewalResult:
    """Backward/forward renewal times of the valley sequence vs Dynkin laws.

    Left law: T_(l_t)/t on [0, 1].  Right law: T_(l_t + 1)/t - 1, which has
    infinite mean, so sampling stops at ``horizon_mult * t`` and the KS
    comparison is truncated at ``horizon_mult - 1`` with censored draws kept
    in the denominator.  Replicas with l_t = 0 contribute to neither law.
    """
    if n_replicas < 1:
        raise ValueError(f"need at least one replica, got {n_replicas}")
    if not spec.non_lattice:
        raise ValueError("limit-law experiments require a non-lattice spec")
    if not horizon_mult > 1.0:
        raise ValueError(f"horizon multiplier must exceed 1, got {horizon_mult!r}")
    horizon = float(horizon_mult) * float(t)
    tasks = [(spec, float(t), horizon, int(seed), i) for i in range(n_replicas)]
    rows = _fanout(_levels_replica, tasks, workers)

    excluded: dict[str, int] = {}
    left: list[float] = []
    right: list[float] = []
    right_censored = 0
    sandwich = 0
    for row in rows:
        flag = row.get("flag")
        if flag is not None:
            excluded[flag] = excluded.get(flag, 0) + 1
            continue
        if row["level"] < 1:
            continue
        left.append(row["entry"] / float(t))
        if row["exit"] is None or row["exit"] > t:
            sandwich += 1
        if row["next_entry"] is None:
            right_censored += 1
        else:
            right.append((row["next_entry"] - float(t)) / float(t))

    kappa = spec.kappa
    if not left:
        raise RuntimeError("no replica reached a deep valley: cannot form the laws")
    x_left = np.linspace(0.0, 1.0, grid_points)
    f_left = _cdf_on_grid(lambda a, b: dynkin_left_cdf(kappa, a, b), x_left)
    ks_l = ks_distance(left, lambda x: np.interp(x, x_left, f_left))

    xmax = float(horizon_mult) - 1.0
    x_right = np.linspace(0.0, xmax, grid_points)
    f_right = _cdf_on_grid(lambda a, b: dynkin_right_cdf(kappa, a, b), x_right)
    ks_r = ks_distance(right, lambda x: np.interp(x, x_right, f_right),
                       n_total=len(right) + right_censored, xmax=xmax)

    return RenewalResult(
        t=int(t), n_requested=n_replicas, n_level_pos=len(left), ks_left=ks_l,
        n_right=len(right) + right_censored, right_censored=right_censored,
        ks_right=ks_r, sandwich_freq=sandwich / len(left),
        horizon_mult=float(horizon_mult),
        excluded=dict(sorted(excluded.items())), rows=rows,
    )


# ---------------------------------------------------------------------------
# clock model comparison
# ---------------------------------------------------------------------------


def _clock_env(task: tuple) -> dict[str, Any]:
    spec, t, n_walks, n_occ, master_seed, e = task
    pot, valleys = _fresh_valleys(spec, t, master_seed, e)
    if pot is None:
        return {"env": e, "flag": valleys}
    if not valleys:
        return {"env": e, "flag": "no_deep_valley"}
    weights = [valley_weight(pot, v) for v in valleys]
    walk_levels = [
        run_levels_only(pot.env, valleys, float(t),
                        substream_seed(master_seed, "walk", e, i)).level
        for i in range(n_walks)
    ]
    clock_levels = [
        clock_model(weights, float(t),
                    substream_seed(master_seed, "clock", e, i)).level + 1
        for i in range(n_walks)
    ]
    clock_law = empirical_law(clock_levels)
    tv = tv_distance(empirical_law(walk_levels), clock_law)

    row: dict[str, Any] = {
        "env": e, "flag": None, "K": len(valleys), "n_walks": n_walks, "tv": tv,
    }
    if n_occ > 0:
        # Corollary-style occupation check: which valley the walk sits in at
        # time t (0 = outside every valley) vs the clock's index law, on a
        # subsample because positions cost O(t) while levels cost O(width).
        occ_seed = substream_seed(master_seed, "occ", e)
        cfg = WalkConfig(t=int(t), h=1.001, eta=1.0, master_seed=occ_seed,
                         mode="geometric-hybrid")
        spans = [(v.j, v.a, v.d) for v in valleys]
        indices = []
        occ_flagged = 0
        for i in range(n_occ):
            s = run_trajectory(pot.env, valleys, cfg, replica=i)
            if s.step_cap_exceeded or s.x_t is None:
                occ_flagged += 1
                continue
            hit = 0
            for j, a, d in spans:
                if a <= s.x_t <= d:
                    hit = j
                    break
            indices.append(hit)
        row["occ_flagged"] = occ_flagged
        row["occ_tv"] = (tv_distance(empirical_law(indices), clock_law)
                         if indices else None)
    return row


@dataclass
class ClockCompareResult:
    """Per-environment TV distances between law(l_t) and law(l^(e) + 1)."""

    t: int
    n_env: int
    n_walks_per_env: int
    occupation_walks: int
    n_env_valid: int
    tv_values: tuple[float, ...]
    tv_median: float
    tv_quartiles: tuple[float, float]
    occ_tv_values: tuple[float, ...]
    occ_tv_median: float | None
    excluded: dict[str, int]
    rows: list[dict[str, Any]]


def clock_model_comparison(spec: EnvSpec, t: float, n_env: int,
                           n_walks_per_env: int, seed: int, *,
                           occupation_walks: int = 200,
                           workers: int = 1) -> ClockCompareResult:
    """Quenched level law vs the exponential clock surrogate, per environment.

    For each sampled environment the empirical law of l_t over
    ``n_walks_per_env`` walks is compared in total variation to the law of
    l^(e) + 1 over the same number of clock realizations; environments with
    no deep valley are excluded with a count.  A position subsample audits
    the per-valley occupation frequencies against the same clock law.
    """
    if n_env < 1 or n_walks_per_env < 1:
        raise ValueError("need at least one environment and one walk")
    if not spec.non_lattice:
        raise ValueError("limit-law experiments require a non-lattice spec")
    tasks = [(spec, float(t), int(n_walks_per_env), int(occupation_walks),
              int(seed), e) for e in range(n_env)]
    rows = _fanout(_clock_env, tasks, workers)
    excluded: dict[str, int] = {}
    tvs: list[float] = []
    occ_tvs: list[float] = []
    for row in rows:
        flag = row.get("flag")
        if flag is not None:
            excluded[flag] = excluded.get(flag, 0) + 1
            continue
        tvs.append(row["tv"])
        if row.get("occ_tv") is not None:
            occ_tvs.append(row["occ_tv"])
    if not tvs:
        raise RuntimeError("every sampled environment was excluded")
    q1, q3 = np.percentile(tvs, [25.0, 75.0])
    return ClockCompareResult(
        t=int(t), n_env=n_env, n_walks_per_env=n_walks_per_env,
        occupation_walks=occupation_walks, n_env_valid=len(tvs),
        tv_values=tuple(tvs), tv_median=float(np.median(tvs)),
        tv_quartiles=(float(q1), float(q3)),
        occ_tv_values=tuple(occ_tvs),
        occ_tv_median=float(np.median(occ_tvs)) if occ_tvs else None,
        excluded=dict(sorted(excluded.items())), rows=rows,
    )


# ---------------------------------------------------------------------------
# excursion tail
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailSlope:
    """OLS fit of log P(H > h) against h over the sampled excursions."""

    slope: float
    intercept: float
    n_excursions: int
    h_grid: tuple[float, ...]
    survival: tuple[int, ...]


def excursion_tail_slope(spec: EnvSpec, n_excursions: int, seed: int, *,
                         h_min: float = 3.0, h_step: float = 0.5,
                         min_tail: int = 200) -> TailSlope:
    """Slope of the excursion-height tail on one long environment.

    Heights of distinct ladder excursions are i.i.d., so a single window
    containing ``n_excursions`` of them is an exact sample; the fit runs on
    the h-grid where the survival count still exceeds ``min_tail`` (beyond
    that the tail is all noise) and should recover -kappa.
    """
    if n_excursions < 1000:
        raise ValueError("need at least 1000 excursions for a tail fit")
    env_seed = substream_seed(seed, "env", 0)
    hint = int(n_excursions * max(estimate_mean_excursion_length(spec), 1.0) * 1.25)
    env = sample_environment(spec, -8, max(hint, 4096), env_seed)
    pot = build_potential(env)
    heights = np.sort(excursion_heights(pot, n_excursions))
    n = len(heights)
    grid: list[float] = []
    surv: list[int] = []
    h = h_min
    while True:
        count = n - int(np.searchsorted(heights, h, side="right"))
        if count < min_tail:
            break
        grid.append(h)
        surv.append(count)
        h += h_step
    if len(grid) < 4:
        raise RuntimeError(
            f"tail fit needs >= 4 grid points with {min_tail}+ survivors; "
            f"got {len(grid)} — raise n_excursions or lower h_min"
        )
    y = np.log(np.asarray(surv, dtype=float) / n)
    slope, intercept = np.polyfit(np.asarray(grid), y, 1)
    return TailSlope(slope=float(slope), intercept=float(intercept),
                     n_excursions=n, h_grid=tuple(grid), survival=tuple(surv))


# ---------------------------------------------------------------------------
# oracle battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleBattery:
    """Worst relative errors of the closed forms against the chain solver."""

    n_env: int
    max_rel: dict[str, float]
    cases: tuple[dict[str, Any], ...]

    def worst(self) -> float:
        return max(self.max_rel.values())


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def oracle_battery(spec: EnvSpec, n_env: int, seed: int, *,
                   max_len: int = 1000) -> OracleBattery:
    """Closed forms vs extended-precision tridiagonal solve, random layouts.

    Per environment: hitting probabilities both ways, the escape
    probability through its no-return decomposition, the reflected expected
    hitting time, and the invariant measure's stationarity defect (its
    construction-independent check is pi P = pi under the actual transition
    matrix).  Layout draws come from a dedicated substream so the battery
    is reproducible.
    """
    if n_env < 1:
        raise ValueError(f"need at least one environment, got {n_env}")
    if max_len < 8:
        raise ValueError(f"max_len must be >= 8, got {max_len}")
    worst = {"hit_prob": 0.0, "escape_prob": 0.0,
             "expected_hit_time_reflected": 0.0, "invariant_measure": 0.0}
    cases: list[dict[str, Any]] = []
    for k in range(n_env):
        layout = np.random.default_rng(substream_seed(seed, "oracle-layout", k))
        r = int(layout.integers(8, max_len + 1))
        env = sample_environment(spec, -2, r + 2,
                                 substream_seed(seed, "oracle-env", k))

        x = int(layout.integers(1, r))
        sol = chain_oracle(IntervalProblem(env=env, left=0, right=r, start=x))
        rel_hit = max(
            _rel_err(hit_prob(env, x, 0, r), sol.absorb_left_at()),
            _rel_err(hit_prob(env, x, 0, r, complement=True), sol.absorb_right_at()),
        )

        b = int(layout.integers(0, r - 1))
        d = int(layout.integers(b + 1, r + 1))
        esc_sol = chain_oracle(IntervalProblem(env=env, left=b, right=d, start=b + 1))
        rel_esc = _rel_err(escape_prob(env, b, d),
                           env.omega_at(b) * esc_sol.absorb_right_at())

        s = int(layout.integers(0, r))
        time_sol = chain_oracle(IntervalProblem(
            env=env, left=0, right=r, left_boundary="reflecting", start=s))
        rel_time = _rel_err(expected_hit_time_reflected(env, 0, s, r).expectation,
                            time_sol.expected_time_at())

        bb = int(layout.integers(1, r))
        defect = invariant_measure(env, 0, r, bb).stationarity_defect

        worst["hit_prob"] = max(worst["hit_prob"], rel_hit)
        worst["escape_prob"] = max(worst["escape_prob"], rel_esc)
        worst["expected_hit_time_reflected"] = max(
            worst["expected_hit_time_reflected"], rel_time)
        worst["invariant_measure"] = max(worst["invariant_measure"], defect)
        cases.append({
            "env": k, "len": r, "hit": rel_hit, "escape": rel_esc,
            "time": rel_time, "stationarity": defect,
        })
    return OracleBattery(n_env=n_env, max_rel=worst, cases=tuple(cases))
