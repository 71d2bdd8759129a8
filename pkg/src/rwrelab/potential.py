"""Potential landscape and valley anatomy.

The potential of an environment is the random walk ``V(x) = sum_{i=1}^x
log rho_i`` (for x >= 1, with the matching left branch ``-sum_{i=x+1}^0``
for x <= -1 and ``V(0) = 0``).  Everything trapping-related lives here:

* weak descending ladder epochs ``e_0 = 0``,
  ``e_i = inf{k > e_{i-1}: V(k) <= V(e_{i-1})}``, and excursions
  ``[e_i, e_{i+1}]`` with heights ``H_i = max (V(k) - V(e_i))``;
* critical scales ``h_t = log t - log log t``,
  ``n_t = floor(t^kappa log log t)``, ``D_t = (1 + kappa) log t``;
* deep valleys: excursions among the first ``n_t`` whose height clears
  ``h_t``, dressed with the anatomy sites ``a <= b < T^up <= c <= d-bar
  <= d`` plus the sharpening site ``c-bar``;
* disjoint *-valleys built by iterating the same construction through the
  shift by the previous valley's right edge;
* valley weights ``W = 2 sum e^{V(n)-V(m)}`` (log-domain throughout);
* the good-environment events A1-A5 and F_gamma with per-event witnesses.

The :class:`Potential` extends lazily and atomically: readers always see a
consistent snapshot, extension happens under a single writer lock, and the
index-addressed environment sampling guarantees extension never changes
already-computed values.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Any

import numpy as np

from .envmodel import EnvSpec, Environment, sample_environment

__all__ = [
    "CriticalScales",
    "critical_scales",
    "Potential",
    "build_potential",
    "ScanExhaustedError",
    "ladder_epochs",
    "Excursion",
    "excursions",
    "excursion_heights",
    "DeepValley",
    "StarValley",
    "deep_valleys",
    "star_valleys",
    "valley_weight",
    "fluctuations",
    "DiagnosticsConfig",
    "EventReport",
    "GoodEnvReport",
    "good_env_diagnostics",
    "estimate_mean_excursion_length",
]

# Hard ceiling on the number of potential points held in memory; scans that
# would need more report exhaustion instead of looping.
MAX_POINTS = 1 << 24


class ScanExhaustedError(RuntimeError):
    """A bounded landscape scan ran out of budget before finding its target.

    Carries a ``context`` dict naming the search and its bound.  Raised
    instead of silently extending forever: environments that defeat the
    bounded scans are precisely the ones worth surfacing.
    """

    def __init__(self, message: str, context: dict[str, Any] | None = None):
        super().__init__(message)
        self.context = context or {}


# ---------------------------------------------------------------------------
# critical scales
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalScales:
    """The t-dependent scales: ``h`` = critical height h_t, ``n`` = excursion
    count n_t, ``D`` = valley depth D_t."""

    t: float
    kappa: float
    h: float
    n: int
    D: float


def critical_scales(t: float, kappa: float) -> CriticalScales:
    """h_t = log t - log log t; n_t = floor(t^kappa log log t);
    D_t = (1 + kappa) log t.  Requires t >= 3 so that h_t > 0."""
    if t < 3:
        raise ValueError(f"t = {t} too small: critical height needs t >= 3")
    log_t = math.log(t)
    llog_t = math.log(log_t)
    return CriticalScales(
        t=float(t),
        kappa=float(kappa),
        h=log_t - llog_t,
        n=int(math.floor(t**kappa * llog_t)),
        D=(1.0 + kappa) * log_t,
    )


# ---------------------------------------------------------------------------
# the potential itself
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Snapshot:
    """One immutable (environment window, potential values) pair.

    ``V[x - env.lo]`` is the potential at point x, for x in
    ``[env.lo, env.hi]``.
    """

    env: Environment
    V: np.ndarray

    @property
    def lo(self) -> int:
        return self.env.lo

    @property
    def hi(self) -> int:
        return self.env.hi

    def values(self, a: int, b: int) -> np.ndarray:
        """V on points ``a..b`` inclusive (must be covered)."""
        if a < self.lo or b > self.hi:
            raise IndexError(f"points [{a}, {b}] outside window [{self.lo}, {self.hi}]")
        return self.V[a - self.lo : b - self.lo + 1]

    def value(self, x: int) -> float:
        return float(self.values(x, x)[0])


def _potential_values(env: Environment) -> np.ndarray:
    omega = env.omega
    # omega at float-rounding distance of 1 yields log rho = -inf, which the
    # downstream formulas treat as a surely-right site; keep it silent.
    with np.errstate(divide="ignore"):
        log_rho = np.log1p(-omega) - np.log(omega)
    idx0 = -env.lo
    V = np.empty(len(omega))
    V[idx0] = 0.0
    if env.hi >= 1:
        V[idx0 + 1 :] = np.cumsum(log_rho[idx0 + 1 :])
    if env.lo <= -1:
        # V(-1-m) = -(log rho_0 + ... + log rho_{-m}); cumulating from site 0
        # leftward keeps extension bit-stable (prefix of a longer cumsum).
        neg = np.cumsum(log_rho[idx0:0:-1])
        V[:idx0] = -neg[::-1]
    V.flags.writeable = False
    return V


class Potential:
    """Lazily extending potential over one environment realization.

    Immutable from the reader's point of view: every operation grabs one
    :class:`_Snapshot` and works on it.  Extension (single writer, guarded
    by a lock) swaps in a strictly larger snapshot whose overlap with the
    old one is bit-identical.
    """

    def __init__(self, env: Environment):
        if not (env.lo <= 0 <= env.hi):
            raise ValueError(f"environment window [{env.lo}, {env.hi}] must contain 0")
        self._lock = threading.Lock()
        self._snap = _Snapshot(env=env, V=_potential_values(env))

    @property
    def env(self) -> Environment:
        return self._snap.env

    @property
    def spec(self) -> EnvSpec:
        return self._snap.env.spec

    @property
    def lo(self) -> int:
        return self._snap.lo

    @property
    def hi(self) -> int:
        return self._snap.hi

    def snapshot(self) -> _Snapshot:
        return self._snap

    def ensure(self, lo: int, hi: int) -> _Snapshot:
        """Snapshot covering at least points ``[lo, hi]``, extending if needed.

        Growth is geometric (at least doubling) so repeated small requests
        stay amortized-linear.  Raises :class:`ScanExhaustedError` beyond
        ``MAX_POINTS``.
        """
        snap = self._snap
        if lo >= snap.lo and hi <= snap.hi:
            return snap
        with self._lock:
            snap = self._snap
            if lo >= snap.lo and hi <= snap.hi:
                return snap
            width = snap.hi - snap.lo + 1
            new_lo = snap.lo if lo >= snap.lo else min(lo, snap.lo - width)
            new_hi = snap.hi if hi <= snap.hi else max(hi, snap.hi + width)
            if new_hi - new_lo + 1 > MAX_POINTS:
                raise ScanExhaustedError(
                    f"potential window [{new_lo}, {new_hi}] exceeds {MAX_POINTS} points",
                    {"search": "extension", "lo": new_lo, "hi": new_hi},
                )
            env = snap.env.extended(new_lo, new_hi)
            new_snap = _Snapshot(env=env, V=_potential_values(env))
            self._snap = new_snap
            return new_snap

    def values(self, a: int, b: int) -> np.ndarray:
        return self.ensure(a, b).values(a, b)

    def value(self, x: int) -> float:
        return float(self.values(x, x)[0])

    def omega(self, a: int, b: int) -> np.ndarray:
        """Environment slice for sites ``a..b`` inclusive."""
        return self.ensure(a, b).env.slice(a, b)


def build_potential(env: Environment) -> Potential:
    return Potential(env)


# ---------------------------------------------------------------------------
# ladder epochs and excursions
# ---------------------------------------------------------------------------


def _epochs_in(snap: _Snapshot, hi_point: int) -> np.ndarray:
    """All weak descending ladder epochs (e_0 = 0 included) within [0, hi_point]."""
    V = snap.values(0, hi_point)
    if len(V) == 1:
        return np.zeros(1, dtype=np.int64)
    run_min = np.minimum.accumulate(V)
    hits = np.flatnonzero(V[1:] <= run_min[:-1]) + 1
    return np.concatenate([np.zeros(1, dtype=np.int64), hits.astype(np.int64)])


def ladder_epochs(pot: Potential, count: int | None = None, *, bound: int | None = None) -> np.ndarray:
    """Ladder epochs ``e_0, e_1, ...`` on the nonnegative axis.

    Exactly one of ``count`` and ``bound`` must be given: ``count`` returns
    ``e_0..e_count`` (extending the landscape as needed, raising
    :class:`ScanExhaustedError` past the global point budget), ``bound``
    returns every epoch found in ``[0, bound]`` — a monotone-increasing
    potential then yields just ``[0]``, reporting the exhausted scan by
    absence rather than looping.
    """
    if (count is None) == (bound is None):
        raise ValueError("pass exactly one of count= or bound=")
    if bound is not None:
        return _epochs_in(pot.ensure(0, bound), bound)
    if count < 0:
        raise ValueError("count must be >= 0")
    hi = pot.hi  # scan what is already sampled before extending
    while True:
        snap = pot.ensure(0, hi)  # raises ScanExhaustedError past MAX_POINTS
        epochs = _epochs_in(snap, snap.hi)
        if len(epochs) > count:
            return epochs[: count + 1]
        hi = 2 * max(snap.hi, 256)


@dataclass(frozen=True)
class Excursion:
    """Excursion ``[start, end] = [e_i, e_{i+1}]`` with its height."""

    index: int
    start: int
    end: int
    height: float


def _heights_from_epochs(snap: _Snapshot, epochs: np.ndarray) -> np.ndarray:
    """H_i over the closed excursions defined by ``epochs`` (len-1 heights).

    The maximum over ``[e_i, e_{i+1})`` equals the maximum over the closed
    interval because ``V(e_{i+1}) <= V(e_i)`` (ladder property) and the left
    endpoint is included.
    """
    V = snap.values(0, int(epochs[-1]))
    tops = np.maximum.reduceat(V, epochs[:-1])
    return tops - V[epochs[:-1]]


def excursion_heights(pot: Potential, n: int) -> np.ndarray:
    """Heights ``H_0 .. H_{n-1}`` of the first n excursions."""
    epochs = ladder_epochs(pot, count=n)
    return _heights_from_epochs(pot.ensure(0, int(epochs[-1])), epochs)


def excursions(pot: Potential, n: int) -> list[Excursion]:
    epochs = ladder_epochs(pot, count=n)
    heights = _heights_from_epochs(pot.ensure(0, int(epochs[-1])), epochs)
    return [
        Excursion(index=i, start=int(epochs[i]), end=int(epochs[i + 1]), height=float(heights[i]))
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# diagnostics configuration
# ---------------------------------------------------------------------------

_MEAN_SPACING_CACHE: dict[tuple, float] = {}
_MEAN_SPACING_SEED = 0x1ADDE12
_MEAN_SPACING_COUNT = 20_000


def _spec_cache_key(spec: EnvSpec) -> tuple:
    return (spec.family, tuple(sorted(spec.params.items())))


def estimate_mean_excursion_length(spec: EnvSpec) -> float:
    """Deterministic estimate of E[e_1] for the law, by one fixed-seed scan.

    Computed once per parameter set and cached; used for the default C'.
    """
    key = _spec_cache_key(spec)
    if key not in _MEAN_SPACING_CACHE:
        env = sample_environment(spec, 0, 4 * _MEAN_SPACING_COUNT, _MEAN_SPACING_SEED)
        epochs = ladder_epochs(Potential(env), count=_MEAN_SPACING_COUNT)
        _MEAN_SPACING_CACHE[key] = float(epochs[-1]) / _MEAN_SPACING_COUNT
    return _MEAN_SPACING_CACHE[key]


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Constants for the good-environment events.

    ``c1`` caps the total excursion length (A1: ``e_{n_t} <= c1 n_t``),
    ``c2`` the valley extent (A4: ``d_j - a_j <= c2 log t``), ``c3`` the
    sharpness floor (A5: rim at least ``c3 eta log t``); ``gamma`` bounds the
    inner fluctuations (F_gamma) and ``eta`` sets the bottom window.  The
    strict constraint ``c3 * c2 < 2/3`` is enforced.
    """

    t: float
    c1: float
    c2: float
    c3: float
    gamma: float = 1.0 / 6.0
    eta: float = 0.3

    def __post_init__(self):
        for name in ("t", "c1", "c2", "c3", "gamma", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"DiagnosticsConfig.{name} must be > 0")
        if not self.c3 * self.c2 < 2.0 / 3.0:
            raise ValueError(
                f"need c3 * c2 < 2/3, got {self.c3 * self.c2!r}"
            )

    @classmethod
    def defaults(cls, spec: EnvSpec, t: float) -> "DiagnosticsConfig":
        """Default constants: c1 = 4 E[e_1]-estimate, c2 = 40/kappa,
        c3 = min(kappa/8, 2/(3 c2)) backed off a hair to keep the strict
        inequality, gamma = 1/6, eta = 0.3."""
        c1 = 4.0 * estimate_mean_excursion_length(spec)
        c2 = 40.0 / spec.kappa
        c3 = min(spec.kappa / 8.0, 2.0 / (3.0 * c2)) * (1.0 - 1e-9)
        return cls(t=float(t), c1=c1, c2=c2, c3=c3)

    def as_json(self) -> dict[str, float]:
        return {
            "t": self.t,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "gamma": self.gamma,
            "eta": self.eta,
        }


# ---------------------------------------------------------------------------
# deep valleys
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeepValley:
    """One deep valley: anatomy sites, height, and weight.

    ``sigma`` is the (0-based) index of the generating excursion; sites
    satisfy ``a <= b < t_up <= c <= d_bar <= d`` and ``c <= c_bar <= d_bar``.
    """

    j: int
    sigma: int
    a: int
    b: int
    t_up: int
    c: int
    c_bar: int
    d_bar: int
    d: int
    height: float
    weight: float
    log_weight: float

    def to_json(self) -> dict[str, Any]:
        return {
            "j": self.j,
            "sigma": self.sigma,
            "a": self.a,
            "b": self.b,
            "t_up": self.t_up,
            "c": self.c,
            "c_bar": self.c_bar,
            "d_bar": self.d_bar,
            "d": self.d,
            "height": self.height,
            "weight": self.weight,
            "log_weight": self.log_weight,
        }


@dataclass(frozen=True)
class StarValley:
    """One *-valley: the iterated-shift construction's sextuplet plus gamma."""

    j: int
    gamma: int
    a: int
    b: int
    t_star: int
    c: int
    d_bar: int
    d: int
    height: float

    def sites(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)


def _scan_bound(scales: CriticalScales, cfg: DiagnosticsConfig) -> int:
    return int(math.ceil(10.0 * cfg.c2 * math.log(scales.t)))


def _search_left_rise(pot: Potential, b: int, target: float, bound: int,
                      what: str) -> int:
    """sup{k <= b : V(k) - V(b) >= target}, scanning at most ``bound`` sites left."""
    snap = pot.snapshot()
    v_b = pot.value(b)
    lo_window = max(snap.lo, b - bound)
    while True:
        seg = pot.values(lo_window, b)
        hits = np.flatnonzero(seg - v_b >= target)
        if len(hits):
            return lo_window + int(hits[-1])
        if lo_window <= b - bound:
            raise ScanExhaustedError(
                f"{what}: no rise of {target:.3g} within {bound} sites left of {b}",
                {"search": what, "origin": b, "bound": bound},
            )
        lo_window = max(b - bound, lo_window - max(bound // 4, 256))


def _search_right_first(pot: Potential, start: int, bound: int, what: str,
                        predicate) -> int:
    """inf{k >= start : predicate(V(k))}, scanning at most ``bound`` sites right.

    ``predicate`` maps a V-array to a boolean array.
    """
    hi_window = min(pot.snapshot().hi, start + bound)
    hi_window = max(hi_window, start)
    while True:
        seg = pot.values(start, hi_window)
        hits = np.flatnonzero(predicate(seg))
        if len(hits):
            return start + int(hits[0])
        if hi_window >= start + bound:
            raise ScanExhaustedError(
                f"{what}: not found within {bound} sites right of {start}",
                {"search": what, "origin": start, "bound": bound},
            )
        hi_window = min(start + bound, hi_window + max(bound // 4, 256))


def _anatomy_from_sigma(pot: Potential, epochs: np.ndarray, sigma: int, j: int,
                        scales: CriticalScales, cfg: DiagnosticsConfig) -> DeepValley:
    """Dress excursion ``sigma`` (known deep) with the full valley anatomy."""
    b = int(epochs[sigma])
    d_bar = int(epochs[sigma + 1])
    snap = pot.ensure(0, d_bar)
    seg = snap.values(b, d_bar)
    v_b = seg[0]
    t_up = b + int(np.argmax(seg - v_b >= scales.h))
    c = b + int(np.argmax(seg))
    v_c = snap.value(c)
    c_seg = snap.values(c, d_bar)
    c_bar = c + int(np.argmax(c_seg <= v_c - scales.h / 3.0))
    bound = _scan_bound(scales, cfg)
    a = _search_left_rise(pot, b, scales.D, bound, f"a_{j}")
    v_dbar = snap.value(d_bar)
    d = _search_right_first(
        pot, d_bar, bound, f"d_{j}", lambda V: V - v_dbar <= -scales.D
    )
    log_w = _log_valley_weight(pot, a, b, d)
    return DeepValley(
        j=j,
        sigma=int(sigma),
        a=a,
        b=b,
        t_up=t_up,
        c=c,
        c_bar=c_bar,
        d_bar=d_bar,
        d=d,
        height=float(v_c - v_b),
        weight=float(math.exp(log_w)) if log_w < 709 else math.inf,
        log_weight=float(log_w),
    )


def _deep_sigma_indices(pot: Potential, scales: CriticalScales, extra: int):
    """(sigmas, epochs): deep-excursion indices with sigma <= n_t, plus the
    next ``extra`` deep indices beyond n_t, and ladder epochs covering them.

    The beyond-n_t scan first exhausts excursions already inside the sampled
    window before extending it, so hand-built fixed-window environments are
    never resampled when the answer is already in reach.
    """
    n_t = scales.n
    epochs = ladder_epochs(pot, count=n_t + 1)
    heights = _heights_from_epochs(pot.ensure(0, int(epochs[-1])), epochs)
    sigmas = np.flatnonzero(heights >= scales.h)  # indices <= n_t
    if extra <= 0:
        return sigmas, epochs
    found_extra: list[int] = []
    next_idx = n_t + 1  # next unexamined excursion index
    hi_point = pot.hi
    while True:
        snap = pot.ensure(0, hi_point)
        epochs_all = _epochs_in(snap, snap.hi)
        last_complete = len(epochs_all) - 2  # highest excursion index available
        if last_complete >= next_idx:
            seg = epochs_all[next_idx:]
            seg_heights = _heights_from_epochs(snap, seg)
            hits = np.flatnonzero(seg_heights >= scales.h)
            for h in hits[: extra - len(found_extra)]:
                found_extra.append(next_idx + int(h))
            next_idx = last_complete + 1
            if len(found_extra) >= extra:
                if len(epochs_all) > len(epochs):
                    epochs = epochs_all
                return (
                    np.concatenate([sigmas, np.asarray(found_extra, dtype=np.int64)]),
                    epochs,
                )
        if next_idx > 50 * (n_t + 1) + 100_000:
            raise ScanExhaustedError(
                "no further deep excursion found in a 50x n_t scan",
                {"search": "sigma-extra", "n_t": n_t},
            )
        hi_point = 2 * max(snap.hi, 256)


def deep_valleys(pot: Potential, t: float, cfg: DiagnosticsConfig | None = None,
                 *, _extra: int = 0) -> list[DeepValley]:
    """The K_t deep valleys of horizon t (empty when no excursion among the
    first n_t clears h_t)."""
    scales = critical_scales(t, pot.spec.kappa)
    if cfg is None:
        cfg = DiagnosticsConfig.defaults(pot.spec, t)
    sigmas, epochs = _deep_sigma_indices(pot, scales, _extra)
    return [
        _anatomy_from_sigma(pot, epochs, int(sigma), j + 1, scales, cfg)
        for j, sigma in enumerate(sigmas)
    ]


# ---------------------------------------------------------------------------
# *-valleys
# ---------------------------------------------------------------------------


def star_valleys(pot: Potential, t: float, cfg: DiagnosticsConfig | None = None) -> list[StarValley]:
    """The K*_t disjoint *-valleys: iterate (descend D_t -> rise h_t -> dress)
    through the shift by the previous valley's right edge, keeping those with
    T*_j <= e_{n_t}."""
    scales = critical_scales(t, pot.spec.kappa)
    if cfg is None:
        cfg = DiagnosticsConfig.defaults(pot.spec, t)
    e_nt = int(ladder_epochs(pot, count=scales.n)[-1])
    bound = _scan_bound(scales, cfg)
    out: list[StarValley] = []
    prev_d = 0
    j = 1
    while prev_d < e_nt:
        # gamma: first descent of D_t below the shifted origin; if it (and
        # hence T*) lies beyond e_{n_t}, no further valley counts.
        window = pot.values(prev_d, e_nt)
        v_origin = window[0]
        hits = np.flatnonzero(window - v_origin <= -scales.D)
        if not len(hits):
            break
        gamma = prev_d + int(hits[0])
        # T*: first k with an internal rise of h_t after gamma, within e_{n_t}
        seg = pot.values(gamma, e_nt)
        rise = seg - np.minimum.accumulate(seg)
        t_hits = np.flatnonzero(rise >= scales.h)
        if not len(t_hits):
            break
        t_star = gamma + int(t_hits[0])
        # b*: last minimizer of V over [prev_d, T*]
        span = pot.values(prev_d, t_star)
        v_min = span.min()
        b = prev_d + int(np.flatnonzero(span == v_min)[-1])
        a = _search_left_rise(pot, b, scales.D, b - prev_d + 1, f"a*_{j}")
        v_b = pot.value(b)
        d_bar = _search_right_first(
            pot, t_star, bound, f"d-bar*_{j}", lambda V: V <= v_b
        )
        vseg = pot.values(b, d_bar)
        c = b + int(np.argmax(vseg))
        v_dbar = pot.value(d_bar)
        d = _search_right_first(
            pot, d_bar, bound, f"d*_{j}", lambda V: V - v_dbar <= -scales.D
        )
        out.append(
            StarValley(
                j=j,
                gamma=gamma,
                a=a,
                b=b,
                t_star=t_star,
                c=c,
                d_bar=d_bar,
                d=d,
                height=float(pot.value(c) - v_b),
            )
        )
        prev_d = d
        j += 1
    return out


# ---------------------------------------------------------------------------
# weights and fluctuations
# ---------------------------------------------------------------------------


def _log_valley_weight(pot: Potential, a: int, b: int, d: int) -> float:
    """log of W = 2 sum_{n=b..d} sum_{m=a..n} e^{V(n)-V(m)}, via log-domain
    prefix accumulation (O(d-a), overflow-free)."""
    V = pot.values(a, d)
    prefix = np.logaddexp.accumulate(-V)  # log sum_{m=a..x} e^{-V(m)}
    terms = V[b - a :] + prefix[b - a :]
    m = float(np.max(terms))
    return math.log(2.0) + m + math.log(float(np.sum(np.exp(terms - m))))


def valley_weight(pot: Potential, valley: DeepValley | StarValley) -> float:
    """W = 2 sum e^{V(n)-V(m)} over a <= m <= n, b <= n <= d (may be inf in
    linear scale for gigantic valleys; the log never overflows)."""
    log_w = _log_valley_weight(pot, valley.a, valley.b, valley.d)
    return float(math.exp(log_w)) if log_w < 709 else math.inf


def fluctuations(pot: Potential, x: int, y: int) -> tuple[float, float]:
    """(V-up, V-down) over [x, y]: the largest rise V(j)-V(i) and the most
    negative drop over ordered pairs i <= j.  V-up >= 0 >= V-down always
    (the i = j pair contributes 0)."""
    if not x < y:
        raise ValueError(f"need x < y, got ({x}, {y})")
    seg = pot.values(x, y)
    v_up = float(np.max(seg - np.minimum.accumulate(seg)))
    v_down = float(np.min(seg - np.maximum.accumulate(seg)))
    return v_up, v_down


# ---------------------------------------------------------------------------
# good environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventReport:
    """One event: does it hold, with the witnessing quantity vs its threshold.

    For cap-type events (A1, A2, A4, F_gamma) the witness is the largest
    offender and ``holds`` means witness <= threshold; for floor-type events
    (A3, A5) the witness is the smallest and ``holds`` means >=.
    """

    name: str
    holds: bool
    witness: float
    threshold: float
    kind: str  # "cap" or "floor"

    def as_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "holds": self.holds,
            "witness": self.witness,
            "threshold": self.threshold,
            "kind": self.kind,
        }


@dataclass(frozen=True)
class GoodEnvReport:
    """Events A1..A5 and F_gamma for one environment at horizon t."""

    t: float
    kappa: float
    n_t: int
    h_t: float
    D_t: float
    K: int
    events: tuple[EventReport, ...]
    config: DiagnosticsConfig

    @property
    def all_core(self) -> bool:
        """A(t) = A1 and A2 and A3 and A4."""
        core = {"A1", "A2", "A3", "A4"}
        return all(ev.holds for ev in self.events if ev.name in core)

    @property
    def all_good(self) -> bool:
        return all(ev.holds for ev in self.events)

    def event(self, name: str) -> EventReport:
        for ev in self.events:
            if ev.name == name:
                return ev
        raise KeyError(name)

    def as_json(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "kappa": self.kappa,
            "n_t": self.n_t,
            "h_t": self.h_t,
            "D_t": self.D_t,
            "K": self.K,
            "all_core": self.all_core,
            "all_good": self.all_good,
            "events": [ev.as_json() for ev in self.events],
            "config": self.config.as_json(),
        }


def _cap(name: str, witness: float, threshold: float) -> EventReport:
    return EventReport(name=name, holds=bool(witness <= threshold),
                       witness=float(witness), threshold=float(threshold), kind="cap")


def _floor(name: str, witness: float, threshold: float) -> EventReport:
    return EventReport(name=name, holds=bool(witness >= threshold),
                       witness=float(witness), threshold=float(threshold), kind="floor")


def good_env_diagnostics(pot: Potential, t: float,
                         cfg: DiagnosticsConfig | None = None) -> GoodEnvReport:
    """Evaluate the good-environment events with witnesses.

    A1: e_{n_t} <= c1 n_t.
    A2: K_t <= (log t)^{(1+kappa)/2}.
    A3: consecutive deep-excursion spacings sigma(j+1) - sigma(j) >= t^{kappa/2}
        for j = 0..K_t (sigma(0) = 0; needs the first deep excursion past n_t).
    A4: d_j - a_j <= c2 log t for j = 1..K_t+1.
    F_gamma: inner fluctuations of each of the K_t valleys <= gamma log t.
    A5: rim of each valley bottom at least c3 eta log t over
        O_i = [a_i+1, c_bar_i - 1] minus the open window
        (b_i - eta log t + 1, b_i + eta log t - 1).

    Empty conjunctions hold vacuously (witnesses are the identity elements).
    """
    kappa = pot.spec.kappa
    scales = critical_scales(t, kappa)
    if cfg is None:
        cfg = DiagnosticsConfig.defaults(pot.spec, t)
    log_t = math.log(t)

    epochs = ladder_epochs(pot, count=scales.n)
    e_nt = int(epochs[-1])

    valleys = deep_valleys(pot, t, cfg, _extra=1)
    k_t = len(valleys) - 1  # the last one is the first deep excursion past n_t
    counted = valleys[:k_t]
    sigma = np.array([0] + [v.sigma for v in valleys], dtype=np.int64)

    a1 = _cap("A1", e_nt, cfg.c1 * scales.n)
    a2 = _cap("A2", k_t, log_t ** ((1.0 + kappa) / 2.0))
    spacings = np.diff(sigma)  # sigma(j+1) - sigma(j), j = 0..K_t
    a3 = _floor("A3", float(spacings.min()), t ** (kappa / 2.0))
    a4 = _cap("A4", float(max(v.d - v.a for v in valleys)), cfg.c2 * log_t)

    if counted:
        f_wit = -math.inf
        for v in counted:
            up_ab = fluctuations(pot, v.a, v.b)[0] if v.a < v.b else 0.0
            down_bc = -fluctuations(pot, v.b, v.c)[1] if v.b < v.c else 0.0
            up_cd = fluctuations(pot, v.c, v.d)[0] if v.c < v.d else 0.0
            f_wit = max(f_wit, up_ab, down_bc, up_cd)
        f_gamma = _cap("F_gamma", f_wit, cfg.gamma * log_t)
        eta_w = cfg.eta * log_t
        a5_wit = math.inf
        for v in counted:
            k = np.arange(v.a + 1, v.c_bar)
            keep = ~((k > v.b - eta_w + 1) & (k < v.b + eta_w - 1))
            k = k[keep]
            if len(k):
                rim = pot.values(v.a + 1, v.c_bar - 1)[keep] - pot.value(v.b)
                a5_wit = min(a5_wit, float(rim.min()))
        a5 = _floor("A5", a5_wit, cfg.c3 * cfg.eta * log_t)
    else:
        f_gamma = _cap("F_gamma", -math.inf, cfg.gamma * log_t)
        a5 = _floor("A5", math.inf, cfg.c3 * cfg.eta * log_t)

    return GoodEnvReport(
        t=float(t),
        kappa=kappa,
        n_t=scales.n,
        h_t=scales.h,
        D_t=scales.D,
        K=k_t,
        events=(a1, a2, a3, a4, f_gamma, a5),
        config=cfg,
    )
