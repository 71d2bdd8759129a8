"""Environment families, tail-exponent solving, and environment sampling.

The model: an i.i.d. sequence ``omega_i`` in (0,1) indexed by the integers;
the walk at site i steps right with probability ``omega_i``.  Everything
downstream is driven by ``rho_i = (1 - omega_i) / omega_i`` and its log.

A parameter set is admissible for the transient sub-ballistic regime when

* ``E[log rho] < 0`` (transience to the right),
* there is ``0 < kappa < 1`` with ``E[rho^kappa] = 1`` and
  ``E[rho^kappa log+ rho] < infinity``,
* ``log rho`` is non-lattice (checked for discrete laws; a lattice law is
  accepted with a warning and ``non_lattice=False``).

Three families are supported:

* ``lognormal``: ``log rho ~ N(mu, sigma^2)`` — kappa in closed form,
  ``kappa = -2 mu / sigma^2``;
* ``beta``: ``omega ~ Beta(alpha, beta)`` — ``E[rho^s]`` in closed form via
  log-gammas, root located by bracketed search;
* ``discrete``: finitely many atoms ``(rho_j, p_j)``.

Environments are sampled by inverse CDF from index-addressed uniforms
(:func:`rwrelab.rng.site_uniforms`), which makes them extension-stable:
enlarging the sampled window never changes previously sampled sites.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import integrate, optimize, special

from .rng import site_uniforms, substream_seed

__all__ = [
    "EnvSpec",
    "EnvSpecError",
    "Environment",
    "solve_kappa",
    "validate_spec",
    "sample_environment",
]

FAMILIES = ("lognormal", "beta", "discrete")

# Hard ceiling for the root search; beyond this the regime of interest
# (kappa < 1) is long gone.
S_MAX = 50.0

# omega is clamped strictly inside (0,1) so log rho is always finite.  The
# clamp triggers only for uniforms within ~1e-280 of the ends (lognormal
# needs |z| > 36 standard deviations); statistically invisible.
_OMEGA_EPS = 1e-15

_LATTICE_TOL = 1e-9


class EnvSpecError(ValueError):
    """Raised when parameters violate the standing assumptions.

    Carries a ``report`` dict with the failed checks, so callers (and the
    CLI's env-audit) can show which assumption broke rather than a bare
    message.
    """

    def __init__(self, message: str, report: dict[str, Any]):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# family-specific machinery
# ---------------------------------------------------------------------------


def _canon_params(family: str, params: Mapping[str, Any]) -> dict[str, Any]:
    if family == "lognormal":
        want = {"mu", "sigma"}
        if set(params) != want:
            raise EnvSpecError(
                f"lognormal family takes params {sorted(want)}, got {sorted(params)}",
                {"reason": "bad-params"},
            )
        mu, sigma = float(params["mu"]), float(params["sigma"])
        if not (sigma > 0) or not math.isfinite(mu) or not math.isfinite(sigma):
            raise EnvSpecError("lognormal needs finite mu and sigma > 0", {"reason": "bad-params"})
        return {"mu": mu, "sigma": sigma}
    if family == "beta":
        want = {"alpha", "beta"}
        if set(params) != want:
            raise EnvSpecError(
                f"beta family takes params {sorted(want)}, got {sorted(params)}",
                {"reason": "bad-params"},
            )
        a, b = float(params["alpha"]), float(params["beta"])
        if not (a > 0 and b > 0):
            raise EnvSpecError("beta needs alpha > 0 and beta > 0", {"reason": "bad-params"})
        return {"alpha": a, "beta": b}
    if family == "discrete":
        want = {"rho", "p"}
        if set(params) != want:
            raise EnvSpecError(
                f"discrete family takes params {sorted(want)}, got {sorted(params)}",
                {"reason": "bad-params"},
            )
        rho = tuple(float(r) for r in params["rho"])
        p = tuple(float(q) for q in params["p"])
        if len(rho) != len(p) or not rho:
            raise EnvSpecError("discrete needs matching non-empty rho and p", {"reason": "bad-params"})
        if any(r <= 0 for r in rho) or any(q < 0 for q in p):
            raise EnvSpecError("discrete needs rho > 0 and p >= 0", {"reason": "bad-params"})
        total = sum(p)
        if abs(total - 1.0) > 1e-12:
            raise EnvSpecError(f"discrete probabilities sum to {total}, not 1", {"reason": "bad-params"})
        return {"rho": rho, "p": p}
    raise EnvSpecError(f"unknown family {family!r}; expected one of {FAMILIES}", {"reason": "bad-family"})


def _log_moment(family: str, params: Mapping[str, Any], s: float) -> float:
    """log E[rho^s]; +inf where the moment diverges."""
    if family == "lognormal":
        return s * params["mu"] + 0.5 * (s * params["sigma"]) ** 2
    if family == "beta":
        a, b = params["alpha"], params["beta"]
        if s >= a:
            return math.inf
        return (
            special.gammaln(a - s)
            + special.gammaln(b + s)
            - special.gammaln(a)
            - special.gammaln(b)
        )
    if family == "discrete":
        rho = np.asarray(params["rho"])
        p = np.asarray(params["p"])
        return special.logsumexp(s * np.log(rho), b=p)
    raise ValueError(family)


def _log_rho_mean(family: str, params: Mapping[str, Any]) -> float:
    if family == "lognormal":
        return params["mu"]
    if family == "beta":
        return special.digamma(params["beta"]) - special.digamma(params["alpha"])
    if family == "discrete":
        rho = np.asarray(params["rho"])
        p = np.asarray(params["p"])
        return float(np.dot(p, np.log(rho)))
    raise ValueError(family)


def _kappa_log_moment(family: str, params: Mapping[str, Any], kappa: float) -> float:
    """E[rho^kappa log+ rho] — the integrability condition at the root."""
    if family == "lognormal":
        mu, sigma = params["mu"], params["sigma"]

        def f(x):
            return math.exp(kappa * x) * max(x, 0.0) * math.exp(-0.5 * ((x - mu) / sigma) ** 2)

        val, _ = integrate.quad(f, 0.0, mu + 40 * sigma, limit=200)
        return val / (sigma * math.sqrt(2 * math.pi))
    if family == "beta":
        a, b = params["alpha"], params["beta"]
        if kappa >= a:
            return math.inf

        def f(w):
            rho = (1.0 - w) / w
            return rho**kappa * max(math.log(rho), 0.0) * w ** (a - 1) * (1 - w) ** (b - 1)

        val, _ = integrate.quad(f, 0.0, 0.5, limit=400, points=[0.0])
        val2, _ = integrate.quad(f, 0.5, 1.0, limit=400)
        return (val + val2) / special.beta(a, b)
    if family == "discrete":
        rho = np.asarray(params["rho"])
        p = np.asarray(params["p"])
        return float(np.dot(p, rho**kappa * np.maximum(np.log(rho), 0.0)))
    raise ValueError(family)


def _lattice_span(log_atoms: np.ndarray, probs: np.ndarray, tol: float = _LATTICE_TOL) -> float:
    """Span of the lattice supporting the atoms, or 0.0 if non-lattice.

    A finite law is lattice iff all pairwise differences of its (distinct,
    positive-probability) log-atoms are integer multiples of a common span.
    The span is the real-number gcd of the differences, computed by Euclid's
    algorithm with tolerance ``tol`` (rational approximation at 1e-9, per the
    detection contract).  One distinct atom is trivially lattice.
    """
    atoms = np.unique(log_atoms[probs > 0])
    if len(atoms) == 1:
        return math.inf  # degenerate: supported on a single point
    diffs = np.abs(np.diff(atoms))

    def gcd(x: float, y: float) -> float:
        while y > tol:
            x, y = y, x % y
        return x

    g = diffs[0]
    for d in diffs[1:]:
        g = gcd(max(g, d), min(g, d))
        if g <= tol:
            return 0.0
    # confirm every difference is an integer multiple of g
    mult = diffs / g
    if np.all(np.abs(mult - np.round(mult)) <= tol * np.maximum(1.0, mult)):
        return float(g)
    return 0.0


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvSpec:
    """A validated environment law.

    Instances come out of :func:`validate_spec`; ``kappa`` is the root of
    ``E[rho^s] = 1`` and the assumption checks have already passed (or, for
    a lattice discrete law, ``non_lattice`` is False and a warning has been
    issued).
    """

    family: str
    params: Mapping[str, Any]
    kappa: float
    non_lattice: bool
    log_rho_mean: float
    kappa_log_moment: float

    def moment(self, s: float) -> float:
        """E[rho^s] (may be inf)."""
        return math.exp(_log_moment(self.family, self.params, s))

    def log_moment(self, s: float) -> float:
        return _log_moment(self.family, self.params, s)

    def omega_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform from Uniform(0,1) to omega."""
        if self.family == "lognormal":
            log_rho = self.params["mu"] + self.params["sigma"] * special.ndtri(u)
            omega = 1.0 / (1.0 + np.exp(log_rho))
        elif self.family == "beta":
            omega = special.betaincinv(self.params["alpha"], self.params["beta"], u)
        else:
            rho = np.asarray(self.params["rho"])
            cum = np.cumsum(self.params["p"])
            omega = 1.0 / (1.0 + rho[np.searchsorted(cum, u)])
        return np.clip(omega, _OMEGA_EPS, 1.0 - _OMEGA_EPS)

    def to_json(self, seed: int | None = None) -> dict[str, Any]:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        return {"family": self.family, "params": params, "seed": seed}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "EnvSpec":
        return validate_spec(obj["family"], obj["params"])


def solve_kappa(family: str, params: Mapping[str, Any], *, s_max: float = S_MAX,
                tol: float = 1e-12) -> float:
    """Positive root of ``E[rho^s] = 1``.

    Closed forms where they exist — ``-2 mu / sigma^2`` for log-normal and
    ``alpha - beta`` for beta (Beta-function symmetry makes
    ``E[rho^{alpha-beta}] = B(beta, alpha)/B(alpha, beta) = 1`` exact, and
    convexity of ``s -> log E[rho^s]`` with negative slope at 0 makes the
    positive root unique).  Otherwise a bracketed search on the same convex
    map.  Raises :class:`EnvSpecError` when there is no root in
    ``(0, s_max]``.
    """
    params = _canon_params(family, params)
    drift = _log_rho_mean(family, params)
    if drift >= 0:
        raise EnvSpecError(
            f"E[log rho] = {drift:.6g} >= 0: walk is not transient to the right",
            {"reason": "not-transient", "log_rho_mean": drift},
        )
    if family == "lognormal":
        return -2.0 * params["mu"] / params["sigma"] ** 2
    if family == "beta":
        # transience already implies alpha > beta, so the root is positive
        return params["alpha"] - params["beta"]

    def f(s):
        return _log_moment(family, params, s)

    # bracket: f(0)=0 with negative slope; walk right until f turns positive
    hi = 1e-3
    upper_cap = s_max
    if family == "beta":
        upper_cap = min(s_max, params["alpha"])
    while True:
        probe = min(hi, upper_cap * (1 - 1e-12))
        if f(probe) > 0:
            break
        if hi >= upper_cap:
            raise EnvSpecError(
                f"E[rho^s] never returns to 1 on (0, {upper_cap:.3g}]: assumption fails",
                {"reason": "no-root", "s_max": upper_cap},
            )
        hi = min(hi * 2, upper_cap)
    lo = probe / 2
    while f(lo) > 0:
        lo /= 2
        if lo < 1e-300:
            raise EnvSpecError("root bracketing collapsed", {"reason": "no-root"})
    root = optimize.brentq(f, lo, probe, xtol=tol, rtol=4 * np.finfo(float).eps)
    return float(root)


def validate_spec(family: str, params: Mapping[str, Any], *,
                  lattice_tol: float = _LATTICE_TOL) -> EnvSpec:
    """Check the standing assumptions and return a validated :class:`EnvSpec`.

    Rejections (raised as :class:`EnvSpecError` with a report): non-transient
    parameters, no root of ``E[rho^s] = 1``, root outside ``(0, 1)``, or a
    divergent ``E[rho^kappa log+ rho]``.  A lattice discrete law is accepted
    with ``non_lattice=False`` and a warning — limit-law experiments are
    outside their hypotheses there, but the machinery still runs.
    """
    params = _canon_params(family, params)
    kappa = solve_kappa(family, params)  # raises on transience/no-root failures
    report: dict[str, Any] = {"family": family, "kappa": kappa}
    if not (0.0 < kappa < 1.0):
        report["reason"] = "kappa-out-of-range"
        raise EnvSpecError(
            f"kappa = {kappa:.6g} outside (0, 1): not in the sub-ballistic regime",
            report,
        )
    moment = _kappa_log_moment(family, params, kappa)
    if not math.isfinite(moment):
        report["reason"] = "divergent-moment"
        raise EnvSpecError("E[rho^kappa log+ rho] diverges", report)
    non_lattice = True
    if family == "discrete":
        span = _lattice_span(
            np.log(np.asarray(params["rho"])), np.asarray(params["p"]), lattice_tol
        )
        non_lattice = span == 0.0
        if not non_lattice:
            warnings.warn(
                "discrete log-rho law is lattice; limit-law references assume "
                "a non-lattice law",
                stacklevel=2,
            )
    return EnvSpec(
        family=family,
        params=params,
        kappa=kappa,
        non_lattice=non_lattice,
        log_rho_mean=_log_rho_mean(family, params),
        kappa_log_moment=moment,
    )


@dataclass(frozen=True)
class Environment:
    """A sampled window ``[lo, hi]`` of one environment realization.

    ``omega[i - lo]`` is the right-step probability at site i.  The window
    is immutable; :meth:`extended` returns a larger window of the *same*
    realization (index-addressed sampling guarantees the overlap agrees
    bit-for-bit).
    """

    spec: EnvSpec
    master_seed: int
    lo: int
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.omega.flags.writeable = False

    @property
    def hi(self) -> int:
        """Largest sampled site (inclusive)."""
        return self.lo + len(self.omega) - 1

    def omega_at(self, x: int) -> float:
        if not self.lo <= x <= self.hi:
            raise IndexError(f"site {x} outside sampled window [{self.lo}, {self.hi}]")
        return float(self.omega[x - self.lo])

    def slice(self, a: int, b: int) -> np.ndarray:
        """omega values for sites ``a..b`` inclusive (window must cover them)."""
        if a < self.lo or b > self.hi:
            raise IndexError(f"sites [{a}, {b}] outside window [{self.lo}, {self.hi}]")
        return self.omega[a - self.lo : b - self.lo + 1]

    def extended(self, lo: int, hi: int) -> "Environment":
        """Environment covering at least ``[lo, hi]`` (union with current window)."""
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        if lo == self.lo and hi == self.hi:
            return self
        return sample_environment(self.spec, lo, hi, self.master_seed)


def sample_environment(spec: EnvSpec, lo: int, hi: int, master_seed: int) -> Environment:
    """Sample omega on sites ``lo..hi`` inclusive.

    Site i's variate is a pure function of ``(master_seed, i)``, so windows
    of the same seed always agree where they overlap.
    """
    key = substream_seed(master_seed, "env-sites")
    u = site_uniforms(key, lo, hi)
    return Environment(spec=spec, master_seed=master_seed, lo=lo, omega=spec.omega_from_uniforms(u))
