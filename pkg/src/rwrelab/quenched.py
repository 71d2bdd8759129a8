"""Closed-form quenched computations in one fixed environment.

``hit_prob``, ``escape_prob``, ``expected_hit_time_reflected``,
``invariant_measure`` and ``hproc_potential`` evaluate the exact birth-death
formulas in log domain (probabilities are exponentiated only at the API
boundary).  ``chain_oracle`` solves the same first-passage linear systems by
extended-precision tridiagonal elimination and serves as the module's
independent ground truth; it deliberately shares no code with the closed
forms.

Reflection convention, stated once and used everywhere: "reflected at y"
means that from y the walk moves to y+1 with probability 1 (the walk is kept
to the right of y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .envmodel import Environment
from .potential import Potential, build_potential

__all__ = [
    "MAX_ORACLE_SITES",
    "IntervalProblem",
    "ChainSolution",
    "HitTimeResult",
    "InvariantMeasure",
    "HProcessPotential",
    "as_potential",
    "hit_prob",
    "escape_prob",
    "expected_hit_time_reflected",
    "invariant_measure",
    "hproc_potential",
    "chain_oracle",
]

MAX_ORACLE_SITES = 1_000_000


def as_potential(env: Environment | Potential) -> Potential:
    """Accept either an environment or an already-built potential."""
    if isinstance(env, Potential):
        return env
    return build_potential(env)


# ---------------------------------------------------------------------------
# hitting and escape probabilities
# ---------------------------------------------------------------------------


def hit_prob(
    env: Environment | Potential, x: int, r: int, s: int, *, complement: bool = False
) -> float:
    """P^x_omega(tau(r) < tau(s)) for r < x < s.

    Exact ratio sum_{j=x}^{s-1} e^{V(j)} / sum_{j=r}^{s-1} e^{V(j)}.  With
    ``complement=True`` the numerator is the other side of the split
    (= P^x(tau(s) < tau(r))); the two calls sum to 1 up to rounding because
    they share the same log-domain denominator.
    """
    if not r < x < s:
        raise ValueError(f"need r < x < s, got r={r}, x={x}, s={s}")
    pot = as_potential(env)
    V = pot.values(r, s - 1)
    log_left = logsumexp(V[x - r :])  # j = x .. s-1, the tau(r)-first mass
    log_right = logsumexp(V[: x - r])  # j = r .. x-1
    log_den = np.logaddexp(log_left, log_right)
    log_num = log_right if complement else log_left
    return float(np.exp(log_num - log_den))


def escape_prob(env: Environment | Potential, b: int, d: int) -> float:
    """1 - p(omega) = P^b_omega(tau(d) < tau^+(b)), the no-return escape.

    Exact formula omega_b e^{V(b)} / sum_{x=b}^{d-1} e^{V(x)}, evaluated with
    the sum shifted by V(b) so that d = b+1 returns omega_b exactly.  This is
    the geometric parameter of the crossing attempt count.
    """
    if not b < d:
        raise ValueError(f"need b < d, got b={b}, d={d}")
    pot = as_potential(env)
    V = pot.values(b, d - 1)
    omega_b = float(pot.omega(b, b)[0])
    return omega_b * float(np.exp(-logsumexp(V - V[0])))


# ---------------------------------------------------------------------------
# expected hitting time, reflected walk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HitTimeResult:
    """Exact expectation plus the double-sum upper bound it is checked against.

    ``expectation`` is E^start_{omega,|reflect}[tau(target)];
    ``golosov_bound`` is 2 sum_{u <= v} e^{V(v)-V(u)} over
    reflect <= u <= v <= target, v >= start, which dominates the expectation
    for every environment (the factor 2 is what makes the domination
    universal; without it flat terrain already violates the inequality).
    """

    expectation: float
    golosov_bound: float


def expected_hit_time_reflected(
    env: Environment | Potential, reflect_at: int, start: int, target: int
) -> HitTimeResult:
    """E^start[tau(target)] for the walk reflected at ``reflect_at``.

    The one-step recursion for m(x) = E^x[tau(x+1)] under reflection,
    m(r) = 1 and m(x) = 1/omega_x + rho_x m(x-1), solves in closed form to
    m(x) = 2 sum_{m=r}^{x} e^{V(x)-V(m)} - 1, so the expectation is the sum
    of m(x) over start <= x < target.  Everything is accumulated in log
    domain; a value beyond the double range comes back as ``inf``.
    """
    if not reflect_at <= start <= target:
        raise ValueError(
            f"need reflect_at <= start <= target, got {reflect_at}, {start}, {target}"
        )
    pot = as_potential(env)
    r = reflect_at
    V = pot.values(r, target)
    # prefix[j] = log sum_{m=r}^{r+j} e^{-V(m)}; log S_x = V(x) + prefix[x-r]
    prefix = np.logaddexp.accumulate(-V)
    log_terms = V + prefix
    bound = 2.0 * float(np.exp(logsumexp(log_terms[start - r :])))
    if target == start:
        return HitTimeResult(expectation=0.0, golosov_bound=bound)
    log_total = logsumexp(log_terms[start - r : target - r])
    expectation = 2.0 * float(np.exp(log_total)) - (target - start)
    return HitTimeResult(expectation=expectation, golosov_bound=bound)


# ---------------------------------------------------------------------------
# invariant measure of the reflected chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantMeasure:
    """Reversible measure of the chain reflected at both ends of [a, c_bar].

    ``pi`` is exactly stationary (pi P = pi) and normalized by pi(b) = 1;
    ``bound`` carries the dominating per-site expressions
    e^{-(V(k)-V(b))} + e^{-(V(k-1)-V(b))} on the interior and the displayed
    boundary values e^{-(V(a+1)-V(b))}, e^{-(V(c_bar-1)-V(b))} at the ends.
    ``stationarity_defect`` is the largest relative violation of pi P = pi
    found by direct multiplication (construction refuses if it exceeds 1e-12).
    """

    a: int
    b: int
    c_bar: int
    pi: np.ndarray
    log_pi: np.ndarray
    bound: np.ndarray
    stationarity_defect: float

    def site(self, k: int) -> float:
        if not self.a <= k <= self.c_bar:
            raise IndexError(f"site {k} outside [{self.a}, {self.c_bar}]")
        return float(self.pi[k - self.a])


def invariant_measure(
    env: Environment | Potential, a: int, c_bar: int, b: int
) -> InvariantMeasure:
    """Stationary measure pi of the [a, c_bar] chain, anchored by pi(b) = 1.

    Interior values come from the reversibility product
    pi(k) = prod omega_{j-1}/(1-omega_j), which telescopes to
    (1-omega_b) e^{-(V(k-1)-V(b-1))} / (1-omega_k) on both sides of b and
    gives exactly 1 at k = b.  The two boundary values follow from detailed
    balance across the reflecting edges: pi(a) = pi(a+1)(1-omega_{a+1}) and
    pi(c_bar) = pi(c_bar-1) omega_{c_bar-1}.
    """
    if not a < b < c_bar:
        raise ValueError(f"need a < b < c_bar, got a={a}, b={b}, c_bar={c_bar}")
    pot = as_potential(env)
    V = pot.values(a, c_bar)  # V(k) at index k - a
    omega = np.asarray(pot.omega(a, c_bar), dtype=float)

    k = np.arange(a + 1, c_bar)  # interior sites
    log_pi_interior = (
        math.log1p(-omega[b - a])
        - (V[k - a - 1] - V[b - 1 - a])
        - np.log1p(-omega[k - a])
    )
    log_pi = np.empty(c_bar - a + 1)
    log_pi[1:-1] = log_pi_interior
    log_pi[b - a] = 0.0  # the telescoped product is exactly 1 at k = b
    log_pi[0] = log_pi[1] + math.log1p(-omega[1])
    log_pi[-1] = log_pi[-2] + math.log(omega[-2])
    pi = np.exp(log_pi)

    rel = V - V[b - a]  # V(k) - V(b) for k = a .. c_bar
    bound = np.empty_like(pi)
    bound[1:-1] = np.exp(-rel[1:-1]) + np.exp(-rel[:-2])
    bound[0] = math.exp(-rel[1])
    bound[-1] = math.exp(-rel[-2])

    defect = _stationarity_defect(pi, omega)
    if defect > 1e-12:
        raise ValueError(
            f"invariant measure failed the stationarity post-check: "
            f"relative defect {defect:.3e} > 1e-12"
        )
    return InvariantMeasure(
        a=a,
        b=b,
        c_bar=c_bar,
        pi=pi,
        log_pi=log_pi,
        bound=bound,
        stationarity_defect=defect,
    )


def _stationarity_defect(pi: np.ndarray, omega: np.ndarray) -> float:
    """max_k |(pi P)(k) - pi(k)| / (local scale), by direct multiplication.

    P is the chain on [a, c_bar]: interior sites step right with omega_k and
    left with 1-omega_k; the two endpoints step inward with probability 1.
    """
    flow = np.zeros_like(pi)
    # mass arriving from the left neighbor: pi(k-1) * P(k-1 -> k)
    right_step = pi[:-1] * omega[:-1]
    right_step[0] = pi[0]  # reflecting left end moves right surely
    flow[1:] += right_step
    # mass arriving from the right neighbor: pi(k+1) * P(k+1 -> k)
    left_step = pi[1:] * (1.0 - omega[1:])
    left_step[-1] = pi[-1]  # reflecting right end moves left surely
    flow[:-1] += left_step
    # local scale: each site against itself and the neighbors feeding it
    scale = pi.copy()
    scale[1:] = np.maximum(scale[1:], pi[:-1])
    scale[:-1] = np.maximum(scale[:-1], pi[1:])
    return float(np.max(np.abs(flow - pi) / scale))


# ---------------------------------------------------------------------------
# h-process potential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HProcessPotential:
    """Potential of the walk on [b, d] conditioned to hit d before b.

    ``vbar`` holds Vbar on sites ``b+1 .. d`` (anchored Vbar(b+1) = 0; the
    conditioned process starts by stepping right, so site b itself carries no
    value).  ``log_g[x - b]`` is log P^x(tau(d) < tau(b)) for x = b .. d+1,
    with g = 1 for x >= d by convention.
    """

    b: int
    d: int
    sites: np.ndarray
    vbar: np.ndarray
    log_g: np.ndarray

    def g(self, x: int) -> float:
        if not self.b <= x <= self.d + 1:
            raise IndexError(f"site {x} outside [{self.b}, {self.d + 1}]")
        return float(np.exp(self.log_g[x - self.b]))


def hproc_potential(env: Environment | Potential, b: int, d: int) -> HProcessPotential:
    """Modified potential Vbar of the escape h-process on [b, d].

    Vbar(y) - Vbar(x) = (V(y) - V(x)) + log( g(x)g(x+1) / (g(y)g(y+1)) )
    with g(x) = P^x(tau(d) < tau(b)).  g is nondecreasing, so the domination
    Vbar(y) - Vbar(x) <= V(y) - V(x) holds for every x < y; it is asserted
    on construction.
    """
    if not b < d:
        raise ValueError(f"need b < d, got b={b}, d={d}")
    pot = as_potential(env)
    V = pot.values(b, d)
    # log g(x) = logsumexp V[b .. x-1] - logsumexp V[b .. d-1]; x = b .. d+1
    prefix = np.logaddexp.accumulate(V[:-1])  # over j = b .. d-1
    log_g = np.empty(d - b + 2)
    log_g[0] = -np.inf  # g(b) = 0
    log_g[1:-1] = prefix - prefix[-1]
    log_g[-1] = 0.0  # g(x) = 1 for x >= d
    sites = np.arange(b + 1, d + 1)
    vbar = (V[1:] - V[1]) + (log_g[1] + log_g[2]) - (log_g[1:-1] + log_g[2:])
    increments = np.diff(vbar) - np.diff(V[1:])
    if increments.size and float(np.max(increments)) > 1e-9:
        raise AssertionError(
            "h-process domination Vbar(y)-Vbar(x) <= V(y)-V(x) violated "
            f"by {float(np.max(increments)):.3e}"
        )
    return HProcessPotential(b=b, d=d, sites=sites, vbar=vbar, log_g=log_g)


# ---------------------------------------------------------------------------
# the independent tridiagonal oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalProblem:
    """A birth-death chain on [left, right] with absorbing/reflecting ends.

    ``left_boundary`` / ``right_boundary`` are "absorbing" or "reflecting";
    a reflecting boundary moves inward with probability 1.  At least one end
    must absorb (otherwise absorption never happens), and the interval is
    capped at MAX_ORACLE_SITES sites: the oracle is for desk-scale checks.
    """

    env: Environment | Potential
    left: int
    right: int
    left_boundary: str = "absorbing"
    right_boundary: str = "absorbing"
    start: int | None = None

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError(f"need left < right, got [{self.left}, {self.right}]")
        for side in (self.left_boundary, self.right_boundary):
            if side not in ("absorbing", "reflecting"):
                raise ValueError(f"unknown boundary behavior {side!r}")
        if self.left_boundary == "reflecting" and self.right_boundary == "reflecting":
            raise ValueError("at least one boundary must be absorbing")
        if self.right - self.left + 1 > MAX_ORACLE_SITES:
            raise ValueError(
                f"interval [{self.left}, {self.right}] exceeds "
                f"{MAX_ORACLE_SITES} sites; the oracle is for desk-scale checks"
            )
        if self.start is not None and not self.left <= self.start <= self.right:
            raise ValueError(f"start {self.start} outside [{self.left}, {self.right}]")


@dataclass(frozen=True)
class ChainSolution:
    """Per-site absorption probabilities and expected absorption times.

    Arrays are indexed by ``site - problem.left``.  ``absorb_left`` /
    ``absorb_right`` give the probability of being absorbed at that end
    (``None`` when the end reflects, all-ones/zeros patterns included
    otherwise); ``expected_time`` is the mean time to absorption.
    """

    problem: IntervalProblem
    absorb_left: np.ndarray | None
    absorb_right: np.ndarray | None
    expected_time: np.ndarray

    def _at(self, arr: np.ndarray, site: int | None) -> float:
        k = self.problem.start if site is None else site
        if k is None:
            raise ValueError("no start site given: pass site= explicitly")
        return float(arr[k - self.problem.left])

    def absorb_left_at(self, site: int | None = None) -> float:
        if self.absorb_left is None:
            raise ValueError("left boundary reflects: no left absorption")
        return self._at(self.absorb_left, site)

    def absorb_right_at(self, site: int | None = None) -> float:
        if self.absorb_right is None:
            raise ValueError("right boundary reflects: no right absorption")
        return self._at(self.absorb_right, site)

    def expected_time_at(self, site: int | None = None) -> float:
        return self._at(self.expected_time, site)


def _thomas(
    sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray
) -> np.ndarray:
    """Tridiagonal forward elimination + back substitution in long double."""
    n = len(diag)
    c = np.empty(n, dtype=np.longdouble)
    d = np.empty(n, dtype=np.longdouble)
    c[0] = sup[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * c[i - 1]
        c[i] = sup[i] / m
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m
    x = np.empty(n, dtype=np.longdouble)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def chain_oracle(problem: IntervalProblem) -> ChainSolution:
    """Brute-force ground truth for the closed forms above.

    Solves u(x) = omega_x u(x+1) + (1-omega_x) u(x-1) (+1 on the right-hand
    side for expected times) over the non-absorbed sites by extended-precision
    tridiagonal elimination, directly from the transition probabilities —
    no potential, no log-domain shortcuts.
    """
    pot = as_potential(problem.env)
    L, R = problem.left, problem.right
    omega = np.asarray(pot.omega(L, R), dtype=np.longdouble)
    n_sites = R - L + 1
    left_abs = problem.left_boundary == "absorbing"
    right_abs = problem.right_boundary == "absorbing"

    # unknowns: every site except the absorbing endpoints
    first = 1 if left_abs else 0
    last = n_sites - 2 if right_abs else n_sites - 1
    n = last - first + 1
    sub = np.empty(n, dtype=np.longdouble)
    diag = np.ones(n, dtype=np.longdouble)
    sup = np.empty(n, dtype=np.longdouble)
    # interior equation: u(x) - omega_x u(x+1) - (1-omega_x) u(x-1) = rhs
    idx = np.arange(first, last + 1)
    sub[:] = -(1.0 - omega[idx])
    sup[:] = -omega[idx]
    if not left_abs:
        sub[0] = 0.0
        sup[0] = -1.0  # reflecting: u(L) - u(L+1) = rhs(L)
    if not right_abs:
        sup[-1] = 0.0
        sub[-1] = -1.0  # reflecting: u(R) - u(R-1) = rhs(R)

    def solve(rhs_interior: np.ndarray, u_left: float, u_right: float) -> np.ndarray:
        u = np.empty(n_sites, dtype=np.longdouble)
        if n > 0:
            # fold known absorbing-boundary values into the right-hand side,
            # using the actual row coefficients (the edge row may be a
            # reflecting row whose off-diagonal entry is -1, not -omega)
            rhs = rhs_interior.astype(np.longdouble).copy()
            if left_abs:
                rhs[0] -= sub[0] * np.longdouble(u_left)
            if right_abs:
                rhs[-1] -= sup[-1] * np.longdouble(u_right)
            u[first : last + 1] = _thomas(sub, diag, sup, rhs)
        if left_abs:
            u[0] = u_left
        if right_abs:
            u[-1] = u_right
        return u

    if left_abs and right_abs:
        absorb_left = solve(np.zeros(n), 1.0, 0.0).astype(float)
        absorb_right = 1.0 - absorb_left
    elif left_abs:
        absorb_left = np.ones(n_sites)
        absorb_right = None
    else:
        absorb_left = None
        absorb_right = np.ones(n_sites)
    expected_time = solve(np.ones(n), 0.0, 0.0).astype(float)
    return ChainSolution(
        problem=problem,
        absorb_left=absorb_left,
        absorb_right=absorb_right,
        expected_time=expected_time,
    )
