"""Experiments layer: reference laws against independent oracles, statistical
tools on hand-checkable values, batch determinism across worker counts.

The quadrature routines integrate the raw densities with power
substitutions; the oracle here is the regularized incomplete beta function,
which equals each law's CDF because sin(kappa pi)/pi = 1/B(kappa, 1-kappa)
(and the forward law maps onto a beta integral through y = x/(1+x)).
"""

import math

import numpy as np
import pytest
from scipy.special import betainc

from rwrelab import _kernels as K
from rwrelab.envmodel import validate_spec
from rwrelab.experiments import (
    CellResult,
    ExperimentReport,
    arcsine_aging_value,
    clock_model_comparison,
    dynkin_left_cdf,
    dynkin_right_cdf,
    empirical_law,
    estimate_aging,
    excursion_tail_slope,
    ks_distance,
    localization_rate,
    oracle_battery,
    renewal_test,
    trajectory_batch,
    tv_distance,
    wilson_interval,
    write_report,
    write_rows,
)

KAPPAS = (0.1, 0.3, 0.5, 0.7, 0.9)


@pytest.fixture(scope="module", autouse=True)
def _warm_kernels():
    K.warm_up()


@pytest.fixture(scope="module")
def lattice_spec():
    with pytest.warns(UserWarning, match="lattice"):
        return validate_spec(
            "discrete",
            {"rho": [2.0, 0.25], "p": [1.0 / (2.0 * math.sqrt(2.0) - 1.0),
                                       1.0 - 1.0 / (2.0 * math.sqrt(2.0) - 1.0)]},
        )


# ---------------------------------------------------------------------------
# aging value
# ---------------------------------------------------------------------------


def test_arcsine_against_betainc_oracle():
    # sin(kpi)/pi integral_0^u y^(k-1)(1-y)^(-k) dy is the regularized
    # incomplete beta I_u(k, 1-k); scipy computes it by a different algorithm.
    for kappa in KAPPAS:
        for h in (1.0 + 1e-6, 1.2, 2.0, 5.0, 50.0, 1e6):
            expected = float(betainc(kappa, 1.0 - kappa, 1.0 / h))
            assert arcsine_aging_value(kappa, h) == pytest.approx(
                expected, abs=1e-10
            ), (kappa, h)


def test_arcsine_closed_form_at_half():
    # kappa = 1/2 collapses to (2/pi) arcsin(1/sqrt(h)): 1/2 at h=2, 1/3 at h=4
    assert arcsine_aging_value(0.5, 2.0) == pytest.approx(0.5, abs=1e-11)
    assert arcsine_aging_value(0.5, 4.0) == pytest.approx(1.0 / 3.0, abs=1e-11)


def test_arcsine_monotone_onto_unit_interval():
    hs = (1.0 + 1e-9, 1.05, 1.5, 2.0, 4.0, 16.0, 256.0, 1e9)
    for kappa in (0.25, 0.5, 0.8):
        vals = [arcsine_aging_value(kappa, h) for h in hs]
        assert all(0.0 < v < 1.0 for v in vals)
        assert all(a > b for a, b in zip(vals, vals[1:]))
        # boundary rates: 1 - value ~ (1-1/h)^(1-kappa) as h -> 1+ and
        # value ~ h^(-kappa) as h -> infinity
        assert vals[0] > 1.0 - 2.0 * 1e-9 ** (1.0 - kappa)
        assert vals[-1] < 2.0 * 1e9 ** (-kappa)


def test_arcsine_rejects_bad_arguments():
    for h in (1.0, 0.5, -3.0):
        with pytest.raises(ValueError):
            arcsine_aging_value(0.5, h)
    for kappa in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            arcsine_aging_value(kappa, 2.0)


# ---------------------------------------------------------------------------
# renewal laws
# ---------------------------------------------------------------------------


def test_dynkin_left_against_betainc_oracle():
    # density (1-x)^(k-1) x^(-k) normalized by sin(kpi)/pi is Beta(1-k, k)
    pairs = ((0.0, 1.0), (0.0, 0.2), (0.1, 0.35), (0.5, 0.999), (0.25, 0.75))
    for kappa in KAPPAS:
        for x1, x2 in pairs:
            expected = float(
                betainc(1.0 - kappa, kappa, x2) - betainc(1.0 - kappa, kappa, x1)
            )
            assert dynkin_left_cdf(kappa, x1, x2) == pytest.approx(
                expected, abs=1e-10
            ), (kappa, x1, x2)


def test_dynkin_left_total_mass_and_median():
    for kappa in KAPPAS:
        assert dynkin_left_cdf(kappa, 0.0, 1.0) == pytest.approx(1.0, abs=1e-9)
    # at kappa = 1/2 the law is arcsine-symmetric: mass 1/2 below 1/2
    assert dynkin_left_cdf(0.5, 0.0, 0.5) == pytest.approx(0.5, abs=1e-10)


def test_dynkin_left_rejects_bad_interval():
    for x1, x2 in ((-0.1, 0.5), (0.5, 0.5), (0.7, 0.2), (0.0, 1.2)):
        with pytest.raises(ValueError):
            dynkin_left_cdf(0.5, x1, x2)


def test_dynkin_right_against_betainc_oracle():
    # y = x/(1+x) turns dx/(x^k (1+x)) into a Beta(1-k, k) integral
    pairs = ((0.0, 1.0), (0.0, 0.3), (0.5, 2.0), (1.0, 50.0), (3.0, math.inf),
             (0.0, math.inf))
    for kappa in KAPPAS:
        for x1, x2 in pairs:
            y1, y2 = x1 / (1.0 + x1), 1.0 if math.isinf(x2) else x2 / (1.0 + x2)
            expected = float(
                betainc(1.0 - kappa, kappa, y2) - betainc(1.0 - kappa, kappa, y1)
            )
            assert dynkin_right_cdf(kappa, x1, x2) == pytest.approx(
                expected, abs=1e-10
            ), (kappa, x1, x2)


def test_dynkin_right_rejects_bad_interval():
    for x1, x2 in ((-0.5, 1.0), (2.0, 2.0), (3.0, 1.0)):
        with pytest.raises(ValueError):
            dynkin_right_cdf(0.5, x1, x2)


def test_aging_equals_forward_renewal_tail():
    # P(no renewal in (t, th]) = P(forward overshoot at t exceeds h-1):
    # the two independent quadrature paths must meet to 1e-9
    for kappa in KAPPAS:
        for h in (1.5, 2.0, 4.0, 10.0, 100.0):
            lhs = arcsine_aging_value(kappa, h)
            rhs = dynkin_right_cdf(kappa, h - 1.0, math.inf)
            assert lhs == pytest.approx(rhs, abs=1e-9), (kappa, h)


# ---------------------------------------------------------------------------
# statistical tools
# ---------------------------------------------------------------------------


def test_wilson_interval_textbook_value():
    # 50/100 at 95%: standard worked example gives (0.4038, 0.5962)
    lo, hi = wilson_interval(50, 100, 0.95)
    assert lo == pytest.approx(0.4038, abs=5e-4)
    assert hi == pytest.approx(0.5962, abs=5e-4)


def test_wilson_interval_contains_point_estimate_and_clips():
    for s, n in ((0, 20), (1, 17), (10, 20), (19, 20), (20, 20)):
        lo, hi = wilson_interval(s, n)
        assert 0.0 <= lo <= s / n <= hi <= 1.0
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0


def test_wilson_interval_narrows_with_n_and_level():
    w1 = wilson_interval(50, 100, 0.99)
    w2 = wilson_interval(500, 1000, 0.99)
    w3 = wilson_interval(50, 100, 0.9)
    assert w2[1] - w2[0] < w1[1] - w1[0]
    assert w3[1] - w3[0] < w1[1] - w1[0]


def test_wilson_interval_validation():
    with pytest.raises(ValueError):
        wilson_interval(1, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 3)
    with pytest.raises(ValueError):
        wilson_interval(-1, 3)
    with pytest.raises(ValueError):
        wilson_interval(1, 3, level=1.0)


def test_tv_distance_hand_values():
    assert tv_distance({0: 0.5, 1: 0.5}, {0: 1.0}) == pytest.approx(0.5)
    assert tv_distance({3: 1.0}, {3: 1.0}) == 0.0
    assert tv_distance({0: 1.0}, {1: 1.0}) == pytest.approx(1.0)
    p, q = {0: 0.2, 1: 0.8}, {1: 0.5, 2: 0.5}
    assert tv_distance(p, q) == tv_distance(q, p) == pytest.approx(0.5)


def test_empirical_law():
    assert empirical_law([1, 1, 2]) == {1: 2 / 3, 2: 1 / 3}
    with pytest.raises(ValueError):
        empirical_law([])


def test_ks_distance_hand_values():
    uniform = lambda x: np.asarray(x, dtype=float)
    # two points 1/4 and 3/4: the empirical CDF misses uniform by 1/4
    assert ks_distance([0.25, 0.75], uniform) == pytest.approx(0.25)
    # ideal grid sample: D = 1/(2n) exactly
    n = 100
    xs = (np.arange(n) + 0.5) / n
    assert ks_distance(xs, uniform) == pytest.approx(0.5 / n, abs=1e-12)


def test_ks_distance_censored_tail():
    uniform = lambda x: np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    # one draw at 0.5 plus one censored beyond xmax=1: F-hat(1) = 1/2 vs F=1
    d = ks_distance([0.5], uniform, n_total=2, xmax=1.0)
    assert d == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ks_distance([], uniform)


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


def _dummy_report(seed: int, execution: dict) -> ExperimentReport:
    cell = CellResult(t=100, h=2.0, eta=1.0, estimate=0.5, ci_lo=0.4,
                      ci_hi=0.6, reference=0.5, n=10, flags={"step_cap_exceeded": 1})
    return ExperimentReport(
        experiment="aging", config={"family": "lognormal", "seed": seed},
        kappa=0.5, grid=[{"t": 100, "h": 2.0, "eta": 1.0}],
        cells=[cell], distances={},
        manifest={"config_hash": "abc", "execution": execution},
    )


def test_cell_result_validates_interval():
    with pytest.raises(ValueError):
        CellResult(t=1, h=None, eta=None, estimate=0.9, ci_lo=0.1, ci_hi=0.5,
                   reference=None, n=3)
    with pytest.raises(ValueError):
        CellResult(t=1, h=None, eta=None, estimate=None, ci_lo=0.1, ci_hi=0.5,
                   reference=None, n=3)
    with pytest.raises(ValueError):
        CellResult(t=1, h=None, eta=None, estimate=0.3, ci_lo=0.1, ci_hi=None,
                   reference=None, n=3)
    # a bare point value without an interval is fine (audit-style cells)
    CellResult(t=1, h=None, eta=None, estimate=0.3, ci_lo=None, ci_hi=None,
               reference=None, n=3)


def test_report_body_bytes_ignore_execution_only():
    a = _dummy_report(7, {"workers": 1, "wall_s": 0.1})
    b = _dummy_report(7, {"workers": 4, "wall_s": 9.9})
    c = _dummy_report(8, {"workers": 1, "wall_s": 0.1})
    assert a.body_bytes() == b.body_bytes()
    assert a.body_bytes() != c.body_bytes()


def test_report_and_rows_files(tmp_path):
    report = _dummy_report(7, {"workers": 1})
    path = tmp_path / "report.json"
    write_report(report, str(path))
    import json

    loaded = json.loads(path.read_text())
    assert loaded["schema"] == "1"
    assert loaded["cells"][0]["estimate"] == 0.5
    assert loaded["cells"][0]["flags"] == {"step_cap_exceeded": 1}

    rows_path = tmp_path / "rows.csv"
    write_rows(str(rows_path), [{"b": 1, "a": None}, {"a": 2.5, "c": "x"}])
    lines = rows_path.read_text().splitlines()
    assert lines[0] == "a,b,c"
    assert lines[1] == ",1,"
    assert lines[2] == "2.5,,x"


# ---------------------------------------------------------------------------
# annealed batches
# ---------------------------------------------------------------------------


def test_trajectory_batch_bookkeeping(lognormal_half):
    batch = trajectory_batch(lognormal_half, t=2000, h=2.0, eta=2.0,
                             n_replicas=24, seed=11)
    assert batch.n_requested == 24
    assert len(batch.rows) == 24
    assert batch.n_valid + sum(batch.excluded.values()) == 24
    assert sum(batch.level_hist.values()) == batch.n_valid
    assert batch.n_valid > 0
    for name, lvl in (("aged", "level_th"), ("localized_t", "level_t"),
                      ("sandwich", "level_t")):
        assert batch.counts[name] <= batch.trials[name] <= batch.n_valid
        entered = sum(1 for r in batch.rows
                      if r.get("flag") is None and r[lvl] >= 1)
        assert batch.trials[name] == entered
    cell = batch.cell("aged", arcsine_aging_value(0.5, 2.0))
    assert cell.n == batch.trials["aged"]
    assert cell.ci_lo <= cell.estimate <= cell.ci_hi
    assert cell.reference == pytest.approx(0.5, abs=1e-10)
    # replicas that never entered a deep valley are excluded with counts
    assert cell.flags.get("no_deep_valley", 0) >= batch.n_valid - cell.n
    # localization cell shares the batch
    loc = batch.cell("localized_t", 1.0)
    assert 0.0 <= loc.estimate <= 1.0 and loc.reference == 1.0
    assert loc.n == batch.trials["localized_t"]


def test_trajectory_batch_worker_count_is_invisible(lognormal_half):
    kw = dict(t=1500, h=2.0, eta=2.0, n_replicas=8, seed=5)
    assert (trajectory_batch(lognormal_half, **kw, workers=1).rows
            == trajectory_batch(lognormal_half, **kw, workers=4).rows)


def test_estimate_aging_and_localization_cells(lognormal_half):
    cell = estimate_aging(lognormal_half, t=1500, h=2.0, eta=2.0,
                          n_replicas=12, seed=3)
    assert cell.t == 1500 and cell.n <= 12
    assert cell.reference == pytest.approx(0.5, abs=1e-10)
    loc = localization_rate(lognormal_half, t=1500, eta=2.0,
                            n_replicas=12, seed=3)
    assert loc.reference == 1.0
    # the aging denominator (entered by th) can only exceed the
    # localization denominator (entered by t)
    assert loc.n <= cell.n


def test_batch_validation(lognormal_half, lattice_spec):
    with pytest.raises(ValueError):
        trajectory_batch(lognormal_half, 1000, 2.0, 1.0, 0, seed=1)
    with pytest.raises(ValueError):
        estimate_aging(lattice_spec, 1000, 2.0, 1.0, 4, seed=1)


# ---------------------------------------------------------------------------
# renewal sampling
# ---------------------------------------------------------------------------


def test_renewal_test_bookkeeping(lognormal_half):
    res = renewal_test(lognormal_half, t=2000, n_replicas=48, seed=17)
    assert res.n_requested == 48
    assert len(res.rows) == 48
    n_flagged = sum(res.excluded.values())
    n_zero = sum(1 for r in res.rows
                 if r.get("flag") is None and r["level"] < 1)
    assert res.n_level_pos == 48 - n_flagged - n_zero
    assert 0.0 <= res.ks_left <= 1.0
    assert 0.0 <= res.ks_right <= 1.0
    assert 0.0 <= res.sandwich_freq <= 1.0
    assert res.n_right <= res.n_level_pos
    assert res.right_censored <= res.n_right


def test_renewal_worker_count_is_invisible(lognormal_half):
    kw = dict(t=1200, n_replicas=10, seed=23)
    a = renewal_test(lognormal_half, **kw, workers=1)
    b = renewal_test(lognormal_half, **kw, workers=3)
    assert a.rows == b.rows
    assert a.ks_left == b.ks_left and a.ks_right == b.ks_right


def test_renewal_validation(lognormal_half):
    with pytest.raises(ValueError):
        renewal_test(lognormal_half, 1000, 0, seed=1)
    with pytest.raises(ValueError):
        renewal_test(lognormal_half, 1000, 4, seed=1, horizon_mult=1.0)


# ---------------------------------------------------------------------------
# clock model comparison
# ---------------------------------------------------------------------------


def test_clock_compare_bookkeeping(lognormal_half):
    res = clock_model_comparison(lognormal_half, t=2000, n_env=6,
                                 n_walks_per_env=150, seed=31,
                                 occupation_walks=8)
    assert res.n_env_valid + sum(res.excluded.values()) == 6
    assert len(res.tv_values) == res.n_env_valid > 0
    assert all(0.0 <= v <= 1.0 for v in res.tv_values)
    assert res.tv_median == pytest.approx(float(np.median(res.tv_values)))
    q1, q3 = res.tv_quartiles
    assert q1 <= res.tv_median <= q3
    for row in res.rows:
        if row.get("flag") is None:
            assert row["K"] >= 1
    if res.occ_tv_values:
        assert res.occ_tv_median is not None
        assert all(0.0 <= v <= 1.0 for v in res.occ_tv_values)


def test_clock_compare_worker_count_is_invisible(lognormal_half):
    kw = dict(t=1200, n_env=4, n_walks_per_env=60, seed=13,
              occupation_walks=0)
    a = clock_model_comparison(lognormal_half, **kw, workers=1)
    b = clock_model_comparison(lognormal_half, **kw, workers=2)
    assert a.rows == b.rows and a.tv_median == b.tv_median


def test_clock_compare_validation(lognormal_half):
    with pytest.raises(ValueError):
        clock_model_comparison(lognormal_half, 1000, 0, 10, seed=1)
    with pytest.raises(ValueError):
        clock_model_comparison(lognormal_half, 1000, 2, 0, seed=1)


# ---------------------------------------------------------------------------
# excursion tail
# ---------------------------------------------------------------------------


def test_excursion_tail_slope_recovers_kappa(lognormal_half):
    fit = excursion_tail_slope(lognormal_half, n_excursions=40_000, seed=2)
    assert fit.n_excursions == 40_000
    assert len(fit.h_grid) >= 4
    assert all(s >= 200 for s in fit.survival)
    # smoke-sized sample: the tail exponent lands near -kappa, not tightly
    assert fit.slope == pytest.approx(-0.5, abs=0.12)


def test_excursion_tail_slope_validation(lognormal_half):
    with pytest.raises(ValueError):
        excursion_tail_slope(lognormal_half, n_excursions=10, seed=1)


# ---------------------------------------------------------------------------
# oracle battery
# ---------------------------------------------------------------------------


def test_oracle_battery_agrees_with_chain_solver(lognormal_half):
    battery = oracle_battery(lognormal_half, n_env=5, seed=41, max_len=80)
    assert battery.n_env == 5 and len(battery.cases) == 5
    assert set(battery.max_rel) == {
        "hit_prob", "escape_prob", "expected_hit_time_reflected",
        "invariant_measure",
    }
    assert battery.worst() <= 1e-10
    assert oracle_battery(lognormal_half, 2, 41).max_rel  # defaults run too
