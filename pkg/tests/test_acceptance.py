"""Exit criteria of the build, each checked at its stated tolerance.

Every test records one PASS/FAIL line (printed live with ``-s`` and again in
the terminal summary) and then asserts, so a failing criterion also fails
the run.
"""

import os
import random
import time

import numpy as np
import pytest

from anchor_oss.abm import AbmParams, run_ensemble
from anchor_oss.counterfactual import fit_preshock_trend, simulate_counterfactual
from anchor_oss.groups import HoursClass, mozilla_devs, working_hours_class
from anchor_oss.network import build_graph, distance_categories
from anchor_oss.panel import OUTCOMES, PanelConfig, build_panel, calendar
from anchor_oss.regression import build_design, default_lag, design_row, fit, hac_covariance

from oracles import brute_force_panel, hc0_loops, normal_equations, oracle_categories, random_graph, unique_times
from synth import TRUE_BETA, ev, random_events, synthetic_log_outcome, synthetic_panel, ts
from verdicts import VERDICTS, record

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def abm_defaults():
    start = time.perf_counter()
    ensemble = run_ensemble(AbmParams(runs=100, seed=0))
    return ensemble, time.perf_counter() - start


def slope(values, lo, hi):
    x = np.arange(lo, hi + 1)
    return float(np.polyfit(x, values[lo : hi + 1], 1)[0])


def test_criterion_01_join_rate_shift(abm_defaults):
    ensemble, seconds = abm_defaults
    joins = ensemble.mean.new_joins
    ratio = joins[50:56].mean() / joins[44:50].mean()
    ok = 0.544 <= ratio <= 0.644 and seconds < 60
    record(1, ok, f"join ratio 50-55 / 44-49 = {ratio:.4f} (target [0.544, 0.644]), runtime {seconds:.1f} s")
    assert ok


def test_criterion_02_qualitative_shape(abm_defaults):
    ensemble, seconds = abm_defaults
    joins, active = ensemble.mean.new_joins, ensemble.mean.active_count
    drop_at = int(np.argmin(np.diff(joins))) + 1
    late, early = slope(active, 55, 99), slope(active, 10, 49)
    ok = drop_at == 50 and late < early and seconds < 60
    record(
        2, ok,
        f"largest new-joins drop at period {drop_at}; active slope 55-99 {late:.1f} vs 10-49 {early:.1f}, "
        f"runtime {seconds:.1f} s",
    )
    assert ok


def test_criterion_03_accounting(abm_defaults):
    ensemble, _ = abm_defaults
    bad = 0
    for tr in ensemble.runs:
        prev = np.concatenate([[tr.initial_active], tr.active_count[:-1]])
        bad += int(np.sum(tr.active_count != prev + tr.new_joins - tr.exits))
    ok = bad == 0 and len(ensemble.runs) == 100
    record(3, ok, f"{len(ensemble.runs)} runs x 100 periods, {bad} accounting violations")
    assert ok


def test_criterion_04_ols_oracle():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(1000):
        p = int(rng.integers(1, 17))
        n = int(rng.integers(p + 2, 201))
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        y = X @ rng.standard_normal(p) + rng.standard_normal(n)
        ref = normal_equations(X, y)
        got = fit(X, y, lag=0).beta
        worst = max(worst, float(np.max(np.abs(got - ref)) / np.max(np.abs(ref))))
    ok = worst < 1e-8
    record(4, ok, f"1000 random fits, worst relative error {worst:.2e} (limit 1e-8)")
    assert ok


def test_criterion_05_hac_degenerate():
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 10))
        n = int(rng.integers(p + 2, 150))
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        e = rng.standard_normal(n) * rng.uniform(0.1, 3.0, n)
        worst = max(worst, float(np.max(np.abs(hac_covariance(X, e, 0) - hc0_loops(X, e)))))
    lag = default_lag(110)
    ok = worst < 1e-10 and lag == 4
    record(5, ok, f"100 instances, max |HAC(0) - HC0| = {worst:.2e} (limit 1e-10); default lag at T=110 is {lag}")
    assert ok


def test_criterion_06_event_study_recovery():
    start = time.perf_counter()
    labels = ("t", "post_shock", "t_x_post_shock")
    covered = dict.fromkeys(labels, 0)
    seeds = range(200)
    for seed in seeds:
        rows, y = synthetic_log_outcome(seed, rho=0.5, sigma=0.02)
        result = fit(build_design(rows), y)
        for label, truth in zip(labels, TRUE_BETA):
            lo, hi = result.conf_int(label)
            covered[label] += lo <= truth <= hi
    seconds = time.perf_counter() - start
    rates = {k: v / len(seeds) for k, v in covered.items()}
    ok = all(r >= 0.88 for r in rates.values()) and seconds < 120
    shown = ", ".join(f"{k} {r:.3f}" for k, r in rates.items())
    record(6, ok, f"95% HAC CI coverage over 200 seeds: {shown} (need >= 0.88), runtime {seconds:.1f} s")
    assert ok


def test_criterion_07_counterfactual_closed_forms():
    trend = fit_preshock_trend(synthetic_panel(0), "commits")
    post = [r for r in calendar(PanelConfig()) if r.t >= 1]
    weeks, months = [r.t for r in post], [r.month for r in post]
    Xf = np.vstack([design_row(trend.labels, t, 0, m) for t, m in zip(weeks[:20], months[:20])])
    mean_levels = np.exp(Xf @ trend.beta)
    zero = np.zeros_like(trend.hac_cov)

    ident = simulate_counterfactual(trend, weeks, months, mean_levels, cov=zero)
    width = ident.ci_high - ident.ci_low
    shifted = simulate_counterfactual(trend, weeks, months, 0.9 * mean_levels, draws=10_000, seed=7)
    again = simulate_counterfactual(trend, weeks, months, 0.9 * mean_levels, draws=10_000, seed=7)
    ok = (
        abs(ident.percent_effect) < 1e-12
        and width < 1e-12
        and abs(shifted.percent_effect + 10) <= 0.2
        and shifted.to_json() == again.to_json()
    )
    record(
        7, ok,
        f"identity effect {ident.percent_effect:.1e}, CI width {width:.1e}; level shift "
        f"{shifted.percent_effect:.4f}% [{shifted.ci_low:.2f}, {shifted.ci_high:.2f}]; "
        f"same-seed JSON identical: {shifted.to_json() == again.to_json()}",
    )
    assert ok


def test_criterion_08_network_oracle():
    rng = random.Random(808)
    mismatches = 0
    for _ in range(100):
        g = random_graph(rng)
        seeds = set(rng.sample(g.nodes, k=rng.randint(1, min(3, len(g)))))
        mismatches += distance_categories(g, seeds) != oracle_categories(g.nodes, g.edges, seeds)

    shock = ts("2020-08-11T00:00:00")
    pre = "2020-01-07T12:00:00"
    four_four = build_graph([ev("A", "R", pre)] * 4 + [ev("B", "R", pre)] * 4, shock)
    four_three = build_graph([ev("A", "R", pre)] * 4 + [ev("B", "R", pre)] * 3, shock)
    after_shock = build_graph([ev("A", "R", pre)] * 4 + [ev("B", "R", "2020-08-11T00:00:00")] * 9, shock)
    fixtures_ok = (
        four_four.edges == [("A", "B")] and four_three.edges == [] and after_shock.edges == []
    )
    ok = mismatches == 0 and fixtures_ok
    record(8, ok, f"100 random graphs, {mismatches} mismatches vs Floyd-Warshall; 4-commit fixtures ok: {fixtures_ok}")
    assert ok


def test_criterion_09_panel_oracle():
    events = unique_times(random_events(1000, seed=909))
    config = PanelConfig()
    panel = build_panel(events, config)
    oracle = brute_force_panel(events, config)
    cells = sum(
        row.outcome(k) != expect[k] for row, expect in zip(panel, oracle) for k in OUTCOMES
    )
    rows = calendar(config)
    boundary = config.week_start(84) == ts("2020-08-11T00:00:00") and rows[84].t == 1 and rows[83].t == 0
    ok = cells == 0 and len(panel) == 110 and len(oracle) == 110 and boundary
    record(
        9, ok,
        f"{len(events)} events, {cells} of {110 * len(OUTCOMES)} cells differ from the recount; "
        f"{len(panel)} rows; bin boundary at 2020-08-11: {boundary}",
    )
    assert ok


def test_criterion_10_classification_totality():
    partition_ok = True
    for seed in range(20):
        events = random_events(500, seed=seed)
        classes = working_hours_class(events)
        devs = {e.developer_id for e in events}
        eight = {d for d, c in classes.items() if c is HoursClass.EIGHT_TO_SIX}
        owls = {d for d, c in classes.items() if c is HoursClass.NIGHT_OWL}
        partition_ok &= set(classes) == devs and not (eight & owls) and eight | owls == devs

    tuesday = "2020-08-11T10:00:00"
    half = [ev("a", "r", tuesday), ev("a", "r", "2020-08-11T22:00:00")]
    boundary_ok = working_hours_class(half) == {"a": HoursClass.EIGHT_TO_SIX}

    single_in = mozilla_devs([ev("m", "r", "2019-05-01T00:00:00", suffix="mozilla.com")]) == {"m"}
    single_out = mozilla_devs([ev("g", "r", "2019-05-01T00:00:00", suffix="gmail.com")]) == set()
    ok = partition_ok and boundary_ok and single_in and single_out
    record(
        10, ok,
        f"hours classes partition developers on 20 random logs: {partition_ok}; 50% case is 8-18: {boundary_ok}; "
        f"single-event affiliation: {single_in and single_out}",
    )
    assert ok


def test_criterion_11_full_data_signs():
    """Opt-in integration path: point ANCHOR_OSS_FULL_DATA at a real commit log."""
    path = os.environ.get("ANCHOR_OSS_FULL_DATA")
    if not path:
        VERDICTS[11] = "criterion 11: SKIP  optional full-data run (set ANCHOR_OSS_FULL_DATA to enable)"
        pytest.skip("no full-data event log configured")
    from anchor_oss.ingest import curate, parse_commit_log
    from anchor_oss.panel import log_transform

    with open(path, "rb") as fh:
        events, _ = curate(parse_commit_log(fh))
    panel = build_panel(events, PanelConfig())
    result = fit(build_design(panel), log_transform(panel, "commits", "log"))
    signs = (result.coef("t") > 0, result.coef("post_shock") < 0, result.coef("t_x_post_shock") < 0)
    ok = all(signs)
    record(11, ok, f"full-data coefficient signs (+, -, -) reproduced: {signs}")
    assert ok
