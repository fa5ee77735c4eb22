import io
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from anchor_oss.counterfactual import (
    cholesky_with_jitter,
    counterfactual_for_panel,
    fit_preshock_trend,
    simulate_counterfactual,
)
from anchor_oss.errors import CounterfactualError
from anchor_oss.panel import LogMode, PanelConfig, calendar
from anchor_oss.regression import design_row

from synth import TRUE_BETA, synthetic_panel

POST = [r for r in calendar(PanelConfig()) if r.t >= 1]
WEEKS = [r.t for r in POST]
MONTHS = [r.month for r in POST]


def mean_prediction(trend, horizon=20, mode=LogMode.LOG):
    X = np.vstack([design_row(trend.labels, t, 0, m) for t, m in zip(WEEKS[:horizon], MONTHS[:horizon])])
    return LogMode(mode).inverse(X @ trend.beta)


@pytest.fixture(scope="module")
def reference():
    return fit_preshock_trend(synthetic_panel(0), "commits")


def test_preshock_uses_84_weeks(reference):
    assert reference.n_obs == 84
    assert reference.labels[:2] == ("intercept", "t")
    assert "post_shock" not in reference.labels


def test_exact_exponential_trend():
    rows = [replace(r, commits=2 ** (r.t + 90)) for r in calendar(PanelConfig())]
    trend = fit_preshock_trend(rows, "commits")
    assert trend.coef("t") == pytest.approx(math.log(2), abs=1e-12)
    assert np.max(np.abs(trend.residuals)) < 1e-9
    assert np.max(np.abs(trend.beta[2:])) < 1e-9


def test_too_few_months():
    rows = [r for r in calendar(PanelConfig()) if r.t <= 0 and r.month == 3]
    rows = [replace(r, commits=5) for r in rows]
    with pytest.raises(CounterfactualError) as info:
        fit_preshock_trend(rows, "commits")
    assert info.value.code == "TOO_FEW_MONTHS"


def test_identity_case(reference):
    observed = mean_prediction(reference)
    est = simulate_counterfactual(reference, WEEKS, MONTHS, observed, cov=np.zeros_like(reference.hac_cov))
    assert abs(est.percent_effect) < 1e-12
    assert est.ci_high - est.ci_low < 1e-12
    assert len(est.per_week_ratio) == 20
    assert np.allclose(est.per_week_ratio, 1.0, rtol=0, atol=1e-12)


def test_ten_percent_shortfall(reference):
    observed = 0.9 * mean_prediction(reference)
    est = simulate_counterfactual(reference, WEEKS, MONTHS, observed, cov=np.zeros_like(reference.hac_cov))
    assert est.percent_effect == pytest.approx(-10.0, abs=1e-10)
    assert est.point_percent_effect == pytest.approx(-10.0, abs=1e-10)
    assert est.ci_low == pytest.approx(-10.0, abs=1e-10)

    noisy = simulate_counterfactual(reference, WEEKS, MONTHS, observed, draws=10_000, seed=3)
    assert noisy.percent_effect == pytest.approx(-10.0, abs=1e-10)
    assert noisy.ci_low <= noisy.percent_effect <= noisy.ci_high


def test_cumulative_differs_from_point():
    observed = np.ones(20)
    observed[-1] = 2.0
    trend = fit_preshock_trend([replace(r, commits=1) for r in calendar(PanelConfig())], "commits")
    est = simulate_counterfactual(trend, WEEKS, MONTHS, observed, cov=np.zeros_like(trend.hac_cov))
    assert est.point_percent_effect == pytest.approx(100.0)
    assert est.percent_effect == pytest.approx(5.0)


def test_same_seed_same_json(reference):
    observed = mean_prediction(reference) * 0.8
    a = simulate_counterfactual(reference, WEEKS, MONTHS, observed, seed=11)
    b = simulate_counterfactual(reference, WEEKS, MONTHS, observed, seed=11)
    assert a.to_json() == b.to_json()
    payload = json.loads(a.to_json())
    assert payload["n_draws"] == 10_000 and payload["horizon_weeks"] == 20


def test_seed_stability():
    _, first = counterfactual_for_panel(synthetic_panel(0), "commits", seed=0)
    lows, highs = [], []
    for seed in range(10):
        _, est = counterfactual_for_panel(synthetic_panel(0), "commits", seed=seed)
        assert est.percent_effect == first.percent_effect
        lows.append(est.ci_low)
        highs.append(est.ci_high)
    assert max(lows) - min(lows) < 0.5
    assert max(highs) - min(highs) < 0.5


def test_bigger_covariance_wider_band(reference):
    observed = mean_prediction(reference)
    for seed in range(5):
        base = simulate_counterfactual(reference, WEEKS, MONTHS, observed, draws=2000, seed=seed)
        wide = simulate_counterfactual(
            reference, WEEKS, MONTHS, observed, draws=2000, seed=seed, cov=4 * reference.hac_cov
        )
        assert wide.ci_high - wide.ci_low > base.ci_high - base.ci_low


def test_log1p_mode_identity():
    panel = synthetic_panel(1)
    trend = fit_preshock_trend(panel, "commits", mode="log1p")
    observed = mean_prediction(trend, mode="log1p")
    assert np.allclose(np.log1p(observed), np.log1p(LogMode.LOG1P.inverse(np.log1p(observed))), atol=1e-12)
    est = simulate_counterfactual(
        trend, WEEKS, MONTHS, observed, mode="log1p", cov=np.zeros_like(trend.hac_cov)
    )
    assert abs(est.percent_effect) < 1e-10


def test_horizon_exceeds_data(reference):
    with pytest.raises(CounterfactualError) as info:
        simulate_counterfactual(reference, WEEKS, MONTHS, np.ones(26), horizon=27)
    assert info.value.code == "HORIZON_EXCEEDS_DATA"


def test_cholesky_jitter():
    v = np.array([[1.0], [2.0], [3.0]])
    singular = v @ v.T
    L = cholesky_with_jitter(singular)
    assert np.allclose(L @ L.T, singular, atol=1e-6 * np.trace(singular))
    assert np.array_equal(cholesky_with_jitter(np.zeros((3, 3))), np.zeros((3, 3)))
    with pytest.raises(CounterfactualError) as info:
        cholesky_with_jitter(np.diag([1.0, -1.0]))
    assert info.value.code == "NON_PSD_COVARIANCE"


def test_slope_unbiased_across_replications():
    slopes = np.array([fit_preshock_trend(synthetic_panel(s, rho=0.0), "commits").coef("t") for s in range(200)])
    half_width = 1.959963984540054 * slopes.std(ddof=1) / np.sqrt(slopes.size)
    assert abs(slopes.mean() - TRUE_BETA[0]) < half_width


def test_ratio_csv(reference):
    observed = mean_prediction(reference)
    est = simulate_counterfactual(reference, WEEKS, MONTHS, observed, draws=10, horizon=3)
    buf = io.StringIO()
    est.write_ratio_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,observed,counterfactual_mean,ratio"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3"]
