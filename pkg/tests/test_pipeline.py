import math

import pytest

from gamowkit import InvalidInputError, PipelineConfig, run_pipeline

# dark periods (10 s) and bright gaps (10 s) both far longer than the 0.1 s bins
FAST = PipelineConfig(gamma=0.1, min_periods=100, seed=7)


@pytest.fixture(scope="module")
def fast_result():
    return run_pipeline(FAST)


def test_report_contains_both_lifetimes(fast_result):
    d = fast_result.to_dict()
    assert d["tau_theor"] == 10.0
    assert d["ratio"] == pytest.approx(d["tau_exp"] / d["tau_theor"])
    lo, hi = d["ratio_band"]
    assert hi - 1 == pytest.approx(3 / math.sqrt(d["n_dark_periods"]))
    assert d["within_band"] == (lo <= d["ratio"] <= hi)
    assert d["config"]["seed"] == 7


def test_enough_periods_and_ground_truth(fast_result):
    assert fast_result.estimate.n >= 100
    assert fast_result.match.true_fraction >= 0.97
    assert fast_result.to_dict()["within_band"]


def test_pipeline_is_deterministic(fast_result):
    again = run_pipeline(FAST)
    assert again.estimate == fast_result.estimate
    assert again.duration == fast_result.duration


def test_explicit_duration_is_respected():
    result = run_pipeline(PipelineConfig(gamma=0.5, shelving_rate=0.5, duration=100.0, min_periods=2))
    assert result.duration == 100.0


def test_min_periods_validated():
    with pytest.raises(InvalidInputError):
        run_pipeline(PipelineConfig(min_periods=1))
