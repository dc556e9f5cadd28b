import math

import numpy as np
import pytest

from src.errors import DomainError, InsufficientDataError
from src.stats_kernel import (BOX_FIELDS, BoxSummary, binomial_se, bootstrap_resample, box_summary,
                              normal_cdf, normal_quantile, sample_stats, welch_t_test)


def test_normal_quantile_matches_table_values():
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert normal_quantile(0.8) == pytest.approx(0.841621, abs=1e-6)
    assert normal_cdf(normal_quantile(0.3)) == pytest.approx(0.3)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_normal_quantile_rejects_outside_unit_interval(p):
    with pytest.raises(DomainError):
        normal_quantile(p)


def test_sample_stats_uses_unbiased_variance():
    mean, variance = sample_stats([1.0, 2.0, 3.0, 4.0])
    assert mean == 2.5
    assert variance == pytest.approx(5.0 / 3.0)


def test_sample_stats_needs_two_values():
    with pytest.raises(InsufficientDataError):
        sample_stats([1.0])


def test_welch_hand_example():
    a = [1, 2, 3, 4, 5]
    b = [2, 4, 6, 8, 10]
    result = welch_t_test(a, b, 0.05)
    # se^2 = 2.5/5 + 10/5, df = 5.88 -> 5
    assert result.statistic == pytest.approx(3 / math.sqrt(2.5))
    assert result.critical_value == pytest.approx(2.570582, abs=1e-5)
    assert not result.reject


def test_welch_zero_variance_cases():
    same = welch_t_test([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.05)
    assert same.statistic == 0.0 and not same.reject
    shifted = welch_t_test([1.0, 1.0, 1.0], [2.0, 2.0, 2.0], 0.05)
    assert shifted.statistic == math.inf and shifted.reject


def test_welch_null_rejection_rate_is_calibrated():
    rng = np.random.default_rng(99)
    n_sims = 4000
    rejects = sum(welch_t_test(rng.normal(0, 1, 30), rng.normal(0, 3, 20), 0.05).reject for _ in range(n_sims))
    assert rejects / n_sims == pytest.approx(0.05, abs=0.02)


def test_box_summary_flags_outlier():
    box = box_summary([1, 2, 3, 4, 100])
    assert box == BoxSummary(median=3.0, q1=2.0, q3=4.0, whisker_low=1.0, whisker_high=4.0, n_outliers=1)
    assert tuple(box.as_dict()) == BOX_FIELDS


def test_box_summary_single_value():
    box = box_summary([7])
    assert box.median == box.whisker_low == box.whisker_high == 7.0
    assert box.n_outliers == 0


def test_bootstrap_resample_keeps_container_type(rng):
    rows = np.arange(12.0).reshape(6, 2)
    drawn = bootstrap_resample(rows, 10, rng)
    assert drawn.shape == (10, 2)
    assert set(map(tuple, drawn)) <= set(map(tuple, rows))
    picked = bootstrap_resample(["a", "b", "c"], 5, rng)
    assert isinstance(picked, list) and len(picked) == 5


def test_bootstrap_resample_rejects_empty(rng):
    with pytest.raises(InsufficientDataError):
        bootstrap_resample([], 3, rng)
    with pytest.raises(DomainError):
        bootstrap_resample([1, 2], 0, rng)


def test_binomial_se():
    assert binomial_se(0.5, 100) == pytest.approx(0.05)
    assert binomial_se(1.0, 100) == 0.0


def test_quantile_and_cdf_are_inverses():
    for p in np.linspace(0.01, 0.99, 99):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-8)


def _interpolated_quantile(sorted_values, q):
    h = (len(sorted_values) - 1) * q
    lo = int(np.floor(h))
    if lo + 1 >= len(sorted_values):
        return sorted_values[lo]
    return sorted_values[lo] + (h - lo) * (sorted_values[lo + 1] - sorted_values[lo])


def test_box_summary_matches_sort_and_interpolate():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        values = list(rng.standard_t(2, size=rng.integers(1, 40)))
        ordered = sorted(values)
        q1, median, q3 = (_interpolated_quantile(ordered, q) for q in (0.25, 0.5, 0.75))
        iqr = q3 - q1
        inside = [x for x in ordered if q1 - 1.5 * iqr <= x <= q3 + 1.5 * iqr]
        box = box_summary(values)
        assert box.median == pytest.approx(median, abs=1e-9)
        assert box.q1 == pytest.approx(q1, abs=1e-9)
        assert box.q3 == pytest.approx(q3, abs=1e-9)
        assert box.whisker_low == pytest.approx(min(inside[0], q1), abs=1e-9)
        assert box.whisker_high == pytest.approx(max(inside[-1], q3), abs=1e-9)
        assert box.n_outliers == len(values) - len(inside)


def test_bootstrap_row_frequencies_stay_binomial(rng):
    n = 10_000
    drawn = bootstrap_resample(["a", "b"], n, rng)
    assert abs(drawn.count("a") - n / 2) <= 3 * np.sqrt(n / 4)
