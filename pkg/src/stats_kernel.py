# src/stats_kernel.py
# Numerical primitives shared by every other module: normal distribution
# functions, sample statistics, bootstrap resampling, the Welch test and
# box-plot summaries.
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from src.errors import DomainError, InsufficientDataError


@dataclass(frozen=True)
class BoxSummary:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    n_outliers: int

    def as_dict(self):
        return {
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "n_outliers": self.n_outliers,
        }


@dataclass(frozen=True)
class TestDecision:
    __test__ = False  # keep pytest from collecting this as a test class

    reject: bool
    statistic: float
    critical_value: float


BOX_FIELDS = ("median", "q1", "q3", "whisker_low", "whisker_high", "n_outliers")


def normal_quantile(p):
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal_quantile needs 0 < p < 1, got {p}")
    return float(stats.norm.ppf(p))


def normal_cdf(x):
    return float(stats.norm.cdf(x))


def sample_stats(values):
    """Mean and unbiased (n-1) variance of a sequence."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError(f"sample_stats needs at least 2 values, got {arr.size}")
    return float(arr.mean()), float(arr.var(ddof=1))


def box_summary(values):
    """Tukey box: quartiles by linear interpolation, whiskers at the most
    extreme data points within 1.5 IQR of the box."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise InsufficientDataError("box_summary needs at least one value")
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    iqr = q3 - q1
    low_fence, high_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= low_fence) & (arr <= high_fence)]
    return BoxSummary(
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        whisker_low=float(min(inside.min(), q1)),
        whisker_high=float(max(inside.max(), q3)),
        n_outliers=int(arr.size - inside.size),
    )


def welch_t_test(a, b, alpha):
    """Two-sided Welch test of mean(b) - mean(a) against zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError("welch_t_test needs at least 2 values per arm")
    mean_a, var_a = sample_stats(a)
    mean_b, var_b = sample_stats(b)
    se_a, se_b = var_a / a.size, var_b / b.size
    se2 = se_a + se_b
    delta = mean_b - mean_a
    if se2 == 0.0:
        if delta == 0.0:
            return TestDecision(reject=False, statistic=0.0, critical_value=normal_quantile(1 - alpha / 2))
        return TestDecision(reject=True, statistic=math.copysign(math.inf, delta),
                            critical_value=normal_quantile(1 - alpha / 2))
    statistic = delta / math.sqrt(se2)
    # Welch-Satterthwaite df, floored only for the critical value lookup
    df = se2 ** 2 / (se_a ** 2 / (a.size - 1) + se_b ** 2 / (b.size - 1))
    critical = float(stats.t.ppf(1 - alpha / 2, max(1, math.floor(df))))
    return TestDecision(reject=abs(statistic) > critical, statistic=float(statistic), critical_value=critical)


def bootstrap_indices(n_rows, n, rng):
    if n_rows < 1:
        raise InsufficientDataError("cannot bootstrap from an empty set of rows")
    return rng.integers(0, n_rows, size=n)


def bootstrap_resample(rows, n, rng):
    """Draw n rows uniformly with replacement. Arrays come back as arrays,
    any other sequence as a list."""
    if n < 1:
        raise DomainError(f"bootstrap size must be >= 1, got {n}")
    idx = bootstrap_indices(len(rows), n, rng)
    if isinstance(rows, np.ndarray):
        return rows[idx]
    return [rows[i] for i in idx]


def binomial_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)
