# src/moments.py
# (delta, sigma^2) for sample-size planning. The secrets method bootstraps
# the variance of the SI-based ATE and converts it back to the variance of
# hypothetical i.i.d. ITEs; naive and two-sample variants serve the ablations
# and the standard-testing baselines.
import logging
from dataclasses import dataclass

import numpy as np

from src.cohort import as_matrix
from src.errors import ConfigError, InsufficientDataError
from src.secrets_engine import estimate_ite_set
from src.stats_kernel import bootstrap_indices, sample_stats
from src.synthetic_intervention import tune_si_hyperparams

logger = logging.getLogger(__name__)

SECRETS = "secrets"
NAIVE = "naive"
TWO_SAMPLE = "two_sample"
METHODS = (SECRETS, NAIVE, TWO_SAMPLE)


@dataclass(frozen=True)
class Moments:
    ate: float
    variance: float
    variance_of_ate: float
    method: str
    two_sample: "TwoSampleMoments" = None

    def to_dict(self):
        return {"ate": self.ate, "variance": self.variance,
                "variance_of_ate": self.variance_of_ate, "method": self.method}


@dataclass(frozen=True)
class TwoSampleMoments:
    ate: float
    var_control: float
    var_treatment: float


def _check_arms(ctrl, treat):
    if ctrl.shape[0] < 2 or treat.shape[0] < 2:
        raise InsufficientDataError("moment estimation needs at least 2 subjects per arm")


def tuned_regularization(ctrl, treat, si, outcome, rng):
    """One SI tuning per direction: (donors = treatment, donors = control)."""
    si = si.resolved(outcome.baseline_index)
    return tune_si_hyperparams(treat, si, rng), tune_si_hyperparams(ctrl, si, rng)


def estimate_ate(x_ctrl, x_treat, si, outcome, rng=None, regularization=(None, None)):
    ctrl, treat = as_matrix(x_ctrl), as_matrix(x_treat)
    _check_arms(ctrl, treat)
    return float(np.mean(estimate_ite_set(ctrl, treat, si, outcome, rng, regularization).pooled))


def bootstrap_replicates(x_ctrl, x_treat, B, ate_fn, rng):
    """B replicate ATEs, ate_fn(ctrl_b, treat_b, stream), each on one
    bootstrap sample per arm at the current arm sizes."""
    ctrl, treat = as_matrix(x_ctrl), as_matrix(x_treat)
    if B < 2:
        raise ConfigError(f"B must be >= 2, got {B}")
    ates = np.empty(B)
    for b, stream in enumerate(rng.spawn(B)):
        ctrl_b = ctrl[bootstrap_indices(ctrl.shape[0], ctrl.shape[0], stream)]
        treat_b = treat[bootstrap_indices(treat.shape[0], treat.shape[0], stream)]
        ates[b] = ate_fn(ctrl_b, treat_b, stream)
    return ates


def bootstrap_ates(x_ctrl, x_treat, B, si, outcome, rng, retune_per_replicate=False):
    ctrl, treat = as_matrix(x_ctrl), as_matrix(x_treat)
    if B < 2:
        raise ConfigError(f"B must be >= 2, got {B}")
    tune_stream = rng.spawn(1)[0]
    regularization = (None, None) if retune_per_replicate else \
        tuned_regularization(ctrl, treat, si, outcome, tune_stream)

    def si_ate(ctrl_b, treat_b, stream):
        return np.mean(estimate_ite_set(ctrl_b, treat_b, si, outcome, stream, regularization).pooled)

    return bootstrap_replicates(ctrl, treat, B, si_ate, rng)


def replicate_variance(ates):
    _, variance = sample_stats(ates)
    return variance


def variance_of_ate(x_ctrl, x_treat, B, si, outcome, rng, retune_per_replicate=False):
    return replicate_variance(bootstrap_ates(x_ctrl, x_treat, B, si, outcome, rng, retune_per_replicate))


def variance_of_outcome(variance_of_ate_value, n_curr):
    """Variance of i.i.d. ITEs whose pooled mean over 2*n_curr values would
    have the given variance."""
    if variance_of_ate_value < 0 or n_curr < 0:
        raise ConfigError("variance_of_outcome needs nonnegative inputs")
    return variance_of_ate_value * 2 * n_curr


def two_sample_moments(x_ctrl, x_treat, outcome):
    ctrl_out = outcome(as_matrix(x_ctrl))
    treat_out = outcome(as_matrix(x_treat))
    mean_c, var_c = sample_stats(ctrl_out)
    mean_t, var_t = sample_stats(treat_out)
    return TwoSampleMoments(ate=mean_t - mean_c, var_control=var_c, var_treatment=var_t)


def estimate_moments(x_ctrl, x_treat, method, B, si, outcome, rng, retune_per_replicate=False):
    if method not in METHODS:
        raise ConfigError(f"unknown moment method {method!r}; expected one of {', '.join(METHODS)}")
    ctrl, treat = as_matrix(x_ctrl), as_matrix(x_treat)
    _check_arms(ctrl, treat)
    n_curr = min(ctrl.shape[0], treat.shape[0])

    if method == TWO_SAMPLE:
        ts = two_sample_moments(ctrl, treat, outcome)
        # pooled-form summary: sum of arm variances, ATE variance at n_curr
        variance = ts.var_control + ts.var_treatment
        return Moments(ate=ts.ate, variance=variance, variance_of_ate=variance / n_curr,
                       method=method, two_sample=ts)

    ate_stream, boot_stream = rng.spawn(2)
    if method == NAIVE:
        ites = estimate_ite_set(ctrl, treat, si, outcome, ate_stream).pooled
        ate, variance = sample_stats(ites)
        return Moments(ate=ate, variance=variance, variance_of_ate=variance / ites.size, method=method)

    ate = estimate_ate(ctrl, treat, si, outcome, ate_stream)
    var_ate = variance_of_ate(ctrl, treat, B, si, outcome, boot_stream, retune_per_replicate)
    moments = Moments(ate=ate, variance=variance_of_outcome(var_ate, n_curr), variance_of_ate=var_ate,
                      method=method)
    logger.debug("moments at n=%d: ate %.4g, variance %.4g", n_curr, moments.ate, moments.variance)
    return moments
