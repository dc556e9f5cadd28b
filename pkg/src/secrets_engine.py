# src/secrets_engine.py
# The SECRETS test: ITEs for both arms through synthetic intervention, a
# bootstrap null distribution of the one-sample statistic, and a tuned
# critical value in place of the textbook one.
import logging
import math
from dataclasses import dataclass

import numpy as np

import config
from src.cohort import as_matrix
from src.errors import ConfigError, DegenerateStatisticError, InsufficientDataError
from src.stats_kernel import TestDecision, bootstrap_indices, sample_stats
from src.synthetic_intervention import SyntheticIntervention, tune_si_hyperparams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestingParams:
    __test__ = False

    alpha_target: float = config.ALPHA_TARGET
    t_lower: float = config.T_LOWER
    t_upper: float = config.T_UPPER
    t_limit_exp: float = config.T_LIMIT_EXP
    n_s: int = config.N_S
    delta_alpha: float = config.DELTA_ALPHA
    max_rounds: int = config.MAX_TUNING_ROUNDS

    def __post_init__(self):
        if not 0 < self.alpha_target < 1:
            raise ConfigError(f"alpha_target must lie in (0, 1), got {self.alpha_target}")
        if not 0 < self.t_lower < self.t_upper:
            raise ConfigError(f"need 0 < t_lower < t_upper, got {self.t_lower}, {self.t_upper}")
        if self.t_limit_exp <= 1:
            raise ConfigError(f"t_limit_exp must be > 1, got {self.t_limit_exp}")
        if self.n_s < 2:
            raise ConfigError(f"n_s must be >= 2, got {self.n_s}")
        if self.delta_alpha <= 0:
            raise ConfigError(f"delta_alpha must be > 0, got {self.delta_alpha}")
        if self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


class IteSet:
    def __init__(self, control_ites, treatment_ites):
        self.control_ites = control_ites
        self.treatment_ites = treatment_ites

    @property
    def pooled(self):
        return np.concatenate([self.control_ites, self.treatment_ites])


class TunedCriticalValue:
    def __init__(self, value, achieved_alpha, converged, rounds):
        self.value = value
        self.achieved_alpha = achieved_alpha
        self.converged = converged  # False when max_rounds ran out
        self.rounds = rounds


def estimate_ites(x_unexposed, x_exposed, si, outcome, rng=None, regularization=None):
    # tunes on the exposed group unless a regularization is passed in
    unexposed = as_matrix(x_unexposed)
    exposed = as_matrix(x_exposed)
    if unexposed.shape[0] == 0 or exposed.shape[0] == 0:
        raise InsufficientDataError("estimate_ites needs both groups nonempty")
    si = si.resolved(outcome.baseline_index)
    if regularization is None:
        if rng is None:
            raise ConfigError("estimate_ites needs an rng to tune the SI regularization")
        regularization = tune_si_hyperparams(exposed, si, rng)
    model = SyntheticIntervention(exposed, regularization, si.fitting_end(exposed.shape[1]))
    counterfactual, _ = model.predict(unexposed)
    return outcome(counterfactual) - outcome(unexposed)


def estimate_ite_set(x_ctrl, x_treat, si, outcome, rng=None, regularization=(None, None)):
    """ITEs for both arms, signed so every pooled value estimates
    treatment minus control."""
    reg_ctrl, reg_treat = regularization
    control_ites = estimate_ites(x_ctrl, x_treat, si, outcome, rng, reg_ctrl)
    treatment_ites = -estimate_ites(x_treat, x_ctrl, si, outcome, rng, reg_treat)
    return IteSet(control_ites=control_ites, treatment_ites=treatment_ites)


def test_statistic(ites):
    mean, variance = sample_stats(ites)
    if variance <= 0.0:
        raise DegenerateStatisticError("ITEs have zero sample variance")
    return mean / math.sqrt(variance / len(ites))


test_statistic.__test__ = False


def _null_statistic(ctrl, si, outcome, rng):
    n = ctrl.shape[0]
    pseudo_ctrl = ctrl[bootstrap_indices(n, n, rng)]
    pseudo_treat = ctrl[bootstrap_indices(n, n, rng)]
    return test_statistic(estimate_ite_set(pseudo_ctrl, pseudo_treat, si, outcome, rng).pooled)


def sample_null(x_ctrl, T, si, outcome, rng):
    """T draws of the test statistic with both pseudo-arms bootstrapped from
    the control arm."""
    ctrl = as_matrix(x_ctrl)
    if ctrl.shape[0] == 0:
        raise InsufficientDataError("sample_null needs a nonempty control arm")
    if T < 2:
        raise ConfigError(f"sample_null needs T >= 2, got {T}")
    samples = np.empty(T)
    for i, stream in enumerate(rng.spawn(T)):
        try:
            samples[i] = _null_statistic(ctrl, si, outcome, stream)
        except DegenerateStatisticError:
            logger.warning("degenerate null statistic in draw %d; resampling once", i)
            samples[i] = _null_statistic(ctrl, si, outcome, stream)
    return samples


def empirical_alpha(abs_samples, c):
    return float(np.mean(abs_samples > c))


def tune_critical_value(null_samples, params):
    """Range refinement over n_s evenly spaced candidates until the empirical
    significance is within delta_alpha of the target."""
    abs_samples = np.abs(np.asarray(null_samples, dtype=float))
    if abs_samples.size < 10:
        raise InsufficientDataError(f"tune_critical_value needs >= 10 null samples, got {abs_samples.size}")
    target = params.alpha_target
    lower, upper = params.t_lower, params.t_upper
    best_c, best_alpha, best_key = None, None, None
    for rounds in range(1, params.max_rounds + 1):
        candidates = np.linspace(lower, upper, params.n_s)
        alphas = np.array([empirical_alpha(abs_samples, c) for c in candidates])
        for c, a in zip(candidates, alphas):
            # equal errors go to alpha <= target first, then to the larger c
            key = (round(abs(a - target), 12), a > target, -c)
            if best_key is None or key < best_key:
                best_c, best_alpha, best_key = float(c), float(a), key
        logger.debug("tuning round %d: range [%.4g, %.4g], best c %.4g (alpha %.4g)",
                     rounds, lower, upper, best_c, best_alpha)
        if best_key[0] <= params.delta_alpha:
            return TunedCriticalValue(best_c, best_alpha, True, rounds)
        # alphas is non-increasing along candidates
        if alphas[-1] > target:
            lower, upper = upper, upper * params.t_limit_exp
        elif alphas[0] < target:
            lower, upper = lower / params.t_limit_exp, lower
        else:
            i = int(np.nonzero(alphas >= target)[0][-1])
            i = min(i, params.n_s - 2)
            lower, upper = float(candidates[i]), float(candidates[i + 1])
    logger.warning("critical value tuning stopped after %d rounds: alpha %.4g vs target %.4g",
                   params.max_rounds, best_alpha, target)
    return TunedCriticalValue(best_c, best_alpha, False, params.max_rounds)


def run_test(ites, critical_value):
    statistic = test_statistic(ites)
    return TestDecision(reject=abs(statistic) > critical_value, statistic=float(statistic),
                        critical_value=float(critical_value))


def run_secrets(x_ctrl, x_treat, si, testing, T, outcome, rng):
    ctrl, treat = as_matrix(x_ctrl), as_matrix(x_treat)
    if ctrl.shape[0] < 2 or treat.shape[0] < 2:
        raise InsufficientDataError("run_secrets needs at least 2 subjects per arm")
    ite_stream, null_stream = rng.spawn(2)
    ites = estimate_ite_set(ctrl, treat, si, outcome, ite_stream).pooled
    null_samples = sample_null(ctrl, T, si, outcome, null_stream)
    tuned = tune_critical_value(null_samples, testing)
    decision = run_test(ites, tuned.value)
    logger.debug("SECRETS statistic %.4g vs critical value %.4g -> %s",
                 decision.statistic, decision.critical_value, "reject" if decision.reject else "accept")
    return decision
