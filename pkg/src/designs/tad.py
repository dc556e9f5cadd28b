# src/designs/tad.py
# TAD-SIE: internal pilot, trend-adaptive sample-size search with futility
# stopping, and a final SECRETS test.
import logging
import math
from dataclasses import dataclass, field, replace

import config
from src.cohort import CONTROL, TREATMENT
from src.designs.base_design import ACCEPT, BaseDesign, IterationTrace, TrialResult, decision_of
from src.errors import ConfigError, DomainError
from src.moments import METHODS, NAIVE, SECRETS, estimate_moments
from src.secrets_engine import TestingParams, run_secrets
from src.stats_kernel import normal_cdf, normal_quantile
from src.synthetic_intervention import SiParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TadConfig:
    n_pilot: int = config.N_PILOT
    alpha_target: float = config.ALPHA_TARGET
    power_target: float = config.POWER_TARGET
    n_max: int = config.N_MAX
    step_size_scale_factor: float = config.STEP_SIZE_SCALE_FACTOR
    futility_power_boundary: float = config.FUTILITY_POWER_BOUNDARY
    B: int = config.B_BOOTSTRAP
    T: int = config.T_NULL_SAMPLES
    si: SiParams = field(default_factory=SiParams)
    testing: TestingParams = field(default_factory=TestingParams)
    moment_method: str = config.MOMENT_METHOD
    cp_moment_method: str = config.CP_MOMENT_METHOD
    retune_per_replicate: bool = config.RETUNE_PER_REPLICATE
    arm_size_increment: int = config.ARM_SIZE_INCREMENT

    def __post_init__(self):
        # the pilot feeds SI tuning, which needs a donor split
        if self.n_pilot < config.MIN_SI_DONORS:
            raise ConfigError(f"n_pilot must be >= {config.MIN_SI_DONORS}, got {self.n_pilot}")
        if self.n_pilot > self.n_max:
            raise ConfigError(f"n_pilot ({self.n_pilot}) exceeds n_max ({self.n_max})")
        if not 0 < self.alpha_target < 1 or not 0 < self.power_target < 1:
            raise ConfigError("alpha_target and power_target must lie in (0, 1)")
        if not 0 < self.step_size_scale_factor <= 1:
            raise ConfigError(f"step_size_scale_factor must lie in (0, 1], got {self.step_size_scale_factor}")
        if not 0 <= self.futility_power_boundary <= 1:
            raise ConfigError(f"futility_power_boundary must lie in [0, 1], got {self.futility_power_boundary}")
        if self.B < 2 or self.T < 2:
            raise ConfigError("B and T must both be >= 2")
        if self.moment_method not in METHODS:
            raise ConfigError(f"unknown moment_method {self.moment_method!r}")
        if self.cp_moment_method not in (SECRETS, NAIVE):
            raise ConfigError(f"cp_moment_method must be secrets or naive, got {self.cp_moment_method!r}")
        if self.arm_size_increment < 0:
            raise ConfigError("arm_size_increment must be >= 0")

    def to_dict(self):
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values["si"] = self.si.to_dict()
        values["testing"] = self.testing.to_dict()
        return values


class SearchOutcome:
    def __init__(self, dataset, futility_flag, trace):
        self.dataset = dataset
        self.futility_flag = futility_flag
        self.trace = trace


# --- Sample size ---

def z_sum_squared(alpha, power):
    return (normal_quantile(1 - alpha / 2) + normal_quantile(power)) ** 2


def one_sample_arm_size(ate, variance, alpha, power):
    """Per-arm size from the one-sample formula, halved because the pooled
    ITEs span both arms. Returns inf when the ATE is zero."""
    if not 0 < alpha < 1 or not 0 < power < 1:
        raise DomainError("alpha and power must lie in (0, 1)")
    if variance == 0:
        return 0.0
    if ate == 0:
        return math.inf
    return variance * z_sum_squared(alpha, power) / (2 * ate ** 2)


def step_from_target(n_target, n_curr, n_max, scale_factor):
    if not math.isfinite(n_target):
        n_target = n_max
    room = n_max - n_curr
    n_step = min(max((n_target - n_curr) * scale_factor, 0.0), room)
    n_step = min(math.ceil(n_step), room)
    n_step_max = min(max(n_target - n_curr, 0.0), room)
    if n_step_max == 0:
        return n_step, 1.0
    return n_step, min(1.0, (n_curr + n_step) / (n_curr + n_step_max))


def get_step_size(ate, variance, n_curr, alpha, power, n_max, scale_factor):
    n_target = one_sample_arm_size(ate, variance, alpha, power)
    return step_from_target(n_target, n_curr, n_max, scale_factor)


def snap_step(n_step, n_curr, n_pilot, n_max, increment):
    # round up onto n_pilot + k * increment
    if increment <= 0 or n_step == 0:
        return n_step
    k = math.ceil((n_curr + n_step - n_pilot) / increment)
    return min(n_pilot + k * increment, n_max) - n_curr


# --- Conditional power ---

def _check_fraction(t):
    if not 0 < t < 1:
        raise DomainError(f"conditional power is undefined at information fraction {t}")


def conditional_power_drift(z, t, alpha, drift):
    """One-sided CP under a specified drift."""
    _check_fraction(t)
    z_alpha = normal_quantile(1 - alpha)
    return 1.0 - normal_cdf((z_alpha - z * math.sqrt(t) - drift * (1 - t)) / math.sqrt(1 - t))


def conditional_power_trend(z, t, alpha):
    # drift taken from the current trend
    _check_fraction(t)
    z_alpha = normal_quantile(1 - alpha)
    return normal_cdf(z / math.sqrt(t * (1 - t)) - z_alpha / math.sqrt(1 - t))


def conditional_power_two_sided(z, t, alpha):
    _check_fraction(t)
    z_half = normal_quantile(1 - alpha / 2)
    a = z / math.sqrt(t * (1 - t))
    b = z_half / math.sqrt(1 - t)
    return normal_cdf(a - b) + normal_cdf(-a - b)


def _ratio_z(ate, denom):
    if denom == 0:
        if ate == 0:
            return 0.0
        return math.copysign(math.inf, ate)
    return ate / math.sqrt(denom)


def two_sample_z(two_sample, n_curr):
    return _ratio_z(two_sample.ate, (two_sample.var_control + two_sample.var_treatment) / n_curr)


def interim_z(moments, n_curr):
    """Pooled-ITE z for SI moments; unequal-variance two-sample z when the
    moments carry per-arm variances."""
    if moments.two_sample is not None:
        return two_sample_z(moments.two_sample, n_curr)
    return _ratio_z(moments.ate, moments.variance / (2 * n_curr))


def futility_cp(moments, n_curr, t, alpha):
    z = interim_z(moments, n_curr)
    if math.isinf(z):
        return 1.0
    return conditional_power_two_sided(z, t, alpha)


def check_for_futility(moments, n_curr, t, alpha, futility_power_boundary):
    if t >= 1:
        return False
    if moments.variance == 0 and moments.ate == 0:
        return futility_power_boundary > 0
    return futility_cp(moments, n_curr, t, alpha) <= futility_power_boundary


# --- Trial ---

def _arms(dataset):
    return dataset.matrix(CONTROL), dataset.matrix(TREATMENT)


def _recruit_into(dataset, source, n_step):
    control_new, treatment_new = source.recruit(n_step)
    return dataset.extend(control_new, treatment_new)


def _moments(dataset, method, cfg, rng):
    ctrl, treat = _arms(dataset)
    return estimate_moments(ctrl, treat, method, cfg.B, cfg.si, dataset.outcome(), rng,
                            retune_per_replicate=cfg.retune_per_replicate)


def conduct_pilot_study(cfg, source, rng):
    dataset = _recruit_into(source.empty_dataset(), source, cfg.n_pilot)
    moments = _moments(dataset, cfg.moment_method, cfg, rng)
    logger.debug("pilot: n=%d ate %.4g variance %.4g", cfg.n_pilot, moments.ate, moments.variance)
    return dataset, moments


def one_sample_sizing(moments, cfg):
    return one_sample_arm_size(moments.ate, moments.variance, cfg.alpha_target, cfg.power_target)


def run_sample_size_search(pilot, cfg, source, rng, sizing=one_sample_sizing):
    """Grow both arms until the step size reaches zero (target met or n_max
    hit) or the trial turns futile."""
    dataset, moments = pilot
    n_curr = dataset.arm_size
    trace = []
    futile = False
    while True:
        n_target = sizing(moments, cfg)
        n_step, t = step_from_target(n_target, n_curr, cfg.n_max, cfg.step_size_scale_factor)
        if n_step and cfg.arm_size_increment:
            n_target_capped = n_target if math.isfinite(n_target) else cfg.n_max
            n_step = snap_step(n_step, n_curr, cfg.n_pilot, cfg.n_max, cfg.arm_size_increment)
            n_step_max = min(max(n_target_capped - n_curr, 0.0), cfg.n_max - n_curr)
            t = 1.0 if n_step_max == 0 else min(1.0, (n_curr + n_step) / (n_curr + n_step_max))
        if n_step == 0:
            break
        dataset = _recruit_into(dataset, source, n_step)
        n_curr += n_step
        moment_stream, cp_stream = rng.spawn(2)
        moments = _moments(dataset, cfg.moment_method, cfg, moment_stream)
        cp_moments = moments
        if moments.two_sample is None and cfg.cp_moment_method != moments.method:
            cp_moments = _moments(dataset, cfg.cp_moment_method, cfg, cp_stream)
        cp = None if t >= 1 else futility_cp(cp_moments, n_curr, t, cfg.alpha_target)
        futile = check_for_futility(cp_moments, n_curr, t, cfg.alpha_target, cfg.futility_power_boundary)
        step = IterationTrace(iteration=len(trace) + 1, n_step=n_step, n_curr=n_curr, t=t,
                              ate=moments.ate, variance=moments.variance, cp=cp, futility=futile)
        trace.append(step)
        logger.debug("iteration %d: %s", step.iteration, step.to_dict())
        if futile:
            break
    return SearchOutcome(dataset, futile, tuple(trace))


def run_tad_sie(cfg, source, rng, final_test=None):
    pilot_stream, search_stream, test_stream = rng.spawn(3)
    pilot = conduct_pilot_study(cfg, source, pilot_stream)
    search = run_sample_size_search(pilot, cfg, source, search_stream)
    return finish_trial(search, cfg, test_stream, final_test or secrets_final_test)


def secrets_final_test(dataset, cfg, rng):
    ctrl, treat = _arms(dataset)
    return run_secrets(ctrl, treat, cfg.si, cfg.testing, cfg.T, dataset.outcome(), rng)


def finish_trial(search, cfg, rng, final_test):
    dataset = search.dataset
    iterations = len(search.trace)
    if search.futility_flag:
        return TrialResult(decision=ACCEPT, futility_stopped=True, final_arm_size=dataset.arm_size,
                           iterations=iterations, trace=search.trace, increased=iterations > 0)
    outcome = final_test(dataset, cfg, rng)
    return TrialResult(decision=decision_of(outcome), futility_stopped=False, final_arm_size=dataset.arm_size,
                       iterations=iterations, trace=search.trace, increased=iterations > 0,
                       statistic=outcome.statistic, critical_value=outcome.critical_value)


class TadSieDesign(BaseDesign):
    name = "tad_sie"

    def __init__(self, design_config):
        if design_config.testing.alpha_target != design_config.alpha_target:
            design_config = replace(design_config,
                                    testing=replace(design_config.testing, alpha_target=design_config.alpha_target))
        super().__init__(design_config)

    def run(self, source, rng):
        return run_tad_sie(self.config, source, rng)
