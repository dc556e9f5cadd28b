# src/designs/baselines.py
# Comparison designs: the fixed sample design, the promising-zone
# Standard-TAD, and the two hybrids used in the ablations.
import logging
import math
from dataclasses import dataclass, field, replace

import config
from src.cohort import CONTROL, TREATMENT
from src.designs.base_design import BaseDesign, IterationTrace, TrialResult, decision_of
from src.designs.tad import (TadConfig, conduct_pilot_study, conditional_power_trend, finish_trial,
                             interim_z, one_sample_arm_size, run_sample_size_search, z_sum_squared)
from src.errors import ConfigError, DomainError
from src.moments import SECRETS, TWO_SAMPLE, estimate_moments
from src.secrets_engine import TestingParams, run_secrets
from src.stats_kernel import welch_t_test
from src.synthetic_intervention import SiParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineConfig:
    n_pilot: int = config.N_PILOT
    alpha_target: float = config.ALPHA_TARGET
    power_target: float = config.POWER_TARGET
    n_max: int = config.N_MAX
    interim_information_fraction: float = config.INTERIM_INFORMATION_FRACTION
    cp_promising_threshold: float = config.CP_PROMISING_THRESHOLD
    # only read by the SIE hybrid
    B: int = config.B_BOOTSTRAP
    T: int = config.T_NULL_SAMPLES
    si: SiParams = field(default_factory=SiParams)
    testing: TestingParams = field(default_factory=TestingParams)

    def __post_init__(self):
        if self.n_pilot < 2:
            raise ConfigError(f"n_pilot must be >= 2, got {self.n_pilot}")
        if self.n_pilot > self.n_max:
            raise ConfigError(f"n_pilot ({self.n_pilot}) exceeds n_max ({self.n_max})")
        if not 0 < self.alpha_target < 1 or not 0 < self.power_target < 1:
            raise ConfigError("alpha_target and power_target must lie in (0, 1)")
        if not 0 < self.interim_information_fraction < 1:
            raise ConfigError("interim_information_fraction must lie in (0, 1)")
        if not 0 <= self.cp_promising_threshold < 1:
            raise ConfigError("cp_promising_threshold must lie in [0, 1)")
        if self.B < 2 or self.T < 2:
            raise ConfigError("B and T must both be >= 2")

    def to_dict(self):
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values["si"] = self.si.to_dict()
        values["testing"] = self.testing.to_dict()
        return values


# --- Sample size ---

def two_sample_arm_size_raw(two_sample, alpha, power):
    if not 0 < alpha < 1 or not 0 < power < 1:
        raise DomainError("alpha and power must lie in (0, 1)")
    if two_sample.var_control < 0 or two_sample.var_treatment < 0:
        raise DomainError("arm variances must be >= 0")
    total = two_sample.var_control + two_sample.var_treatment
    if total == 0:
        return 0.0
    if two_sample.ate == 0:
        return math.inf
    return total * z_sum_squared(alpha, power) / two_sample.ate ** 2


def two_sample_arm_size(two_sample, alpha, power):
    raw = two_sample_arm_size_raw(two_sample, alpha, power)
    return raw if math.isinf(raw) else math.ceil(raw)


def clamp_arm_size(n, cfg):
    if math.isinf(n):
        return cfg.n_max
    return int(min(max(n, 2, cfg.n_pilot), cfg.n_max))


# --- Shared helpers ---

def _arms(dataset):
    return dataset.matrix(CONTROL), dataset.matrix(TREATMENT)


def _grow(dataset, source, n_target):
    n_step = n_target - dataset.arm_size
    if n_step <= 0:
        return dataset
    control_new, treatment_new = source.recruit(n_step)
    return dataset.extend(control_new, treatment_new)


def _welch(dataset, alpha):
    outcome = dataset.outcome()
    ctrl, treat = _arms(dataset)
    return welch_t_test(outcome(ctrl), outcome(treat), alpha)


def _two_sample(dataset, rng=None):
    ctrl, treat = _arms(dataset)
    return estimate_moments(ctrl, treat, TWO_SAMPLE, 2, None, dataset.outcome(), rng)


def _secrets_moments(dataset, cfg, rng):
    ctrl, treat = _arms(dataset)
    return estimate_moments(ctrl, treat, SECRETS, cfg.B, cfg.si, dataset.outcome(), rng)


def _pilot(cfg, source):
    return _grow(source.empty_dataset(), source, cfg.n_pilot)


# --- Fixed Sample Design ---

def run_fixed_sample_design(cfg, source, rng):
    dataset = _pilot(cfg, source)
    moments = _two_sample(dataset)
    planned = clamp_arm_size(two_sample_arm_size(moments.two_sample, cfg.alpha_target, cfg.power_target), cfg)
    n_pilot = dataset.arm_size
    dataset = _grow(dataset, source, planned)
    trace = (IterationTrace(iteration=1, n_step=dataset.arm_size - n_pilot, n_curr=dataset.arm_size, t=1.0,
                            ate=moments.ate, variance=moments.variance),)
    outcome = _welch(dataset, cfg.alpha_target)
    return TrialResult(decision=decision_of(outcome), futility_stopped=False, final_arm_size=dataset.arm_size,
                       iterations=1, trace=trace, statistic=outcome.statistic,
                       critical_value=outcome.critical_value)


# --- Standard-TAD ---

def _standard_plan(moments, cfg):
    return two_sample_arm_size(moments.two_sample, cfg.alpha_target, cfg.power_target)


def _sie_plan(moments, cfg):
    n = one_sample_arm_size(moments.ate, moments.variance, cfg.alpha_target, cfg.power_target)
    return n if math.isinf(n) else math.ceil(n)


def run_standard_tad(cfg, source, rng, use_sie=False):
    """One interim analysis near the end of the planned trial. The planned
    size only grows, and only when the trend CP is promising."""
    pilot_stream, interim_stream, test_stream = rng.spawn(3)
    plan = _sie_plan if use_sie else _standard_plan

    def estimate(data, stream):
        if use_sie:
            return _secrets_moments(data, cfg, stream)
        return _two_sample(data)

    dataset = _pilot(cfg, source)
    moments = estimate(dataset, pilot_stream)
    planned = clamp_arm_size(plan(moments, cfg), cfg)
    n_interim = max(cfg.n_pilot, math.floor(cfg.interim_information_fraction * planned))
    n_before = dataset.arm_size
    dataset = _grow(dataset, source, n_interim)
    final_size = planned
    trace = ()

    if n_interim < planned:
        moments = estimate(dataset, interim_stream)
        t = n_interim / planned
        z = interim_z(moments, n_interim)
        # two-sided test: the one-sided trend CP at alpha/2 in the direction of the trend
        cp = 1.0 if math.isinf(z) else conditional_power_trend(abs(z), t, cfg.alpha_target / 2)
        if cp >= cfg.cp_promising_threshold:
            final_size = max(planned, clamp_arm_size(plan(moments, cfg), cfg))
        trace = (IterationTrace(iteration=1, n_step=n_interim - n_before, n_curr=n_interim, t=t,
                                ate=moments.ate, variance=moments.variance, cp=cp),)
        logger.debug("standard TAD interim at n=%d: cp %.4g, planned %d -> %d",
                     n_interim, cp, planned, final_size)

    dataset = _grow(dataset, source, final_size)
    if use_sie:
        ctrl, treat = _arms(dataset)
        outcome = run_secrets(ctrl, treat, cfg.si, cfg.testing, cfg.T, dataset.outcome(), test_stream)
    else:
        outcome = _welch(dataset, cfg.alpha_target)
    return TrialResult(decision=decision_of(outcome), futility_stopped=False, final_arm_size=dataset.arm_size,
                       iterations=len(trace), trace=trace, increased=final_size > planned,
                       statistic=outcome.statistic, critical_value=outcome.critical_value)


def run_standard_tad_sie(cfg, source, rng):
    return run_standard_tad(cfg, source, rng, use_sie=True)


# --- TAD-SIE with standard testing ---

def two_sample_sizing(moments, cfg):
    return two_sample_arm_size_raw(moments.two_sample, cfg.alpha_target, cfg.power_target)


def welch_final_test(dataset, cfg, rng):
    return _welch(dataset, cfg.alpha_target)


def run_tad_standard_test(cfg, source, rng):
    """The TAD-SIE loop with two-sample moments, unhalved sizing, the
    two-sample interim z and a Welch final test."""
    cfg = replace(cfg, moment_method=TWO_SAMPLE)
    pilot_stream, search_stream, test_stream = rng.spawn(3)
    pilot = conduct_pilot_study(cfg, source, pilot_stream)
    search = run_sample_size_search(pilot, cfg, source, search_stream, sizing=two_sample_sizing)
    return finish_trial(search, cfg, test_stream, welch_final_test)


# --- Designs ---

class FixedSampleDesign(BaseDesign):
    name = "fixed"

    def run(self, source, rng):
        return run_fixed_sample_design(self.config, source, rng)


class StandardTadDesign(BaseDesign):
    name = "standard_tad"

    def run(self, source, rng):
        return run_standard_tad(self.config, source, rng)


class StandardTadSieDesign(BaseDesign):
    name = "standard_tad_sie"

    def __init__(self, design_config):
        if design_config.n_pilot < config.MIN_SI_DONORS:
            raise ConfigError(f"{self.name} needs n_pilot >= {config.MIN_SI_DONORS} for SI tuning, "
                              f"got {design_config.n_pilot}")
        if design_config.testing.alpha_target != design_config.alpha_target:
            design_config = replace(design_config,
                                    testing=replace(design_config.testing, alpha_target=design_config.alpha_target))
        super().__init__(design_config)

    def run(self, source, rng):
        return run_standard_tad_sie(self.config, source, rng)


class TadStandardTestDesign(BaseDesign):
    name = "tad_standard_test"

    def run(self, source, rng):
        return run_tad_standard_test(self.config, source, rng)
