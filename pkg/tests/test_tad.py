import math

import numpy as np
import pytest

from src.cohort import GeneratorSource
from src.designs.base_design import ACCEPT
from src.designs.tad import (TadConfig, TadSieDesign, check_for_futility, conditional_power_drift,
                             conditional_power_trend, conditional_power_two_sided, get_step_size, interim_z,
                             one_sample_arm_size, run_tad_sie, snap_step, two_sample_z)
from src.errors import ConfigError, DomainError
from src.moments import Moments, TwoSampleMoments
from src.stats_kernel import normal_quantile


def test_one_sample_arm_size_hand_value():
    assert one_sample_arm_size(5.0, 100.0, 0.05, 0.8) == pytest.approx(15.698, abs=1e-3)
    assert one_sample_arm_size(0.0, 100.0, 0.05, 0.8) == math.inf
    assert one_sample_arm_size(-5.0, 100.0, 0.05, 0.8) == one_sample_arm_size(5.0, 100.0, 0.05, 0.8)


def test_step_size_hand_trace():
    n_step, t = get_step_size(2.0, 400.0, 30, 0.05, 0.8, 1500, 0.5)
    assert n_step == 182
    assert t == pytest.approx(0.540, abs=1e-3)


def test_step_size_is_zero_once_target_is_met():
    n_step, t = get_step_size(5.0, 100.0, 30, 0.05, 0.8, 1500, 0.5)
    assert n_step == 0 and t == 1.0


def test_step_size_respects_n_max():
    n_step, t = get_step_size(0.1, 400.0, 30, 0.05, 0.8, 100, 1.0)
    assert n_step == 70 and t == 1.0
    n_step, _ = get_step_size(0.0, 400.0, 30, 0.05, 0.8, 100, 0.5)
    assert n_step == 35


def test_snap_step_to_grid():
    assert snap_step(7, 30, 30, 1500, 25) == 25
    assert snap_step(30, 30, 30, 1500, 25) == 50
    assert snap_step(30, 30, 30, 40, 25) == 10
    assert snap_step(7, 30, 30, 1500, 0) == 7


def test_trend_cp_equals_drift_cp_at_estimated_drift():
    rng = np.random.default_rng(0)
    for z, t in zip(rng.uniform(-4, 4, 1000), rng.uniform(0.01, 0.99, 1000)):
        drift = z / math.sqrt(t)
        assert conditional_power_trend(z, t, 0.025) == pytest.approx(
            conditional_power_drift(z, t, 0.025, drift), abs=1e-10)


def test_trend_cp_is_half_on_the_boundary():
    t = 0.4
    z = normal_quantile(1 - 0.05) * math.sqrt(t)
    assert conditional_power_trend(z, t, 0.05) == pytest.approx(0.5, abs=1e-12)


def test_two_sided_cp_hand_value():
    assert conditional_power_two_sided(0.0, 0.5, 0.05) == pytest.approx(0.00557, abs=1e-4)
    assert conditional_power_two_sided(3.0, 0.5, 0.05) == pytest.approx(conditional_power_two_sided(-3.0, 0.5, 0.05))


@pytest.mark.parametrize("t", [0.0, 1.0, 1.2])
def test_cp_undefined_outside_open_interval(t):
    with pytest.raises(DomainError):
        conditional_power_two_sided(1.0, t, 0.05)


def test_interim_z_forms():
    pooled = Moments(ate=2.0, variance=400.0, variance_of_ate=0.0, method="secrets")
    assert interim_z(pooled, 50) == pytest.approx(2.0 / math.sqrt(4.0))
    ts = TwoSampleMoments(ate=2.0, var_control=150.0, var_treatment=250.0)
    two = Moments(ate=2.0, variance=400.0, variance_of_ate=8.0, method="two_sample", two_sample=ts)
    assert interim_z(two, 50) == pytest.approx(2.0 / math.sqrt(8.0))
    assert two_sample_z(ts, 50) == interim_z(two, 50)


def test_futility_rules():
    weak = Moments(ate=0.01, variance=400.0, variance_of_ate=0.0, method="secrets")
    strong = Moments(ate=10.0, variance=400.0, variance_of_ate=0.0, method="secrets")
    assert check_for_futility(weak, 100, 0.5, 0.05, 0.11)
    assert not check_for_futility(strong, 100, 0.5, 0.05, 0.11)
    # the step reached the target: never futile
    assert not check_for_futility(weak, 100, 1.0, 0.05, 0.11)
    # boundary 0 never stops a trial with a nonzero trend
    assert not check_for_futility(weak, 100, 0.5, 0.05, 0.0)


def test_futility_with_no_signal_at_all():
    flat = Moments(ate=0.0, variance=0.0, variance_of_ate=0.0, method="secrets")
    assert check_for_futility(flat, 100, 0.5, 0.05, 0.11)
    assert not check_for_futility(flat, 100, 0.5, 0.05, 0.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        TadConfig(n_pilot=1)
    with pytest.raises(ConfigError):
        TadConfig(n_pilot=50, n_max=40)
    with pytest.raises(ConfigError):
        TadConfig(step_size_scale_factor=0.0)
    with pytest.raises(ConfigError):
        TadConfig(cp_moment_method="two_sample")


def small_config(**changes):
    values = dict(n_pilot=10, n_max=60, B=10, T=12)
    values.update(changes)
    return TadConfig(**values)


@pytest.mark.parametrize("hypothesis", ["H1", "H0"])
def test_run_tad_sie_result_invariants(gen, hypothesis):
    cfg = small_config()
    result = run_tad_sie(cfg, GeneratorSource(gen, np.random.default_rng(31), hypothesis),
                         np.random.default_rng(32))
    assert cfg.n_pilot <= result.final_arm_size <= cfg.n_max
    assert result.iterations == len(result.trace)
    assert result.increased == (result.iterations > 0)
    if result.futility_stopped:
        assert result.decision == ACCEPT
        assert result.trace[-1].futility
    sizes = [cfg.n_pilot] + [step.n_curr for step in result.trace]
    assert sizes == sorted(sizes)


def test_run_tad_sie_is_deterministic(gen):
    design = TadSieDesign(small_config())

    def once():
        source = GeneratorSource(gen, np.random.default_rng(41))
        return design.run(source, np.random.default_rng(42)).to_dict()

    assert once() == once()


def test_arm_size_grid_keeps_sizes_on_grid(gen):
    cfg = small_config(arm_size_increment=5, futility_power_boundary=0.0)
    result = run_tad_sie(cfg, GeneratorSource(gen, np.random.default_rng(51)), np.random.default_rng(52))
    for step in result.trace:
        assert (step.n_curr - cfg.n_pilot) % 5 == 0 or step.n_curr == cfg.n_max


def test_design_syncs_testing_alpha():
    design = TadSieDesign(small_config(alpha_target=0.1))
    assert design.config.testing.alpha_target == 0.1


def test_pilot_must_leave_room_for_si_tuning():
    with pytest.raises(ConfigError):
        TadConfig(n_pilot=2, n_max=20, B=4, T=10)
    assert TadConfig(n_pilot=3, n_max=20, B=4, T=10).n_pilot == 3
