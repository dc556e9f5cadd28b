import json

import numpy as np
import pytest

from src.cohort import CohortGenConfig
from src.designs.baselines import BaselineConfig, FixedSampleDesign
from src.designs.tad import TadConfig, TadSieDesign
from src.errors import ConfigError
from src.repro import (RUNNERS, SCENARIOS, SMALL_EFFECT, fixed_size_test_comparison, repro_suite, variance_scaling,
                       write_bundle)
from src.simulation import simulate_trials, sweep


def test_dependent_ites_grow_the_equivalent_variance():
    result = variance_scaling(True, n_seeds=10, B=200, rng=np.random.default_rng(0))
    assert result["slope"] > 0
    assert result["r_squared"] > 0.8


def test_independent_ites_keep_the_equivalent_variance_flat():
    result = variance_scaling(False, n_seeds=10, B=200, rng=np.random.default_rng(0))
    assert abs(result["slope_t"]) < 3
    assert result["intercept"] == pytest.approx(1.0, abs=0.3)


def test_unknown_scenario_and_budget():
    with pytest.raises(ConfigError):
        repro_suite("figure9")
    with pytest.raises(ConfigError):
        repro_suite("variance_scaling", budget="huge")


def test_variance_scaling_bundle_on_disk(tmp_path):
    bundle = repro_suite("variance_scaling", seed=3)
    out = write_bundle(bundle, str(tmp_path / "bundle"))
    data = json.loads((tmp_path / "bundle" / "bundle.json").read_text())
    assert out.endswith("bundle")
    assert data["label"] == "synthetic-data qualitative analog"
    assert data["scenario"] == "variance_scaling"
    assert [fit["dependent"] for fit in data["tables"]["fits"]] == [True, False]
    header = (tmp_path / "bundle" / "fits.csv").read_text().splitlines()[0]
    assert header == "dependent,slope,intercept,r_squared,slope_t"
    assert (tmp_path / "bundle" / "dependent_points.csv").exists()


def test_every_scenario_has_a_runner():
    assert set(RUNNERS) == set(SCENARIOS)


@pytest.mark.slow
def test_secrets_beats_welch_at_fixed_size():
    rows = fixed_size_test_comparison(100, n_trials=100, T=50, seed=1)
    power = {row["test"]: row["power"] for row in rows}
    assert power["SECRETS"] - power["Welch"] >= 0.10


@pytest.mark.slow
def test_baseline_comparison_table(tmp_path):
    bundle = repro_suite("baselines", seed=2)
    methods = [row["method"] for row in bundle.tables["comparison"]]
    assert methods == ["Fixed Sample Design", "Standard-TAD", "TAD-SIE-SE", "TAD-SIE-TE"]
    for row in bundle.tables["comparison"]:
        assert 0.0 <= row["power"] <= 1.0
        assert 0.0 <= row["significance"] <= 1.0


def test_scenario_alias_resolves():
    bundle = repro_suite("theorem1", seed=4)
    assert bundle.scenario == "variance_scaling"
    fits = {fit["dependent"]: fit for fit in bundle.tables["fits"]}
    assert fits[True]["r_squared"] > 0.9 and fits[True]["slope"] > 0


def _effect_cohort():
    return CohortGenConfig().with_standardized_effect(SMALL_EFFECT)


@pytest.mark.slow
def test_futility_boundary_restores_feasibility():
    base = TadConfig(step_size_scale_factor=0.1, T=50, B=50)
    report = sweep(TadSieDesign, base, [0.1], [0.0, 0.01, 0.11], _effect_cohort(), n_trials=100, seed=1, workers=4)
    no_futility, *with_futility = report.cells
    assert no_futility.significance > base.alpha_target + 0.03
    assert any(c.power >= 0.75 and c.significance <= 0.08 for c in with_futility)


@pytest.mark.slow
def test_larger_steps_trade_size_for_iterations():
    bundle = repro_suite("tradeoff", seed=3, workers=4)
    se, te = bundle.reports["tad_sie_se"].h1, bundle.reports["tad_sie_te"].h1
    assert te.iterations_summary.median < se.iterations_summary.median
    assert te.arm_size_summary.median > se.arm_size_summary.median


@pytest.mark.slow
def test_standard_tad_rarely_increases():
    bundle = repro_suite("ablation_tad", seed=4, workers=4)
    rates = {row["method"]: row["increase_rate_h1"] for row in bundle.tables["comparison"]}
    assert rates["Standard-TAD+SIE"] <= rates["TAD-SIE-SE"] - 0.20


@pytest.mark.slow
def test_fixed_design_is_underpowered_on_a_small_effect():
    design = FixedSampleDesign(BaselineConfig(n_pilot=30))
    report = simulate_trials(design, _effect_cohort(), "H1", n_trials=100, seed=5)
    assert report.rejection_rate <= design.config.power_target - 0.10
