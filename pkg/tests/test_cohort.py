import io

import numpy as np
import pytest

from src.cohort import (CONTROL, TREATMENT, CohortGenConfig, GeneratorSource, PatientRecord, PoolSource,
                        RctDataset, generate_cohort, load_dataset, make_source, outcome_change_score,
                        write_dataset, dataset_metadata)
from src.errors import ConfigError, DatasetParseError, DomainError, RecruitmentError


def test_change_score():
    assert outcome_change_score([3.0, 5.0, 9.0], 0, 2) == 6.0
    with pytest.raises(DomainError):
        outcome_change_score([1.0, 2.0], 0, 5)


def test_drift_only_generator_gives_drift_times_span(rng):
    gen = CohortGenConfig(visits=5, baseline_index=0, endpoint_index=4, noise_sd=0.0, control_drift=1.0,
                          latent_loading_sd=0.0, treatment_effect_mean=0.0, treatment_effect_sd=0.0)
    dataset = generate_cohort(gen, 5, 5, rng)
    outcome = dataset.outcome()
    np.testing.assert_allclose(outcome(dataset.matrix(CONTROL)), 4.0)


def test_trivial_generator_has_zero_outcomes(rng):
    gen = CohortGenConfig(noise_sd=0.0, control_drift=0.0, latent_loading_sd=0.0,
                          treatment_effect_mean=0.0, treatment_effect_sd=0.0)
    dataset = generate_cohort(gen, 4, 4, rng)
    outcome = dataset.outcome()
    np.testing.assert_allclose(outcome(dataset.matrix(CONTROL)), 0.0)
    np.testing.assert_allclose(outcome(dataset.matrix(TREATMENT)), 0.0)


def test_treatment_effect_reaches_full_size_at_endpoint(rng):
    gen = CohortGenConfig(noise_sd=0.0, control_drift=0.0, latent_loading_sd=0.0,
                          treatment_effect_mean=-3.0, treatment_effect_sd=0.0)
    dataset = generate_cohort(gen, 3, 3, rng)
    treated = dataset.matrix(TREATMENT)
    np.testing.assert_allclose(dataset.outcome()(treated), -3.0)
    # nothing before the baseline visit
    np.testing.assert_allclose(treated[:, : gen.baseline_index + 1] - treated[:, :1], 0.0)


def test_standardized_effect_scales_with_control_sd():
    gen = CohortGenConfig().with_standardized_effect(0.25)
    assert gen.treatment_effect_mean == pytest.approx(0.25 * np.sqrt(gen.control_outcome_variance()))


def test_dataset_rejects_mislabelled_record():
    record = PatientRecord("x", TREATMENT, (1.0, 2.0, 3.0))
    with pytest.raises(ConfigError):
        RctDataset(visits=3, baseline_index=0, endpoint_index=2, control=(record,))


def test_write_then_load(small_cohort):
    buffer = io.StringIO()
    write_dataset(small_cohort, buffer)
    loaded = load_dataset(io.BytesIO(buffer.getvalue().encode("utf-8")), dataset_metadata(small_cohort))
    assert loaded == small_cohort


def test_load_dataset_reports_bad_line():
    text = "subject_id,arm,v0,v1,v2\nC1,control,1,2,3\nT1,placebo,1,2,3\n"
    with pytest.raises(DatasetParseError) as info:
        load_dataset(io.StringIO(text), {"baseline_index": 0, "endpoint_index": 2})
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_load_dataset_rejects_missing_value():
    text = "subject_id,arm,v0,v1,v2\nC1,control,1,,3\n"
    with pytest.raises(DatasetParseError):
        load_dataset(io.StringIO(text), {"baseline_index": 0, "endpoint_index": 2})


def test_load_dataset_needs_metadata():
    text = "subject_id,arm,v0,v1,v2\nC1,control,1,2,3\n"
    with pytest.raises(DatasetParseError):
        load_dataset(io.StringIO(text), {})


def test_recruitment_prefix_does_not_depend_on_chunking(gen):
    one = GeneratorSource(gen, np.random.default_rng(5))
    two = GeneratorSource(gen, np.random.default_rng(5))
    ctrl_a, treat_a = one.recruit(40)
    first, _ = two.recruit(12)
    second, _ = two.recruit(28)
    assert ctrl_a == first + second
    assert len(treat_a) == 40


def test_pool_source_under_null_draws_from_control(small_cohort, rng):
    source = PoolSource(small_cohort, rng, hypothesis="H0")
    _, treatment = source.recruit(30)
    control_trajectories = {r.trajectory for r in small_cohort.control}
    assert all(r.trajectory in control_trajectories for r in treatment)
    assert all(r.arm == TREATMENT for r in treatment)


def test_pool_source_without_replacement_runs_dry(small_cohort, rng):
    source = PoolSource(small_cohort, rng, hypothesis="H1", replace=False)
    control, _ = source.recruit(20)
    assert len({r.subject_id for r in control}) == 20
    with pytest.raises(RecruitmentError):
        source.recruit(1)


def test_make_source_dispatch(small_cohort, gen, rng):
    assert isinstance(make_source(small_cohort, rng), PoolSource)
    assert isinstance(make_source(gen, rng), GeneratorSource)
    with pytest.raises(ConfigError):
        make_source("cohort.csv", rng)


def test_dataset_extend_appends(small_cohort, rng):
    source = make_source(small_cohort, rng)
    grown = small_cohort.extend(*source.recruit(5))
    assert grown.arm_size == 25
    assert grown.control[:20] == small_cohort.control


def test_invalid_utf8_is_a_parse_error():
    raw = b"subject_id,arm,v0,v1,v2\nC1,control,1,2,\xff\xfe\n"
    with pytest.raises(DatasetParseError) as info:
        load_dataset(io.BytesIO(raw), {"baseline_index": 0, "endpoint_index": 2})
    offset = raw.index(b"\xff")
    assert "UTF-8" in str(info.value)
    assert f"byte {offset}" in str(info.value)


def test_sample_ate_is_exact_without_noise(rng):
    gen = CohortGenConfig(noise_sd=0.0, treatment_effect_sd=0.0, latent_loading_sd=0.0, treatment_effect_mean=-2.5)
    dataset = generate_cohort(gen, 50, 50, rng)
    outcome = dataset.outcome()
    ate = outcome(dataset.matrix(TREATMENT)).mean() - outcome(dataset.matrix(CONTROL)).mean()
    assert ate == pytest.approx(-2.5, abs=1e-9)


def test_sample_ate_converges_to_mean_effect(gen):
    n = 10_000
    dataset = generate_cohort(gen, n, n, np.random.default_rng(21))
    outcome = dataset.outcome()
    ctrl, treat = outcome(dataset.matrix(CONTROL)), outcome(dataset.matrix(TREATMENT))
    se = np.sqrt(ctrl.var(ddof=1) / n + treat.var(ddof=1) / n)
    assert abs(treat.mean() - ctrl.mean() - gen.treatment_effect_mean) <= 3 * se


@pytest.mark.parametrize("hypothesis", ["H0", "H1"])
@pytest.mark.parametrize("replace", [True, False])
def test_pool_source_never_fabricates_subjects(small_cohort, hypothesis, replace):
    source = PoolSource(small_cohort, np.random.default_rng(8), hypothesis=hypothesis, replace=replace)
    control, treatment = source.recruit(10)
    pool_treat = small_cohort.control if hypothesis == "H0" else small_cohort.treatment
    originals = {CONTROL: {(r.subject_id, r.trajectory) for r in small_cohort.control},
                 TREATMENT: {(r.subject_id, r.trajectory) for r in pool_treat}}
    assert all((r.subject_id, r.trajectory) in originals[CONTROL] for r in control)
    assert all((r.subject_id, r.trajectory) in originals[TREATMENT] for r in treatment)
