import numpy as np
import pytest

from src.cohort import CohortGenConfig, generate_cohort
from src.secrets_engine import TestingParams
from src.synthetic_intervention import SiParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gen():
    return CohortGenConfig()


@pytest.fixture
def noiseless_gen():
    # every subject lies exactly on the latent-factor model
    return CohortGenConfig(noise_sd=0.0, treatment_effect_sd=0.0, treatment_effect_mean=-3.0)


@pytest.fixture
def small_cohort(gen):
    return generate_cohort(gen, 20, 20, np.random.default_rng(7))


@pytest.fixture
def si_params():
    return SiParams()


@pytest.fixture
def testing_params():
    return TestingParams()
