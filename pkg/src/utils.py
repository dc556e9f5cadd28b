# src/utils.py
import logging
import os

import numpy as np

import config
from src.errors import ConfigError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def trial_seed_sequence(seed, trial_index):
    """SeedSequence keyed on (seed, trial index); the same pair always gives
    the same streams regardless of which worker runs the trial."""
    return np.random.SeedSequence([int(seed), int(trial_index)])


def derive_streams(seed, trial_index):
    """(source stream, design stream) for one trial."""
    source_seq, design_seq = trial_seed_sequence(seed, trial_index).spawn(2)
    return np.random.default_rng(source_seq), np.random.default_rng(design_seq)


def configure_logging(level=None, env=None):
    env = os.environ if env is None else env
    level = (level or env.get(config.LOG_LEVEL_ENV) or config.DEFAULT_LOG_LEVEL).upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigError(f"unknown log level {level!r}")
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    return level


def default_workers(env=None):
    env = os.environ if env is None else env
    raw = env.get(config.WORKERS_ENV)
    if not raw:
        return config.DEFAULT_WORKERS
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{config.WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ConfigError(f"{config.WORKERS_ENV} must be >= 1, got {raw}")
    return workers
