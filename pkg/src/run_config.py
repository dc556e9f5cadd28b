# src/run_config.py
# Resolves a run from a preset, an optional JSON config file and command-line
# overrides, in that order of precedence.
import json
from dataclasses import dataclass, field, fields

import config
from blueprints import DESIGN_BLUEPRINTS, FUTILITY_BOUNDARY_PRESETS
from src.cohort import CohortGenConfig, read_dataset_files
from src.designs import DESIGNS
from src.errors import ConfigError
from src.secrets_engine import TestingParams
from src.synthetic_intervention import SiParams

RUN_KEYS = ("design", "params", "cohort", "seed", "n_trials", "workers", "replace_draws")


def _build(cls, values, where):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


def build_design_config(config_cls, params):
    values = dict(params)
    if "si" in values:
        si = dict(values["si"])
        if "ridge_grid" in si:
            si["ridge_grid"] = tuple(si["ridge_grid"])
        values["si"] = _build(SiParams, si, "si")
    testing = dict(values.pop("testing", {}))
    testing.setdefault("alpha_target", values.get("alpha_target", config.ALPHA_TARGET))
    values["testing"] = _build(TestingParams, testing, "testing")
    return _build(config_cls, values, f"{config_cls.__name__} parameter")


def build_cohort(spec):
    """A generator config or a loaded dataset from a cohort spec mapping:
    {"dataset": path[, "metadata": path]} or generator fields plus an
    optional "effect_size" in control-outcome SDs."""
    spec = dict(spec or {})
    if "dataset" in spec:
        unknown = sorted(set(spec) - {"dataset", "metadata"})
        if unknown:
            raise ConfigError(f"unknown cohort key(s) for a dataset: {', '.join(unknown)}")
        return read_dataset_files(spec["dataset"], spec.get("metadata"))
    effect_size = spec.pop("effect_size", None)
    gen = _build(CohortGenConfig, spec, "cohort")
    if effect_size is not None:
        gen = gen.with_standardized_effect(effect_size)
    return gen


def _merge(base, update):
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass(frozen=True)
class RunConfig:
    design: str = "tad_sie"
    params: dict = field(default_factory=dict)
    cohort: dict = field(default_factory=dict)
    seed: int = config.SEED
    n_trials: int = config.N_TRIALS
    workers: int = config.DEFAULT_WORKERS
    replace_draws: bool = True

    def __post_init__(self):
        if self.design not in DESIGN_BLUEPRINTS:
            raise ConfigError(f"unknown design {self.design!r}; expected one of {', '.join(DESIGN_BLUEPRINTS)}")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_mapping(cls, mapping):
        unknown = sorted(set(mapping) - set(RUN_KEYS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**mapping)

    @classmethod
    def resolve(cls, file_values=None, overrides=None):
        """Preset, then config file, then flags. The preset's params sit
        under anything the file or flags set."""
        layered = _merge(file_values or {}, overrides or {})
        design = layered.get("design", "tad_sie")
        if design not in DESIGN_BLUEPRINTS:
            raise ConfigError(f"unknown design {design!r}; expected one of {', '.join(DESIGN_BLUEPRINTS)}")
        params = _merge(DESIGN_BLUEPRINTS[design]["params"], layered.get("params", {}))
        _, config_cls = DESIGNS[DESIGN_BLUEPRINTS[design]["design"]]
        if "futility_power_boundary" in {f.name for f in fields(config_cls)}:
            power = params.get("power_target", config.POWER_TARGET)
            if "futility_power_boundary" not in params and power in FUTILITY_BOUNDARY_PRESETS:
                params["futility_power_boundary"] = FUTILITY_BOUNDARY_PRESETS[power]
        return cls.from_mapping({**layered, "design": design, "params": params})

    def design_config(self):
        _, config_cls = DESIGNS[DESIGN_BLUEPRINTS[self.design]["design"]]
        return build_design_config(config_cls, self.params)

    def build_design(self):
        design_cls, _ = DESIGNS[DESIGN_BLUEPRINTS[self.design]["design"]]
        design = design_cls(self.design_config())
        # reports carry the preset name, e.g. tad_sie_se
        design.name = self.design
        return design

    def origin(self):
        return build_cohort(self.cohort)

    def to_dict(self):
        return {
            "design": self.design,
            "params": self.design_config().to_dict(),
            "cohort": dict(self.cohort),
            "seed": self.seed,
            "n_trials": self.n_trials,
            "replace_draws": self.replace_draws,
        }


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data
