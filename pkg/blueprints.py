# blueprints.py
# Named trial-design presets. Each entry picks a design and the config values
# that differ from the defaults in config.py; anything else can still be
# overridden from a config file or the command line.

DESIGN_BLUEPRINTS = {
    "tad_sie": {
        "design": "tad_sie",
        "params": {
            "step_size_scale_factor": 0.5,
        },
    },
    "tad_sie_se": {
        # sample-efficient: small steps, more iterations
        "design": "tad_sie",
        "params": {
            "step_size_scale_factor": 0.1,
        },
    },
    "tad_sie_te": {
        # time-efficient: large steps, fewer iterations
        "design": "tad_sie",
        "params": {
            "step_size_scale_factor": 0.6,
        },
    },
    "fixed": {
        "design": "fixed",
        "params": {},
    },
    "standard_tad": {
        "design": "standard_tad",
        "params": {
            "interim_information_fraction": 0.99,
            "cp_promising_threshold": 0.5,
        },
    },
    "standard_tad_sie": {
        "design": "standard_tad_sie",
        "params": {
            "interim_information_fraction": 0.99,
            "cp_promising_threshold": 0.5,
        },
    },
    "tad_standard_test": {
        "design": "tad_standard_test",
        "params": {
            "step_size_scale_factor": 0.5,
        },
    },
}

# futility_power_boundary by power target, applied when the boundary is not set explicitly
FUTILITY_BOUNDARY_PRESETS = {
    0.8: 0.11,
    0.9: 0.01,
}

# standardized effect sizes for the synthetic cohorts used in the comparisons
COHORT_BLUEPRINTS = {
    "default": {"effect_size": None},
    "small_effect": {"effect_size": 0.25},
    "null": {"effect_size": 0.0},
}
