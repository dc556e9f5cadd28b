# src/repro.py
# Scripted reproduction scenarios on synthetic cohorts. These are qualitative
# analogs only: exact numbers need the CHAMP trial data, which is not
# redistributed and has to be loaded with load_dataset by the user.
import csv
import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

import config
from src.cohort import CONTROL, TREATMENT, CohortGenConfig, generate_cohort
from src.designs import DESIGNS
from src.designs.baselines import BaselineConfig
from src.designs.tad import TadConfig
from src.errors import ConfigError
from src.moments import NAIVE, SECRETS, bootstrap_replicates, replicate_variance, variance_of_outcome
from src.run_config import RunConfig
from src.secrets_engine import TestingParams, run_secrets
from src.simulation import evaluate, sweep
from src.stats_kernel import welch_t_test
from src.synthetic_intervention import SiParams
from src.utils import derive_streams

logger = logging.getLogger(__name__)

SCENARIOS = ("sweep", "tradeoff", "baselines", "ablation_moments", "ablation_tad", "ablation_test", "variance_scaling")

BUDGETS = {
    "quick": {"n_trials": 50, "T": 50, "B": 50},
    "full": {"n_trials": config.N_TRIALS, "T": config.T_NULL_SAMPLES, "B": config.B_BOOTSTRAP},
}

SWEEP_GRIDS = {
    "quick": {"scale_factors": (0.1, 0.5), "boundaries": (0.0, 0.01, 0.11)},
    "full": {"scale_factors": tuple(round(0.1 * k, 1) for k in range(1, 11)),
             "boundaries": (0.0,) + tuple(round(0.01 * k, 2) for k in range(1, 21))},
}

SMALL_EFFECT = 0.25
SCALING_NS = (50, 100, 200, 400)
SCALING_B = 400
# older scenario names still accepted by repro_suite
SCENARIO_ALIASES = {"theorem1": "variance_scaling"}


@dataclass(frozen=True)
class ReproBundle:
    scenario: str
    budget: str
    seed: int
    config: dict
    tables: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "label": "synthetic-data qualitative analog",
            "scenario": self.scenario,
            "budget": self.budget,
            "seed": self.seed,
            "config": self.config,
            "tables": self.tables,
            "reports": {name: report.to_dict() for name, report in self.reports.items()},
        }


# --- Helpers ---

def _cohort(effect_size=SMALL_EFFECT):
    return CohortGenConfig().with_standardized_effect(effect_size)


def _sized(config_obj, budget):
    settings = BUDGETS[budget]
    return replace(config_obj, T=settings["T"], B=settings["B"])


def _design(name, budget, **params):
    design_cls, config_cls = DESIGNS[name]
    return design_cls(_sized(config_cls(**params), budget))


def _preset_design(preset, budget, **params):
    run = RunConfig.resolve(overrides={"design": preset, "params": params})
    design = run.build_design()
    design.config = _sized(design.config, budget)
    return design


def _summary_row(label, pair):
    return {"method": label, "power": pair.h1.rejection_rate, "power_se": pair.h1.rejection_rate_se,
            "significance": pair.h0.rejection_rate, "significance_se": pair.h0.rejection_rate_se,
            "increase_rate_h1": pair.h1.increase_rate, "futility_rate_h1": pair.h1.futility_rate,
            "median_arm_size_h1": pair.h1.arm_size_summary.median,
            "median_iterations_h1": pair.h1.iterations_summary.median}


def _compare(designs, budget, seed, workers):
    origin = _cohort()
    n_trials = BUDGETS[budget]["n_trials"]
    rows, reports = [], {}
    for label, design in designs:
        pair = evaluate(design, origin, n_trials, seed, workers)
        rows.append(_summary_row(label, pair))
        reports[label] = pair
    return rows, reports


# --- Scenarios ---

def run_sweep_scenario(budget, seed, workers):
    grid = SWEEP_GRIDS[budget]
    report = sweep(DESIGNS["tad_sie"][0], _sized(TadConfig(), budget), grid["scale_factors"],
                   grid["boundaries"], _cohort(), BUDGETS[budget]["n_trials"], seed, workers)
    rows = [{"step_size_scale_factor": c.step_size_scale_factor,
             "futility_power_boundary": c.futility_power_boundary,
             "power": c.power, "significance": c.significance, "feasible": c.feasible}
            for c in report.cells]
    return {"heatmap": rows}, {"sweep": report}


def run_tradeoff_scenario(budget, seed, workers):
    rows, reports = [], {}
    for preset, scale in (("tad_sie_se", 0.1), ("tad_sie_te", 0.6)):
        design = _preset_design(preset, budget)
        pair = evaluate(design, _cohort(), BUDGETS[budget]["n_trials"], seed, workers)
        reports[preset] = pair
        for report in (pair.h1, pair.h0):
            for metric, box in (("final_arm_size", report.arm_size_summary),
                                ("iterations", report.iterations_summary)):
                row = {"step_size_scale_factor": scale, "hypothesis": report.hypothesis, "metric": metric}
                row.update(box.as_dict())
                rows.append(row)
    return {"boxes": rows}, reports


def run_baselines_scenario(budget, seed, workers):
    designs = [
        ("Fixed Sample Design", _design("fixed", budget)),
        ("Standard-TAD", _design("standard_tad", budget)),
        ("TAD-SIE-SE", _preset_design("tad_sie_se", budget)),
        ("TAD-SIE-TE", _preset_design("tad_sie_te", budget)),
    ]
    rows, reports = _compare(designs, budget, seed, workers)
    table = [{"method": r["method"], "power": r["power"], "significance": r["significance"]} for r in rows]
    return {"comparison": table, "details": rows}, reports


def run_ablation_moments_scenario(budget, seed, workers):
    designs = [
        ("secrets moments", _preset_design("tad_sie_se", budget)),
        ("naive moments", _preset_design("tad_sie_se", budget, moment_method=NAIVE, cp_moment_method=NAIVE)),
        ("naive CP moments", _preset_design("tad_sie_se", budget, moment_method=SECRETS,
                                            cp_moment_method=NAIVE)),
    ]
    rows, reports = _compare(designs, budget, seed, workers)
    return {"comparison": rows}, reports


def run_ablation_tad_scenario(budget, seed, workers):
    designs = [
        ("Standard-TAD+SIE", _design("standard_tad_sie", budget)),
        ("TAD-SIE-SE", _preset_design("tad_sie_se", budget)),
    ]
    rows, reports = _compare(designs, budget, seed, workers)
    return {"comparison": rows}, reports


def fixed_size_test_comparison(arm_size, n_trials, T, seed, effect_size=SMALL_EFFECT):
    """Power of SECRETS and of Welch's test on the same fixed-size H1 cohorts."""
    gen = _cohort(effect_size)
    testing = TestingParams()
    secrets_rejects = welch_rejects = 0
    si = SiParams()
    for i in range(n_trials):
        data_rng, test_rng = derive_streams(seed, i)
        dataset = generate_cohort(gen, arm_size, arm_size, data_rng)
        outcome = dataset.outcome()
        ctrl, treat = dataset.matrix(CONTROL), dataset.matrix(TREATMENT)
        secrets_rejects += run_secrets(ctrl, treat, si, testing, T, outcome, test_rng).reject
        welch_rejects += welch_t_test(outcome(ctrl), outcome(treat), testing.alpha_target).reject
    return [{"test": "SECRETS", "arm_size": arm_size, "power": secrets_rejects / n_trials},
            {"test": "Welch", "arm_size": arm_size, "power": welch_rejects / n_trials}]


def run_ablation_test_scenario(budget, seed, workers):
    designs = [
        ("TAD-SIE", _preset_design("tad_sie", budget)),
        ("TAD with standard testing", _preset_design("tad_standard_test", budget)),
    ]
    rows, reports = _compare(designs, budget, seed, workers)
    settings = BUDGETS[budget]
    fixed = fixed_size_test_comparison(100, settings["n_trials"], settings["T"], seed)
    return {"comparison": rows, "fixed_size_tests": fixed}, reports


def pooled_ite_ate(ctrl_ites, treat_ites, stream):
    return float(np.mean(np.concatenate([ctrl_ites, treat_ites])))


def anchored_ite_ate(ctrl_ites, treat_ites, stream):
    # every counterfactual leans on the first donor drawn, so all ITEs share it
    return pooled_ite_ate(ctrl_ites, treat_ites, stream) + float(treat_ites[0, 0])


def variance_scaling(dependent, ns=SCALING_NS, n_seeds=20, B=SCALING_B, rng=None):
    """Equivalent i.i.d. outcome variance against arm size.

    Each point is one ITE dataset (one column per arm) pushed through the
    moments bootstrap and converted with variance_of_outcome. Dependent ITEs
    share a component drawn from the resampled donor arm, so the variance of
    their mean stops shrinking with n and the equivalent variance grows
    linearly. Independent ITEs keep it flat.
    """
    rng = np.random.default_rng(config.SEED) if rng is None else rng
    ate_fn = anchored_ite_ate if dependent else pooled_ite_ate
    rows = []
    for seed_index, stream in enumerate(rng.spawn(n_seeds)):
        for n in ns:
            ctrl_ites = stream.normal(0.0, 1.0, size=(n, 1))
            treat_ites = stream.normal(0.0, 1.0, size=(n, 1))
            ates = bootstrap_replicates(ctrl_ites, treat_ites, B, ate_fn, stream)
            rows.append({"seed": seed_index, "n": n,
                         "sigma2": variance_of_outcome(replicate_variance(ates), n)})
    fit = stats.linregress([r["n"] for r in rows], [r["sigma2"] for r in rows])
    slope_t = fit.slope / fit.stderr if fit.stderr > 0 else float("inf")
    return {"dependent": dependent, "rows": rows, "slope": float(fit.slope), "intercept": float(fit.intercept),
            "r_squared": float(fit.rvalue ** 2), "slope_t": float(slope_t)}


def run_variance_scaling_scenario(budget, seed, workers):
    tables = {}
    for dependent in (True, False):
        result = variance_scaling(dependent, rng=np.random.default_rng(seed))
        name = "dependent" if dependent else "independent"
        tables[f"{name}_points"] = result["rows"]
        tables.setdefault("fits", []).append({key: result[key] for key in
                                              ("dependent", "slope", "intercept", "r_squared", "slope_t")})
    return tables, {}


RUNNERS = {
    "sweep": run_sweep_scenario,
    "tradeoff": run_tradeoff_scenario,
    "baselines": run_baselines_scenario,
    "ablation_moments": run_ablation_moments_scenario,
    "ablation_tad": run_ablation_tad_scenario,
    "ablation_test": run_ablation_test_scenario,
    "variance_scaling": run_variance_scaling_scenario,
}


def repro_suite(scenario, budget="quick", seed=config.SEED, workers=1):
    scenario = SCENARIO_ALIASES.get(scenario, scenario)
    if scenario not in RUNNERS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    if budget not in BUDGETS:
        raise ConfigError(f"unknown budget {budget!r}; expected quick or full")
    logger.info("reproducing %s (%s budget, seed %d)", scenario, budget, seed)
    tables, reports = RUNNERS[scenario](budget, seed, workers)
    settings = {"budget": BUDGETS[budget], "cohort": _cohort().to_dict(),
                "tad_defaults": _sized(TadConfig(), budget).to_dict(),
                "baseline_defaults": _sized(BaselineConfig(), budget).to_dict()}
    return ReproBundle(scenario=scenario, budget=budget, seed=seed, config=settings, tables=tables,
                       reports=reports)


def write_bundle(bundle, directory):
    """bundle.json plus one CSV per table."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "bundle.json"), "w", encoding="utf-8") as fh:
        json.dump(bundle.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    for name, rows in bundle.tables.items():
        if not rows:
            continue
        columns = list(rows[0])
        with open(os.path.join(directory, f"{name}.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    logger.info("wrote %s bundle to %s", bundle.scenario, directory)
    return directory
