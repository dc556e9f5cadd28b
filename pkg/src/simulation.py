# src/simulation.py
# Monte Carlo evaluation of trial designs: many independent trials under H1
# (power) or H0 (significance level), aggregated into reports.
import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import config
from src.cohort import make_source
from src.designs.base_design import TrialResult
from src.errors import ConfigError, TadSieError, TrialError
from src.stats_kernel import BOX_FIELDS, BoxSummary, binomial_se, box_summary
from src.utils import derive_streams

logger = logging.getLogger(__name__)

HYPOTHESES = ("H1", "H0")


@dataclass(frozen=True)
class EvaluationReport:
    method: str
    hypothesis: str
    n_trials: int
    rejection_rate: float
    futility_rate: float
    increase_rate: float
    arm_size_summary: BoxSummary
    iterations_summary: BoxSummary
    seed: int
    config: dict = field(default_factory=dict)
    trials: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("a report needs n_trials >= 1")
        if self.hypothesis not in HYPOTHESES:
            raise ConfigError(f"hypothesis must be H0 or H1, got {self.hypothesis!r}")

    @property
    def rejection_rate_se(self):
        return binomial_se(self.rejection_rate, self.n_trials)

    @property
    def futility_rate_se(self):
        return binomial_se(self.futility_rate, self.n_trials)

    @property
    def increase_rate_se(self):
        return binomial_se(self.increase_rate, self.n_trials)

    def to_dict(self):
        return {
            "kind": "evaluation",
            "method": self.method,
            "hypothesis": self.hypothesis,
            "n_trials": self.n_trials,
            "rejection_rate": self.rejection_rate,
            "rejection_rate_se": self.rejection_rate_se,
            "futility_rate": self.futility_rate,
            "futility_rate_se": self.futility_rate_se,
            "increase_rate": self.increase_rate,
            "increase_rate_se": self.increase_rate_se,
            "arm_size_summary": self.arm_size_summary.as_dict(),
            "iterations_summary": self.iterations_summary.as_dict(),
            "seed": self.seed,
            "config": self.config,
            "trials": [trial.to_dict() for trial in self.trials],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            method=data["method"], hypothesis=data["hypothesis"], n_trials=data["n_trials"],
            rejection_rate=data["rejection_rate"], futility_rate=data["futility_rate"],
            increase_rate=data["increase_rate"],
            arm_size_summary=BoxSummary(**data["arm_size_summary"]),
            iterations_summary=BoxSummary(**data["iterations_summary"]),
            seed=data["seed"], config=data.get("config", {}),
            trials=tuple(TrialResult.from_dict(t) for t in data.get("trials", ())),
        )


@dataclass(frozen=True)
class SweepCell:
    step_size_scale_factor: float
    futility_power_boundary: float
    h1: EvaluationReport
    h0: EvaluationReport
    feasible: bool

    @property
    def power(self):
        return self.h1.rejection_rate

    @property
    def significance(self):
        return self.h0.rejection_rate

    def to_dict(self):
        return {
            "step_size_scale_factor": self.step_size_scale_factor,
            "futility_power_boundary": self.futility_power_boundary,
            "power": self.power,
            "significance": self.significance,
            "feasible": self.feasible,
            "H1": self.h1.to_dict(),
            "H0": self.h0.to_dict(),
        }


@dataclass(frozen=True)
class SweepReport:
    method: str
    cells: tuple
    seed: int
    power_tolerance: float = config.FEASIBILITY_POWER_TOLERANCE
    alpha_tolerance: float = config.FEASIBILITY_ALPHA_TOLERANCE
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": "sweep",
            "method": self.method,
            "seed": self.seed,
            "feasibility": {"power_tolerance": self.power_tolerance, "alpha_tolerance": self.alpha_tolerance},
            "config": self.config,
            "cells": [cell.to_dict() for cell in self.cells],
        }

    @classmethod
    def from_dict(cls, data):
        cells = tuple(
            SweepCell(step_size_scale_factor=c["step_size_scale_factor"],
                      futility_power_boundary=c["futility_power_boundary"],
                      h1=EvaluationReport.from_dict(c["H1"]), h0=EvaluationReport.from_dict(c["H0"]),
                      feasible=c["feasible"])
            for c in data["cells"])
        feasibility = data.get("feasibility", {})
        return cls(method=data["method"], cells=cells, seed=data["seed"],
                   power_tolerance=feasibility.get("power_tolerance", config.FEASIBILITY_POWER_TOLERANCE),
                   alpha_tolerance=feasibility.get("alpha_tolerance", config.FEASIBILITY_ALPHA_TOLERANCE),
                   config=data.get("config", {}))


@dataclass(frozen=True)
class EvaluationPair:
    """H1 and H0 reports for one design, as produced by `evaluate`."""
    h1: EvaluationReport
    h0: EvaluationReport

    def to_dict(self):
        return {"kind": "evaluation_pair", "H1": self.h1.to_dict(), "H0": self.h0.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(h1=EvaluationReport.from_dict(data["H1"]), h0=EvaluationReport.from_dict(data["H0"]))


# --- Running trials ---

class Simulation:
    """One design against one cohort origin (a dataset to resample or a
    generator config)."""

    def __init__(self, design, origin, replace_draws=True):
        self.design = design
        self.origin = origin
        self.replace_draws = replace_draws

    def run_trial(self, hypothesis, seed, trial_index):
        source_rng, design_rng = derive_streams(seed, trial_index)
        source = make_source(self.origin, source_rng, hypothesis=hypothesis, replace=self.replace_draws)
        logger.info("%s %s trial %d started", self.design.name, hypothesis, trial_index)
        try:
            result = self.design.run(source, design_rng)
        except (TadSieError, ArithmeticError, ValueError) as exc:
            raise TrialError(trial_index, exc) from exc
        logger.info("%s %s trial %d: %s at n=%d", self.design.name, hypothesis, trial_index,
                    result.decision, result.final_arm_size)
        return result

    def run(self, hypothesis, n_trials, seed, workers=1):
        if hypothesis not in HYPOTHESES:
            raise ConfigError(f"hypothesis must be H0 or H1, got {hypothesis!r}")
        if n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {n_trials}")
        indices = range(n_trials)
        if workers <= 1:
            results = [self.run_trial(hypothesis, seed, i) for i in indices]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                # map preserves trial order, so reports do not depend on scheduling
                results = list(pool.map(lambda i: self.run_trial(hypothesis, seed, i), indices))
        return aggregate(self.design, hypothesis, results, seed)


def aggregate(design, hypothesis, results, seed):
    n = len(results)
    return EvaluationReport(
        method=design.name,
        hypothesis=hypothesis,
        n_trials=n,
        rejection_rate=sum(r.rejected for r in results) / n,
        futility_rate=sum(r.futility_stopped for r in results) / n,
        increase_rate=sum(r.increased for r in results) / n,
        arm_size_summary=box_summary([r.final_arm_size for r in results]),
        iterations_summary=box_summary([r.iterations for r in results]),
        seed=seed,
        config=design.describe(),
        trials=tuple(results),
    )


def simulate_trials(design, origin, hypothesis, n_trials=config.N_TRIALS, seed=config.SEED, workers=1,
                    replace_draws=True):
    return Simulation(design, origin, replace_draws).run(hypothesis, n_trials, seed, workers)


def evaluate(design, origin, n_trials=config.N_TRIALS, seed=config.SEED, workers=1, replace_draws=True):
    sim = Simulation(design, origin, replace_draws)
    return EvaluationPair(h1=sim.run("H1", n_trials, seed, workers), h0=sim.run("H0", n_trials, seed, workers))


def is_feasible(power, significance, design_config,
                power_tolerance=config.FEASIBILITY_POWER_TOLERANCE,
                alpha_tolerance=config.FEASIBILITY_ALPHA_TOLERANCE):
    return (power >= design_config.power_target - power_tolerance
            and significance <= design_config.alpha_target + alpha_tolerance)


def sweep(design_cls, base_config, scale_factors, boundaries, origin, n_trials=config.N_TRIALS,
          seed=config.SEED, workers=1, replace_draws=True, name=None):
    """Evaluate every (step_size_scale_factor, futility_power_boundary) pair
    under both hypotheses with the same base seed. `name` labels the cell
    reports, e.g. with a preset name, and defaults to the design class name."""
    name = name or design_cls.name
    if not scale_factors or not boundaries:
        raise ConfigError("sweep needs nonempty scale factor and boundary grids")
    if not hasattr(base_config, "step_size_scale_factor"):
        raise ConfigError(f"{name} has no step size or futility boundary to sweep")
    cells = []
    for scale in scale_factors:
        for boundary in boundaries:
            cell_config = replace(base_config, step_size_scale_factor=scale, futility_power_boundary=boundary)
            design = design_cls(cell_config)
            design.name = name
            pair = evaluate(design, origin, n_trials, seed, workers, replace_draws)
            feasible = is_feasible(pair.h1.rejection_rate, pair.h0.rejection_rate, cell_config)
            logger.info("sweep cell scale=%g boundary=%g: power %.3f significance %.3f%s", scale, boundary,
                        pair.h1.rejection_rate, pair.h0.rejection_rate, " (feasible)" if feasible else "")
            cells.append(SweepCell(step_size_scale_factor=scale, futility_power_boundary=boundary,
                                   h1=pair.h1, h0=pair.h0, feasible=feasible))
    base = design_cls(base_config)
    base.name = name
    return SweepReport(method=name, cells=tuple(cells), seed=seed, config=base.describe())


# --- Report output ---

SUMMARY_COLUMNS = ("method", "hypothesis", "n_trials", "rejection_rate", "rejection_rate_se",
                   "futility_rate", "futility_rate_se", "increase_rate", "increase_rate_se", "seed")
GRID_COLUMNS = ("step_size_scale_factor", "futility_power_boundary", "feasible")


def _report_rows(report):
    if isinstance(report, EvaluationReport):
        return [({}, report)]
    if isinstance(report, EvaluationPair):
        return [({}, report.h1), ({}, report.h0)]
    if isinstance(report, SweepReport):
        rows = []
        for cell in report.cells:
            grid = {"step_size_scale_factor": cell.step_size_scale_factor,
                    "futility_power_boundary": cell.futility_power_boundary, "feasible": cell.feasible}
            rows.extend([(grid, cell.h1), (grid, cell.h0)])
        return rows
    raise ConfigError(f"cannot write a report of type {type(report).__name__}")


def write_csv(report, sink):
    rows = _report_rows(report)
    grid_columns = GRID_COLUMNS if isinstance(report, SweepReport) else ()
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(grid_columns + SUMMARY_COLUMNS)
    for grid, ev in rows:
        summary = ev.to_dict()
        writer.writerow([grid[c] for c in grid_columns] + [summary[c] for c in SUMMARY_COLUMNS])
    # box-summary block, separated by a blank line
    writer.writerow([])
    writer.writerow(grid_columns[:2] + ("method", "hypothesis", "metric") + BOX_FIELDS)
    for grid, ev in rows:
        for metric, box in (("final_arm_size", ev.arm_size_summary), ("iterations", ev.iterations_summary)):
            values = box.as_dict()
            writer.writerow([grid[c] for c in grid_columns[:2]] + [ev.method, ev.hypothesis, metric]
                            + [values[f] for f in BOX_FIELDS])


def write_report(report, fmt, sink):
    if fmt == "json":
        json.dump(report.to_dict(), sink, sort_keys=True, indent=2)
        sink.write("\n")
    elif fmt == "csv":
        write_csv(report, sink)
    else:
        raise ConfigError(f"unknown report format {fmt!r}; expected json or csv")


def render_report(report, fmt):
    buffer = io.StringIO()
    write_report(report, fmt, buffer)
    return buffer.getvalue()


def report_from_dict(data):
    kind = data.get("kind")
    if kind == "evaluation":
        return EvaluationReport.from_dict(data)
    if kind == "evaluation_pair":
        return EvaluationPair.from_dict(data)
    if kind == "sweep":
        return SweepReport.from_dict(data)
    raise ConfigError(f"unrecognised report kind {kind!r}")


def load_report(source):
    try:
        data = json.load(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"report is not valid JSON: {exc}") from None
    return report_from_dict(data)
