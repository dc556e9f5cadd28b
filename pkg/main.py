# main.py
import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

import config
from blueprints import COHORT_BLUEPRINTS, DESIGN_BLUEPRINTS
from src.cohort import CohortGenConfig, dataset_metadata, generate_cohort, make_source, write_dataset
from src.designs.baselines import BaselineConfig
from src.designs.tad import TadConfig
from src.errors import ConfigError, TadSieError
from src.repro import BUDGETS, SCENARIO_ALIASES, SCENARIOS, repro_suite, write_bundle
from src.run_config import RunConfig, load_config_file
from src.simulation import evaluate, load_report, render_report, sweep
from src.utils import configure_logging, default_workers, derive_streams

# flag -> (params key, type); only flags given on the command line override
PARAM_FLAGS = {
    "--n-pilot": ("n_pilot", int),
    "--alpha-target": ("alpha_target", float),
    "--power-target": ("power_target", float),
    "--n-max": ("n_max", int),
    "--step-size-scale-factor": ("step_size_scale_factor", float),
    "--futility-power-boundary": ("futility_power_boundary", float),
    "--B": ("B", int),
    "--T": ("T", int),
    "--moment-method": ("moment_method", str),
    "--cp-moment-method": ("cp_moment_method", str),
    "--arm-size-increment": ("arm_size_increment", int),
    "--interim-information-fraction": ("interim_information_fraction", float),
    "--cp-promising-threshold": ("cp_promising_threshold", float),
}

USAGE_ERROR = 2
RUN_ERROR = 1


def _flatten(prefix, values):
    for key, value in values.items():
        if isinstance(value, dict):
            yield from _flatten(f"{prefix}{key}.", value)
        else:
            yield f"{prefix}{key}", value


def config_key_listing():
    keys = dict(_flatten("", TadConfig().to_dict()))
    keys.update(_flatten("", BaselineConfig().to_dict()))
    lines = ["config keys under \"params\" (defaults):"]
    lines += [f"  {key} = {value}" for key, value in sorted(keys.items())]
    lines += ["run keys: design, params, cohort, seed, n_trials, workers, replace_draws",
              f"designs: {', '.join(DESIGN_BLUEPRINTS)}",
              f"default seed: {config.SEED}; {config.WORKERS_ENV} and {config.LOG_LEVEL_ENV} read from the environment"]
    return "\n".join(lines)


def _comma_floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override its keys")
    common.add_argument("--design", choices=sorted(DESIGN_BLUEPRINTS), default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--n-trials", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--log-level", default=None)
    common.add_argument("--dataset", default=argparse.SUPPRESS, help="cohort CSV to resample from")
    common.add_argument("--metadata", default=argparse.SUPPRESS, help="metadata sidecar (default: CSV path + .json)")
    common.add_argument("--effect-size", type=float, default=argparse.SUPPRESS,
                        help="standardized effect of the synthetic cohort")
    common.add_argument("--no-replace", action="store_true", default=argparse.SUPPRESS,
                        help="recruit from the dataset without replacement")
    common.add_argument("--retune-per-replicate", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--ridge-grid", type=_comma_floats, default=argparse.SUPPRESS)
    common.add_argument("--pre-period-end", type=int, default=argparse.SUPPRESS)
    for flag, (_, kind) in PARAM_FLAGS.items():
        common.add_argument(flag, type=kind, default=argparse.SUPPRESS)
    common.add_argument("--output", "-o", default=None)

    parser = argparse.ArgumentParser(prog="tadsie", description="TAD-SIE trial design simulator.",
                                     epilog=config_key_listing(),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="write a synthetic cohort CSV")
    gen.add_argument("--n-control", type=int, default=100)
    gen.add_argument("--n-treatment", type=int, default=100)
    gen.add_argument("--cohort", choices=sorted(COHORT_BLUEPRINTS), default="default")

    trial = sub.add_parser("run-trial", parents=[common], help="run one trial and print its result")
    trial.add_argument("--hypothesis", choices=("H1", "H0"), default="H1")
    trial.add_argument("--trial-index", type=int, default=0)

    ev = sub.add_parser("evaluate", parents=[common], help="simulate trials under H1 and H0")
    ev.add_argument("--format", choices=("json", "csv"), default="json")

    sw = sub.add_parser("sweep", parents=[common], help="grid over step size scale and futility boundary")
    sw.add_argument("--scales", type=_comma_floats, required=True)
    sw.add_argument("--boundaries", type=_comma_floats, required=True)
    sw.add_argument("--format", choices=("json", "csv"), default="json")

    rep = sub.add_parser("report", help="re-render a saved JSON report")
    rep.add_argument("input")
    rep.add_argument("--format", choices=("json", "csv"), default="csv")
    rep.add_argument("--output", "-o", default=None)
    rep.add_argument("--log-level", default=None)

    repro = sub.add_parser("repro", help="run a reproduction scenario into a bundle directory")
    repro.add_argument("scenario", choices=SCENARIOS + tuple(SCENARIO_ALIASES))
    repro.add_argument("--budget", choices=sorted(BUDGETS), default="quick")
    repro.add_argument("--seed", type=int, default=config.SEED)
    repro.add_argument("--workers", type=int, default=None)
    repro.add_argument("--output", "-o", required=True)
    repro.add_argument("--log-level", default=None)
    return parser


def resolve_run(args, env, stderr):
    file_values = load_config_file(args.config) if args.config else {}
    given = vars(args)
    if "seed" not in given and "seed" not in file_values:
        print(f"using default seed {config.SEED}", file=stderr)
    overrides = {"params": {}}
    for key in ("design", "seed", "n_trials", "workers"):
        if key in given:
            overrides[key] = given[key]
    if "workers" not in given and "workers" not in file_values:
        overrides["workers"] = default_workers(env)
    if given.get("no_replace"):
        overrides["replace_draws"] = False
    for flag, (key, _) in PARAM_FLAGS.items():
        attr = flag.lstrip("-").replace("-", "_")
        if attr in given:
            overrides["params"][key] = given[attr]
    if given.get("retune_per_replicate"):
        overrides["params"]["retune_per_replicate"] = True
    si = {}
    if "ridge_grid" in given:
        si["ridge_grid"] = given["ridge_grid"]
    if "pre_period_end" in given:
        si["pre_period_end"] = given["pre_period_end"]
    if si:
        overrides["params"]["si"] = si
    cohort = {}
    if "dataset" in given:
        cohort["dataset"] = given["dataset"]
        if "metadata" in given:
            cohort["metadata"] = given["metadata"]
    if "effect_size" in given:
        cohort["effect_size"] = given["effect_size"]
    if cohort:
        # a dataset replaces any generator spec from the file
        overrides["cohort"] = cohort
        if "dataset" in cohort:
            file_values = {k: v for k, v in file_values.items() if k != "cohort"}
    return RunConfig.resolve(file_values, overrides)


def _emit(text, output, stdout):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _with_run_config(report, run):
    return replace(report, config=run.to_dict())


def cmd_generate(args, env, stdout, stderr):
    if not args.output:
        raise ConfigError("generate needs --output for the CSV path")
    gen = CohortGenConfig()
    effect = vars(args).get("effect_size", COHORT_BLUEPRINTS[args.cohort]["effect_size"])
    if effect is not None:
        gen = gen.with_standardized_effect(effect)
    seed = vars(args).get("seed", config.SEED)
    dataset = generate_cohort(gen, args.n_control, args.n_treatment, np.random.default_rng(seed))
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        write_dataset(dataset, fh)
    with open(args.output + ".json", "w", encoding="utf-8") as fh:
        json.dump(dataset_metadata(dataset), fh, sort_keys=True)
    stdout.write(f"wrote {args.n_control}+{args.n_treatment} subjects to {args.output}\n")


def cmd_run_trial(args, env, stdout, stderr):
    run = resolve_run(args, env, stderr)
    design = run.build_design()
    source_rng, design_rng = derive_streams(run.seed, args.trial_index)
    source = make_source(run.origin(), source_rng, hypothesis=args.hypothesis, replace=run.replace_draws)
    result = design.run(source, design_rng)
    payload = {"design": run.design, "hypothesis": args.hypothesis, "seed": run.seed,
               "trial_index": args.trial_index, "result": result.to_dict()}
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.output, stdout)


def cmd_evaluate(args, env, stdout, stderr):
    run = resolve_run(args, env, stderr)
    pair = evaluate(run.build_design(), run.origin(), run.n_trials, run.seed, run.workers, run.replace_draws)
    pair = type(pair)(h1=_with_run_config(pair.h1, run), h0=_with_run_config(pair.h0, run))
    _emit(render_report(pair, args.format), args.output, stdout)


def cmd_sweep(args, env, stdout, stderr):
    run = resolve_run(args, env, stderr)
    design = run.build_design()
    report = sweep(type(design), design.config, args.scales, args.boundaries, run.origin(),
                   run.n_trials, run.seed, run.workers, run.replace_draws, name=run.design)
    report = _with_run_config(report, run)
    _emit(render_report(report, args.format), args.output, stdout)


def cmd_report(args, env, stdout, stderr):
    with open(args.input, encoding="utf-8") as fh:
        report = load_report(fh)
    _emit(render_report(report, args.format), args.output, stdout)


def cmd_repro(args, env, stdout, stderr):
    workers = args.workers if args.workers is not None else default_workers(env)
    bundle = repro_suite(args.scenario, args.budget, args.seed, workers)
    write_bundle(bundle, args.output)
    stdout.write(f"wrote {args.scenario} bundle to {args.output}\n")


COMMANDS = {
    "generate": cmd_generate,
    "run-trial": cmd_run_trial,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "repro": cmd_repro,
}


def run_cli(argv=None, env=None, stdout=None, stderr=None):
    env = os.environ if env is None else env
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        configure_logging(args.log_level, env)
        COMMANDS[args.command](args, env, stdout, stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=stderr)
        return USAGE_ERROR
    except (TadSieError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return RUN_ERROR
    return 0


if __name__ == '__main__':
    sys.exit(run_cli())
