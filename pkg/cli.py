"""Command-line entry point.

    python cli.py train --config configs/desk_scale.toml --out runs/desk --updates 150
    python cli.py eval --checkpoint runs/desk/checkpoints/update_00150.ckpt --case PV=20 --out runs/pv20
    python cli.py rollout --policy pn --seed 3 --trace runs/pn_seed3.csv
    python cli.py validate-config --config configs/default.toml
    python cli.py export-checkpoint-info --checkpoint runs/desk/checkpoints/update_00150.ckpt

Every command prints the resolved configuration first. Settings can also be
overridden with HSW_<SECTION>__<KEY> environment variables.
Exit codes: 0 success, 2 bad configuration or missing input file, 1 anything else.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from utils.config.settings import RunConfig, dump_config, load_config
from utils.errors import CheckpointError, ConfigError
from utils.evaluation.cases import parse_case
from utils.evaluation.exports import relative_positions, write_case_outputs, write_manifest
from utils.evaluation.monte_carlo import PN_POLICY, make_agent, run_case, run_episode, snapshot_from_checkpoint
from utils.log_config import configure_logging, detach_file_handlers
from utils.policy.checkpoint import checkpoint_info
from utils.training.trainer import train

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class InputMissing(Exception):
    pass


def _config(args):
    if args.config is not None and not Path(args.config).is_file():
        raise InputMissing(f"config file not found: {args.config}")
    return load_config(args.config)


def _workers(requested, threads):
    return requested if threads is None else max(1, min(requested, threads))


def _print_config(config):
    print("# resolved configuration")
    print(dump_config(config))
    sys.stdout.flush()


def _policy_source(args):
    if args.policy == PN_POLICY:
        return PN_POLICY
    if not Path(args.checkpoint).is_file():
        raise InputMissing(f"checkpoint not found: {args.checkpoint}")
    return snapshot_from_checkpoint(args.checkpoint)


def cmd_train(args):
    config = _config(args)
    training = config.training
    if args.seed is not None:
        training = replace(training, seed=args.seed)
    if args.updates is not None:
        training = replace(training, updates=args.updates)
    training = replace(training, workers=_workers(training.workers, args.threads))
    config = replace(config, training=training)
    _print_config(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    configure_logging(args.log_level, log_file=out / "train.log")
    config_path = out / "config.toml"
    config_path.write_text(dump_config(config))
    if args.resume is not None and not Path(args.resume).is_file():
        raise InputMissing(f"checkpoint not found: {args.resume}")

    result = train(config, out, resume_from=args.resume, show_progress=not args.quiet)
    detach_file_handlers()
    paths = [config_path, out / "metrics.csv", out / "train.log"] + list(result.checkpoints)
    write_manifest(out, paths)
    print(f"wrote {len(result.metrics)} metrics rows and {len(result.checkpoints)} checkpoint(s) to {out}")
    return EXIT_OK


def cmd_eval(args):
    config = _config(args)
    evaluation = config.evaluation
    for name in ("case", "episodes", "seed"):
        value = getattr(args, name)
        if value is not None:
            evaluation = replace(evaluation, **{name: value})
    evaluation = replace(
        evaluation,
        stochastic=args.stochastic or evaluation.stochastic,
        ground_impact=args.ground_impact or evaluation.ground_impact,
        workers=_workers(evaluation.workers, args.threads),
    )
    config = replace(config, evaluation=evaluation)
    case = parse_case(evaluation.case)
    _print_config(replace(config, scenario=case.apply(config.scenario, ground_impact=evaluation.ground_impact)))

    policy = _policy_source(args)
    result = run_case(
        case, policy, evaluation.episodes, evaluation.seed,
        scenario=config.scenario,
        stochastic=evaluation.stochastic,
        ground_impact=evaluation.ground_impact,
        workers=evaluation.workers,
        pn_gain=evaluation.pn_gain,
        trace_selection=args.traces,
        show_progress=not args.quiet,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_path = out / "config.toml"
    config_path.write_text(dump_config(config))
    paths = write_case_outputs(result, out) + [config_path]
    write_manifest(out, paths)

    row = result.summary.performance_row()
    print(json.dumps(row, indent=2))
    return EXIT_OK


def cmd_rollout(args):
    config = _config(args)
    scenario = config.scenario
    if args.case is not None:
        scenario = parse_case(args.case).apply(scenario)
    config = replace(config, scenario=scenario)
    _print_config(config)

    policy = _policy_source(args)
    agent = make_agent(policy, scenario, pn_gain=config.evaluation.pn_gain)
    info, trace = run_episode(scenario, agent, args.seed)

    trace_path = Path(args.trace)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    trace.drop(columns=["x_T", "y_T", "z_T"]).to_csv(trace_path, index=False)
    rel_path = trace_path.with_name(trace_path.stem + "_relative.csv")
    relative_positions(trace).to_csv(rel_path, index=False)
    write_manifest(trace_path.parent, [trace_path, rel_path])
    print(
        f"{info['reason']}: miss {info['miss']:.3f} m, terminal speed {info['terminal_speed']:.1f} m/s, "
        f"time of flight {info['time_of_flight']:.2f} s, {info['n_diverts']} divert(s); trace written to {trace_path}"
    )
    return EXIT_OK


def cmd_validate_config(args):
    config = _config(args)
    _print_config(config)
    print(f"{args.config or '<defaults>'}: OK")
    return EXIT_OK


def cmd_export_checkpoint_info(args):
    if not Path(args.checkpoint).is_file():
        raise InputMissing(f"checkpoint not found: {args.checkpoint}")
    _print_config(RunConfig())
    info = checkpoint_info(args.checkpoint)
    text = json.dumps(info, indent=2)
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    print(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(description="Hypersonic terminal guidance: simulation, training and evaluation.")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--threads", type=int, default=None, help="cap on worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the recurrent policy")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--updates", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--quiet", action="store_true", help="no progress bar")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="Monte Carlo evaluation of one experiment case")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint")
    source.add_argument("--policy", choices=[PN_POLICY])
    p.add_argument("--case", default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--stochastic", action="store_true", help="sample actions instead of using the policy mean")
    p.add_argument("--ground-impact", action="store_true", help="run every episode to ground impact")
    p.add_argument("--traces", default="first", choices=["none", "first", "first_divert", "all"])
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("rollout", help="run and trace a single episode")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint")
    source.add_argument("--policy", choices=[PN_POLICY])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", required=True)
    p.add_argument("--case", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(handler=cmd_rollout)

    p = sub.add_parser("validate-config", help="parse, validate and print a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(handler=cmd_validate_config)

    p = sub.add_parser("export-checkpoint-info", help="print a checkpoint's header and section sizes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None, help="also write the info as JSON")
    p.set_defaults(handler=cmd_export_checkpoint_info)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (ConfigError, InputMissing) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception("%s failed", args.command)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    finally:
        detach_file_handlers()


if __name__ == "__main__":
    sys.exit(main())
