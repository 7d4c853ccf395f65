"""Command line interface.

.. code-block:: console

    $ projbandits synth --d 30 --p-true 15 --tasks 400 --policy p-linucb,linucb
    $ projbandits movielens --data-path ml-1m --group gender=F --policy all
    $ projbandits rank-sweep --q-values 0,5,10,15 --seeds 0:10
    $ projbandits w-error --policy p-linucb,b-oful
    $ projbandits check

Exit codes: ``0`` on success, ``1`` if a ``check`` fails, ``2`` on invalid flags or
settings, ``3`` on missing or malformed data.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import pandas as pd
from dbetto import AttrsDict

from . import __version__, config
from .checks import CHECKS, run_checks
from .environments.base import BaseEnvironment
from .environments.synthetic import SyntheticEnvironment
from .exceptions import DataError
from .output import (
    SWEEP_COLUMNS,
    W_ERROR_COLUMNS,
    RunManifest,
    write_regret_csv,
    write_table,
)
from .policies import POLICIES
from .runner import (
    ExperimentConfig,
    rank_sweep,
    run_experiment,
    w_error_curve,
)

log = logging.getLogger(__name__)

EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _experiment_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)

    p.add_argument(
        "--config",
        "-c",
        help="""YAML or JSON file with default settings, keys are the long flag
        names with underscores. Flags take precedence.""",
    )

    exp = p.add_argument_group("experiment")
    exp.add_argument("--tasks", type=int, help="number of tasks T (default 100)")
    exp.add_argument("--rounds", type=int, help="rounds per task n (default 250)")
    exp.add_argument(
        "--policy",
        help=f"""comma separated policy kinds, or 'all'. Available: {", ".join(POLICIES)}
        (default p-linucb)""",
    )
    exp.add_argument("--seeds", help="comma list of seeds or a range start:stop (default 0)")
    exp.add_argument(
        "--rank-mode",
        choices=["auto", "fixed"],
        help="eigengap rank selection or the rank given by --fixed-rank (default auto)",
    )
    exp.add_argument("--fixed-rank", type=int, help="rank p of the learned projection")
    exp.add_argument(
        "--init-tasks",
        type=int,
        help="tasks run with the full-rank pair before the subspace is used (default d)",
    )
    exp.add_argument("--workers", type=int, help="number of processes (default 1)")
    exp.add_argument("--out", help="output directory (default results)")

    hyp = p.add_argument_group("hyperparameters (default: derived from n, d and V)")
    hyp.add_argument("--lambda1", type=float, help="regularization along P_perp")
    hyp.add_argument("--lambda2", type=float, help="regularization along P")
    hyp.add_argument("--lambda-ridge", type=float, help="ridge of the baselines")
    hyp.add_argument("--delta", type=float, help="confidence level")
    hyp.add_argument("--alpha", type=float, help="Thompson sampling parameter")
    hyp.add_argument("--v-bound", type=float, help="bound V on ||theta*|| (default 1)")
    hyp.add_argument("--w-bound", type=float, help="surrogate for W (default 2V)")

    env = p.add_argument_group("environment")
    env.add_argument("--d", type=int, help="dimension of the synthetic tasks (default 30)")
    env.add_argument("--p-true", type=int, help="rank of the true subspace (default 15)")
    env.add_argument(
        "--var-rho", type=float, help="variance orthogonal to the subspace (default 1e-3)"
    )
    env.add_argument("--arms", type=int, help="arms per round K (default 25)")
    env.add_argument("--noise-std", type=float, help="reward noise (default 0.1)")
    env.add_argument(
        "--data-path", help="ml-1m directory (default: $MOVIELENS_PATH)"
    )
    env.add_argument(
        "--group",
        help="user group, gender=F|M or occupation=<code|name> (default all users)",
    )
    return p


def _make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="""Increase the program verbosity""",
    )
    common.add_argument(
        "--debug",
        "-d",
        action="store_true",
        help="""Increase the program verbosity to maximum""",
    )

    parser = argparse.ArgumentParser(
        prog="projbandits",
        description="%(prog)s command line interface",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    experiment = _experiment_parser()
    sub.add_parser(
        "synth",
        parents=[common, experiment],
        help="run policies on the synthetic task population",
    )
    sub.add_parser(
        "movielens",
        parents=[common, experiment],
        help="run policies with MovieLens users as tasks",
    )
    sweep = sub.add_parser(
        "rank-sweep",
        parents=[common, experiment],
        help="total regret as a function of the rank q of P_perp",
    )
    sweep.add_argument("--q-values", help="ranks q to run (default 0..d-1)")
    werr = sub.add_parser(
        "w-error",
        parents=[common, experiment],
        help="relative error of E[W]^2 after every task",
    )
    werr.add_argument(
        "--heldout-draws", type=int, help="task draws per evaluation (default 200)"
    )

    check = sub.add_parser("check", parents=[common], help="run the property checks")
    check.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    check.add_argument(
        "--only", action="append", choices=list(CHECKS), help="run only this check"
    )
    return parser


def _policy_kinds(value: str | Sequence[str], env: BaseEnvironment) -> list[str]:
    kinds = value.split(",") if isinstance(value, str) else list(value)
    kinds = [k.strip() for k in kinds if k.strip()]
    if kinds == ["all"]:
        return [k for k, cls in POLICIES.items() if env.has_truth or not cls.needs_truth]
    unknown = [k for k in kinds if k not in POLICIES]
    if unknown or not kinds:
        msg = f"unknown policies {unknown}, choose from {list(POLICIES)} or 'all'"
        raise ValueError(msg)
    return kinds


def _experiment(settings: AttrsDict, env: BaseEnvironment, kind: str) -> ExperimentConfig:
    return ExperimentConfig(
        environment=env,
        policy=kind,
        policy_config=config.policy_config(settings, env.dim),
        num_tasks=int(settings.tasks),
        rounds_per_task=int(settings.rounds),
        seeds=tuple(settings.seeds),
        rank_mode=settings.rank_mode,
        fixed_rank=settings.fixed_rank,
        init_tasks=settings.init_tasks,
    )


def _out_dir(settings: AttrsDict) -> Path:
    out = Path(settings.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(command: str, cfgs: list[ExperimentConfig], **extra) -> RunManifest:
    snapshot = {"command": command, "runs": [c.snapshot() for c in cfgs], **extra}
    return RunManifest.start(snapshot, cfgs[0].seeds)


def _run_policies(command: str, settings: AttrsDict, env: BaseEnvironment) -> int:
    cfgs = [_experiment(settings, env, kind) for kind in _policy_kinds(settings.policy, env)]
    manifest = _manifest(command, cfgs)
    logs = [run_experiment(cfg, workers=int(settings.workers)) for cfg in cfgs]
    for lg in logs:
        if lg.failed_seeds:
            log.warning("%s: %d seeds failed: %s", lg.policy, len(lg.failed_seeds), lg.failed_seeds)

    out = _out_dir(settings)
    outputs = write_regret_csv(logs, out / "regret.csv")
    manifest.finish(outputs)
    manifest.write(out / "manifest.json")
    return 0


def _synth(settings: AttrsDict) -> int:
    env = SyntheticEnvironment(config.synthetic_spec(settings))
    return _run_policies("synth", settings, env)


def _movielens(settings: AttrsDict) -> int:
    from .environments.movielens import load_movielens

    if settings.data_path is None:
        msg = f"no data path given, use --data-path or set ${config.DATA_PATH_ENV}"
        raise ValueError(msg)
    env = load_movielens(settings.data_path, settings.group, int(settings.arms))
    return _run_policies("movielens", settings, env)


def _rank_sweep(settings: AttrsDict) -> int:
    env = SyntheticEnvironment(config.synthetic_spec(settings))
    kinds = _policy_kinds(settings.policy, env)
    if len(kinds) != 1 or kinds[0] not in ("p-linucb", "p-ts"):
        msg = "the rank sweep needs exactly one of the policies p-linucb or p-ts"
        raise ValueError(msg)

    cfg = _experiment(settings, env, kinds[0])
    q_values = settings.q_values if settings.q_values is not None else range(env.dim)
    manifest = _manifest("rank-sweep", [cfg], q_values=list(q_values))
    df = rank_sweep(cfg, q_values, workers=int(settings.workers))

    out = _out_dir(settings)
    path = write_table(df, out / "rank_sweep.csv", SWEEP_COLUMNS)
    manifest.finish([path])
    manifest.write(out / "manifest.json")
    return 0


def _w_error(settings: AttrsDict) -> int:
    env = SyntheticEnvironment(config.synthetic_spec(settings))
    cfgs = [_experiment(settings, env, kind) for kind in _policy_kinds(settings.policy, env)]
    draws = int(settings.heldout_draws)
    manifest = _manifest("w-error", cfgs, heldout_draws=draws)
    df = pd.concat(
        [w_error_curve(cfg, draws, workers=int(settings.workers)) for cfg in cfgs],
        ignore_index=True,
    )

    out = _out_dir(settings)
    path = write_table(df, out / "w_error.csv", W_ERROR_COLUMNS)
    manifest.finish([path])
    manifest.write(out / "manifest.json")
    return 0


COMMANDS: dict[str, Callable[[AttrsDict], int]] = {
    "synth": _synth,
    "movielens": _movielens,
    "rank-sweep": _rank_sweep,
    "w-error": _w_error,
}


def _check(seed: int, only: list[str] | None) -> int:
    results = run_checks(seed, only)
    for res in results:
        print(res)  # noqa: T201
    return 0 if all(res.passed for res in results) else EXIT_CHECK_FAILED


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run the command line interface and return the exit code."""
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig()
    if args.verbose:
        logging.getLogger("projbandits").setLevel(logging.DEBUG)
    if args.debug:
        logging.root.setLevel(logging.DEBUG)

    if args.command == "check":
        return _check(args.seed, args.only)

    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        settings = config.resolve_settings(flags, args.config)
        return COMMANDS[args.command](settings)
    except (DataError, FileNotFoundError) as e:
        log.error("%s", e)
        return EXIT_DATA
    except ValueError as e:
        log.error("invalid settings: %s", e)
        return EXIT_USAGE
    except RuntimeError as e:
        log.error("%s", e)
        return 1


def projbandits_cli() -> None:
    sys.exit(cli_main())
