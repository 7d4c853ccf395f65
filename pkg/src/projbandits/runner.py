"""Meta-learning loop over a sequence of bandit tasks.

For every seed a fresh :class:`~.subspace.SubspaceModel` is created. Each task starts
from the projection pair chosen by the policy (full rank during the initialization
phase), runs ``n`` rounds of select, reward and update, and ends by feeding the ridge
estimate ``A_n^-1 b'_n`` to the subspace model. The projection is only rebuilt at task
boundaries.

Every seed draws from independent streams spawned from its
:class:`numpy.random.SeedSequence`: task parameters, rounds (contexts and reward
noise), the policy's own sampling and the held-out draws of the W error. Policies
compared under the same seed thus see the same tasks and the same contexts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .environments.base import BaseEnvironment
from .environments.synthetic import SyntheticEnvironment
from .exceptions import RankOutOfRangeError
from .policies import (
    POLICIES,
    PolicyConfig,
    check_arm_set,
    make_policy,
    ridge_estimate,
    update_state,
)
from .subspace import (
    SubspaceModel,
    ccipca_update,
    check_projection_pair,
    projection_error_metric,
)

log = logging.getLogger(__name__)

RANK_MODES = ("auto", "fixed")
DEFAULT_HELDOUT_DRAWS = 200


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run of one policy."""

    environment: BaseEnvironment
    policy: str
    policy_config: PolicyConfig
    num_tasks: int = 100
    """``T``, capped by the number of tasks the environment can serve."""
    rounds_per_task: int = 250
    """``n``."""
    seeds: tuple[int, ...] = (0,)
    rank_mode: str = "auto"
    """``auto`` selects the rank at the largest eigengap, ``fixed`` uses ``fixed_rank``."""
    fixed_rank: int | None = None
    init_tasks: int | None = None
    """number of initialization tasks run with the full-rank pair. Defaults to ``d`` for
    policies that learn the subspace in ``auto`` rank mode and ``0`` otherwise."""

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.num_tasks < 1 or self.rounds_per_task < 1:
            msg = "need at least one task and one round per task"
            raise ValueError(msg)
        if not self.seeds:
            msg = "no seeds given"
            raise ValueError(msg)
        if len(set(self.seeds)) != len(self.seeds):
            msg = f"duplicate seeds in {self.seeds}"
            raise ValueError(msg)
        if self.policy not in POLICIES:
            msg = f"unknown policy {self.policy!r}, choose from {sorted(POLICIES)}"
            raise ValueError(msg)
        if POLICIES[self.policy].needs_truth and not self.environment.has_truth:
            msg = f"policy {self.policy} needs an environment with a known projection"
            raise ValueError(msg)
        if self.rank_mode not in RANK_MODES:
            msg = f"rank mode must be one of {RANK_MODES}, got {self.rank_mode!r}"
            raise ValueError(msg)
        if self.rank_mode == "fixed":
            d = self.environment.dim
            if self.fixed_rank is None or not 1 <= self.fixed_rank <= d:
                msg = f"fixed rank mode needs a rank in [1, {d}], got {self.fixed_rank}"
                raise RankOutOfRangeError(msg)
        if self.init_tasks is not None and self.init_tasks < 0:
            msg = f"init_tasks must be nonnegative, got {self.init_tasks}"
            raise ValueError(msg)

    @property
    def effective_init_tasks(self) -> int:
        if self.init_tasks is not None:
            return self.init_tasks
        if self.rank_mode == "fixed":
            return 0
        return self.environment.dim if POLICIES[self.policy].learns_subspace else 0

    def snapshot(self) -> dict[str, Any]:
        """JSON-serializable view of every field."""
        return {
            "environment": self.environment.describe(),
            "policy": self.policy,
            "policy_config": asdict(self.policy_config),
            "num_tasks": self.num_tasks,
            "rounds_per_task": self.rounds_per_task,
            "seeds": list(self.seeds),
            "rank_mode": self.rank_mode,
            "fixed_rank": self.fixed_rank,
            "init_tasks": self.effective_init_tasks,
        }


def config_hash(snapshot: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a config snapshot."""
    canonical = json.dumps(snapshot, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RegretLog:
    """Instantaneous regret of one policy, indexed by (seed, task, round)."""

    policy: str
    seeds: tuple[int, ...]
    inst_regret: NDArray[np.float64]
    """``S x T x n`` array."""
    config_hash: str = ""
    failed_seeds: tuple[int, ...] = field(default_factory=tuple)
    """seeds that raised and are not part of the log."""

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.inst_regret = np.asarray(self.inst_regret, dtype=np.float64)
        if self.inst_regret.ndim != 3 or self.inst_regret.shape[0] != len(self.seeds):
            msg = (
                f"regret array of shape {self.inst_regret.shape} "
                f"does not match {len(self.seeds)} seeds"
            )
            raise ValueError(msg)

    @property
    def cum_regret(self) -> NDArray[np.float64]:
        """Cumulative regret within each task."""
        return np.cumsum(self.inst_regret, axis=2)

    @property
    def num_tasks(self) -> int:
        return self.inst_regret.shape[1]

    @property
    def rounds_per_task(self) -> int:
        return self.inst_regret.shape[2]

    def total_regret(self) -> NDArray[np.float64]:
        """Total regret over all tasks, per seed."""
        return self.inst_regret.sum(axis=(1, 2))


def _spawn_rngs(seed: int) -> list[np.random.Generator]:
    # tasks, rounds, policy, held-out draws
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


def _simulate(
    cfg: ExperimentConfig, seed: int, heldout_draws: int = 0
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Run all tasks of one seed.

    Returns the ``T x n`` regret array and, if ``heldout_draws > 0``, the relative
    W error of the projection pair prepared for the next task after every task.
    """
    task_rng, round_rng, policy_rng, heldout_rng = _spawn_rngs(seed)
    env = cfg.environment
    policy = make_policy(cfg.policy, cfg.policy_config)
    model = SubspaceModel(
        env.dim, rank_override=cfg.fixed_rank if cfg.rank_mode == "fixed" else None
    )
    init_tasks = cfg.effective_init_tasks
    n = cfg.rounds_per_task

    tasks = env.tasks(cfg.num_tasks, task_rng)
    regret = np.zeros((len(tasks), n))
    w_error = np.full(len(tasks), np.nan)

    for t, task in enumerate(tasks):
        pair = policy.task_projection(
            model, init_phase=t < init_tasks, truth=env.true_projection(task)
        )
        check_projection_pair(pair)
        state = policy.begin_task(pair)

        for k in range(n):
            rnd = env.next_round(task, round_rng)
            check_arm_set(rnd.arms, env.dim)
            a = policy.select(state, pair, rnd.arms, policy_rng)
            reward = rnd.reward(a, round_rng)
            regret[t, k] = rnd.regret(a)
            state = update_state(state, rnd.arms.contexts[a], reward)

        model = ccipca_update(model, ridge_estimate(state))

        if heldout_draws > 0:
            w_error[t] = _relative_w_error(cfg, policy, model, t + 1, heldout_draws, heldout_rng)

    return regret, w_error


def _relative_w_error(cfg, policy, model, next_task, draws, rng) -> float:
    env = cfg.environment
    pair = policy.task_projection(
        model,
        init_phase=next_task < cfg.effective_init_tasks,
        truth=env.true_projection(None),
    )
    theta_bar = np.zeros(env.dim) if policy.needs_truth else model.running_mean
    w = [
        projection_error_metric(pair, env.gen_task(rng).theta_star, theta_bar)
        for _ in range(draws)
    ]
    return abs(float(np.mean(w)) ** 2 / env.spec.task_variance - 1.0)


def _run_seed(
    cfg: ExperimentConfig, seed: int, heldout_draws: int = 0
) -> tuple[int, tuple | None, str | None]:
    log.info("%s: starting seed %d", cfg.policy, seed)
    try:
        result = _simulate(cfg, seed, heldout_draws)
    except Exception as e:
        log.warning("%s: seed %d failed: %s: %s", cfg.policy, seed, type(e).__name__, e)
        return seed, None, f"{type(e).__name__}: {e}"
    log.info(
        "%s: seed %d done, total regret %.3f", cfg.policy, seed, float(result[0].sum())
    )
    return seed, result, None


def _run_all(cfg: ExperimentConfig, workers: int, heldout_draws: int = 0):
    if workers > 1 and len(cfg.seeds) > 1:
        # fork is unsafe once BLAS threads are running
        with ProcessPoolExecutor(
            max_workers=min(workers, len(cfg.seeds)), mp_context=mp.get_context("spawn")
        ) as pool:
            results = list(
                pool.map(
                    _run_seed,
                    [cfg] * len(cfg.seeds),
                    cfg.seeds,
                    [heldout_draws] * len(cfg.seeds),
                )
            )
    else:
        results = [_run_seed(cfg, seed, heldout_draws) for seed in cfg.seeds]

    done = [(seed, res) for seed, res, _ in results if res is not None]
    failed = tuple(seed for seed, res, _ in results if res is None)
    if not done:
        msg = f"all {len(cfg.seeds)} seeds of policy {cfg.policy} failed"
        raise RuntimeError(msg)
    return done, failed


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> RegretLog:
    """Run the meta-learning loop for every seed of ``cfg``.

    A seed that raises is logged and left out of the log (see
    :attr:`RegretLog.failed_seeds`); a :class:`RuntimeError` is raised only if every
    seed fails.

    Parameters
    ----------
    workers
        number of processes. Seeds are merged in their configured order, so the log
        does not depend on this value.
    """
    log.info(
        "running %s on %s: %d tasks x %d rounds, %d seeds",
        cfg.policy,
        cfg.environment.name,
        cfg.num_tasks,
        cfg.rounds_per_task,
        len(cfg.seeds),
    )
    done, failed = _run_all(cfg, workers)
    return RegretLog(
        policy=cfg.policy,
        seeds=tuple(seed for seed, _ in done),
        inst_regret=np.stack([res[0] for _, res in done]),
        config_hash=config_hash(cfg.snapshot()),
        failed_seeds=failed,
    )


def _stderr(x: NDArray, axis: int) -> NDArray:
    n = x.shape[axis]
    if n < 2:
        return np.zeros(np.delete(x.shape, axis))
    return np.std(x, axis=axis, ddof=1) / math.sqrt(n)


def expected_transfer_regret(regret_log: RegretLog) -> pd.DataFrame:
    """Mean cumulative regret after each round, over all (seed, task) pairs.

    Returns a table with columns ``policy, round, mean_cum_regret, stderr``.
    """
    cum = regret_log.cum_regret.reshape(-1, regret_log.rounds_per_task)
    df = pd.DataFrame(
        {
            "policy": regret_log.policy,
            "round": np.arange(1, regret_log.rounds_per_task + 1),
            "mean_cum_regret": cum.mean(axis=0),
            "stderr": _stderr(cum, axis=0),
        }
    )
    df.attrs["n_seeds"] = len(regret_log.seeds)
    return df


def cumulative_regret_over_tasks(regret_log: RegretLog) -> pd.DataFrame:
    """Running sum over tasks of the per-task total regret, averaged over seeds.

    Returns a table with columns ``policy, task, mean_cum_regret, stderr``.
    """
    per_seed = np.cumsum(regret_log.inst_regret.sum(axis=2), axis=1)
    df = pd.DataFrame(
        {
            "policy": regret_log.policy,
            "task": np.arange(1, regret_log.num_tasks + 1),
            "mean_cum_regret": per_seed.mean(axis=0),
            "stderr": _stderr(per_seed, axis=0),
        }
    )
    df.attrs["n_seeds"] = len(regret_log.seeds)
    return df


def rank_sweep(
    cfg: ExperimentConfig, q_values, workers: int = 1
) -> pd.DataFrame:
    """Total regret as a function of ``q = rank(P_perp)``.

    Every ``q > 0`` runs ``cfg`` with the fixed rank ``p = d - q``. ``q = 0`` leaves no
    orthogonal directions to bias, it runs classic LinUCB (linear TS if ``cfg.policy``
    is ``p-ts``) instead.

    Returns a table with columns ``q, p, mean_total_regret, stderr, n_seeds``.
    """
    d = cfg.environment.dim
    rows = []
    for q in q_values:
        q = int(q)
        if not 0 <= q <= d - 1:
            msg = f"q = {q} outside of [0, {d - 1}]"
            raise RankOutOfRangeError(msg)
        if q == 0:
            point = replace(
                cfg,
                policy="ts" if cfg.policy == "p-ts" else "linucb",
                rank_mode="auto",
                fixed_rank=None,
            )
        else:
            point = replace(cfg, rank_mode="fixed", fixed_rank=d - q)

        totals = run_experiment(point, workers=workers).total_regret()
        rows.append(
            {
                "q": q,
                "p": d - q,
                "mean_total_regret": float(totals.mean()),
                "stderr": float(_stderr(totals, axis=0)),
                "n_seeds": totals.size,
            }
        )
        log.info("q = %d: total regret %.3f", q, rows[-1]["mean_total_regret"])

    return pd.DataFrame(rows, columns=["q", "p", "mean_total_regret", "stderr", "n_seeds"])


def w_error_curve(
    cfg: ExperimentConfig,
    heldout_draws: int = DEFAULT_HELDOUT_DRAWS,
    workers: int = 1,
) -> pd.DataFrame:
    """Relative error ``|E[W]^2 / Var_rho - 1|`` of the projection after every task.

    After task ``t`` the pair the policy would use for task ``t + 1`` is evaluated
    against ``heldout_draws`` fresh task parameters. Only available on synthetic
    environments with ``Var_rho > 0``.

    Returns a table with columns ``policy, task, mean_rel_error, stderr, init_phase``.
    """
    env = cfg.environment
    if not isinstance(env, SyntheticEnvironment):
        msg = "the W error needs a synthetic environment"
        raise ValueError(msg)
    if env.spec.task_variance <= 0:
        msg = "the W error is relative to Var_rho, which must be positive"
        raise ValueError(msg)
    if heldout_draws < 1:
        msg = f"need at least one held-out draw, got {heldout_draws}"
        raise ValueError(msg)

    done, _ = _run_all(cfg, workers, heldout_draws)
    errors = np.stack([res[1] for _, res in done])
    tasks = np.arange(1, errors.shape[1] + 1)
    df = pd.DataFrame(
        {
            "policy": cfg.policy,
            "task": tasks,
            "mean_rel_error": errors.mean(axis=0),
            "stderr": _stderr(errors, axis=0),
            "init_phase": tasks < cfg.effective_init_tasks,
        }
    )
    df.attrs["n_seeds"] = len(done)
    return df
