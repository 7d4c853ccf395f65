"""CSV and manifest output of experiment runs.

All CSV files are UTF-8 with LF line endings, a header row and floats written with
17 significant digits, so that parsing them back reproduces every value exactly.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .exceptions import ParseError
from .runner import (
    RegretLog,
    config_hash,
    cumulative_regret_over_tasks,
    expected_transfer_regret,
)

log = logging.getLogger(__name__)

REGRET_COLUMNS = ["policy", "seed", "task", "round", "inst_regret", "cum_regret"]
SUMMARY_COLUMNS = ["policy", "round", "mean_cum_regret", "stderr"]
TASKS_COLUMNS = ["policy", "task", "mean_cum_regret", "stderr"]
SWEEP_COLUMNS = ["q", "p", "mean_total_regret", "stderr", "n_seeds"]
W_ERROR_COLUMNS = ["policy", "task", "mean_rel_error", "stderr", "init_phase"]

FLOAT_FORMAT = "%.17g"


def write_table(df: pd.DataFrame, path: str | os.PathLike, columns: list[str]) -> Path:
    """Write ``df`` restricted to ``columns`` (in that order) as CSV."""
    path = Path(path)
    try:
        df.reindex(columns=columns).to_csv(
            path,
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
            encoding="utf-8",
        )
    except OSError as e:
        msg = f"could not write {path}: {e}"
        raise OSError(msg) from e
    log.info("wrote %s", path)
    return path


def _as_list(logs: RegretLog | Sequence[RegretLog]) -> list[RegretLog]:
    return [logs] if isinstance(logs, RegretLog) else list(logs)


def regret_table(regret_log: RegretLog) -> pd.DataFrame:
    """Long table with one row per (seed, task, round)."""
    _, t, n = regret_log.inst_regret.shape
    seed, task, rnd = np.meshgrid(
        np.asarray(regret_log.seeds), np.arange(1, t + 1), np.arange(1, n + 1), indexing="ij"
    )
    return pd.DataFrame(
        {
            "policy": regret_log.policy,
            "seed": seed.ravel(),
            "task": task.ravel(),
            "round": rnd.ravel(),
            "inst_regret": regret_log.inst_regret.ravel(),
            "cum_regret": regret_log.cum_regret.ravel(),
        },
        columns=REGRET_COLUMNS,
    )


def _concat(frames: list[pd.DataFrame], columns: list[str]) -> pd.DataFrame:
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)


def summary_paths(path: str | os.PathLike) -> tuple[Path, Path]:
    """Per-round and per-task summary files written next to a raw regret file."""
    path = Path(path)
    return (
        path.with_name(f"{path.stem}_summary.csv"),
        path.with_name(f"{path.stem}_tasks.csv"),
    )


def write_regret_csv(
    logs: RegretLog | Sequence[RegretLog], path: str | os.PathLike
) -> list[Path]:
    """Write the raw regret of one or more policies and their summaries.

    Next to ``path`` the per-round curve (``<stem>_summary.csv``, columns
    ``policy,round,mean_cum_regret,stderr``) and the per-task curve
    (``<stem>_tasks.csv``) are written. An empty list of logs gives header-only files.

    Returns the written paths.
    """
    logs = _as_list(logs)
    summary, tasks = summary_paths(path)
    return [
        write_table(
            _concat([regret_table(lg) for lg in logs], REGRET_COLUMNS),
            path,
            REGRET_COLUMNS,
        ),
        write_table(
            _concat([expected_transfer_regret(lg) for lg in logs], SUMMARY_COLUMNS),
            summary,
            SUMMARY_COLUMNS,
        ),
        write_table(
            _concat([cumulative_regret_over_tasks(lg) for lg in logs], TASKS_COLUMNS),
            tasks,
            TASKS_COLUMNS,
        ),
    ]


def read_regret_csv(path: str | os.PathLike) -> list[RegretLog]:
    """Parse a raw regret file back into one :class:`~.runner.RegretLog` per policy.

    Raises
    ------
    ParseError
        if columns are missing or the (seed, task, round) grid of a policy is incomplete.
    """
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip", encoding="utf-8")
    if list(df.columns) != REGRET_COLUMNS:
        msg = f"expected columns {REGRET_COLUMNS}, got {list(df.columns)}"
        raise ParseError(msg, str(path), 1)

    logs = []
    for policy in df["policy"].unique():
        sub = df[df["policy"] == policy]
        seeds = sub["seed"].unique()
        n_tasks = int(sub["task"].max())
        n_rounds = int(sub["round"].max())
        if len(sub) != len(seeds) * n_tasks * n_rounds:
            msg = f"incomplete regret grid for policy {policy!r}"
            raise ParseError(msg, str(path))

        regret = np.full((len(seeds), n_tasks, n_rounds), np.nan)
        seed_index = {s: i for i, s in enumerate(seeds)}
        regret[
            sub["seed"].map(seed_index).to_numpy(),
            sub["task"].to_numpy() - 1,
            sub["round"].to_numpy() - 1,
        ] = sub["inst_regret"].to_numpy()
        if np.isnan(regret).any():
            msg = f"duplicate or missing rows for policy {policy!r}"
            raise ParseError(msg, str(path))

        logs.append(RegretLog(policy=str(policy), seeds=tuple(seeds), inst_regret=regret))
    return logs


@dataclass
class RunManifest:
    """Provenance of the files written by one command."""

    config: dict[str, Any]
    """snapshot of every hyperparameter of the run."""
    seeds: list[int]
    started: str
    """ISO 8601 start time (UTC)."""
    wall_clock: float = 0.0
    """seconds from start to :meth:`finish`."""
    outputs: list[str] = field(default_factory=list)
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = config_hash(self.config)

    @classmethod
    def start(cls, config: dict[str, Any], seeds: Sequence[int]) -> RunManifest:
        return cls(
            config=config,
            seeds=[int(s) for s in seeds],
            started=datetime.now(timezone.utc).isoformat(),
        )

    def finish(self, outputs: Sequence[str | os.PathLike]) -> None:
        started = datetime.fromisoformat(self.started)
        self.wall_clock = (datetime.now(timezone.utc) - started).total_seconds()
        self.outputs = [str(p) for p in outputs]

    def write(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as f:
            json.dump(asdict(self), f, sort_keys=True, indent=2, default=str)
            f.write("\n")
        log.info("wrote %s", path)
        return path

    @classmethod
    def read(cls, path: str | os.PathLike) -> RunManifest:
        with Path(path).open(encoding="utf-8") as f:
            return cls(**json.load(f))
