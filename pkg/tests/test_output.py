from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from projbandits.exceptions import ParseError
from projbandits.output import (
    REGRET_COLUMNS,
    SWEEP_COLUMNS,
    RunManifest,
    read_regret_csv,
    regret_table,
    summary_paths,
    write_regret_csv,
    write_table,
)
from projbandits.runner import RegretLog


@pytest.fixture
def logs():
    rng = np.random.default_rng(0)
    return [
        RegretLog(policy="p-linucb", seeds=(0, 5), inst_regret=rng.uniform(size=(2, 3, 4))),
        RegretLog(policy="linucb", seeds=(0, 5), inst_regret=rng.uniform(size=(2, 3, 4)) / 3),
    ]


def test_regret_table(logs):
    df = regret_table(logs[0])
    assert list(df.columns) == REGRET_COLUMNS
    assert len(df) == 24
    first = df.iloc[0]
    assert (first["seed"], first["task"], first["round"]) == (0, 1, 1)
    last = df.iloc[-1]
    assert (last["seed"], last["task"], last["round"]) == (5, 3, 4)
    assert last["cum_regret"] == pytest.approx(logs[0].inst_regret[1, 2].sum())


def test_write_and_read(tmp_path, logs):
    path = tmp_path / "regret.csv"
    written = write_regret_csv(logs, path)
    assert written == [path, *summary_paths(path)]
    assert summary_paths(path)[0].name == "regret_summary.csv"

    raw = path.read_bytes()
    assert b"\r\n" not in raw
    assert raw.startswith(b"policy,seed,task,round,inst_regret,cum_regret\n")

    back = read_regret_csv(path)
    assert [lg.policy for lg in back] == ["p-linucb", "linucb"]
    for a, b in zip(back, logs, strict=True):
        assert a.seeds == b.seeds
        # 17 significant digits reproduce every float exactly
        assert np.array_equal(a.inst_regret, b.inst_regret)

    summary = pd.read_csv(summary_paths(path)[0])
    assert list(summary.columns) == ["policy", "round", "mean_cum_regret", "stderr"]
    assert len(summary) == 8
    tasks = pd.read_csv(summary_paths(path)[1])
    assert list(tasks.columns) == ["policy", "task", "mean_cum_regret", "stderr"]
    assert len(tasks) == 6


def test_single_log_and_empty(tmp_path, logs):
    write_regret_csv(logs[0], tmp_path / "one.csv")
    assert len(read_regret_csv(tmp_path / "one.csv")) == 1

    write_regret_csv([], tmp_path / "empty.csv")
    text = (tmp_path / "empty.csv").read_text(encoding="utf-8")
    assert text == ",".join(REGRET_COLUMNS) + "\n"
    assert read_regret_csv(tmp_path / "empty.csv") == []


def test_read_errors(tmp_path, logs):
    path = tmp_path / "bad.csv"
    path.write_text("policy,seed,task\nlinucb,0,1\n", encoding="utf-8")
    with pytest.raises(ParseError, match="expected columns"):
        read_regret_csv(path)

    write_regret_csv(logs[0], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(ParseError, match="incomplete"):
        read_regret_csv(path)


def test_write_table_column_order(tmp_path):
    df = pd.DataFrame({"p": [3], "q": [1], "stderr": [0.5], "mean_total_regret": [2.0], "n_seeds": [4]})
    path = write_table(df, tmp_path / "sweep.csv", SWEEP_COLUMNS)
    assert path.read_text(encoding="utf-8").splitlines() == [
        "q,p,mean_total_regret,stderr,n_seeds",
        "1,3,2,0.5,4",
    ]


def test_manifest(tmp_path):
    manifest = RunManifest.start({"command": "synth", "runs": []}, [0, 1])
    assert len(manifest.config_hash) == 64
    manifest.finish([tmp_path / "regret.csv"])
    assert manifest.wall_clock >= 0
    path = manifest.write(tmp_path / "manifest.json")

    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["seeds"] == [0, 1]
    assert data["outputs"] == [str(tmp_path / "regret.csv")]
    assert RunManifest.read(path) == manifest
