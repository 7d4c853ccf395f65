"""Run settings from defaults, configuration files and command line flags.

A configuration file is a YAML or JSON mapping whose keys are the long command line
flag names with ``_`` instead of ``-``. The ``hyperparameters`` and ``environment``
keys may hold nested mappings (or paths to further files) with more of the same keys:

.. code-block:: yaml

    tasks: 400
    rounds: 250
    policy: p-linucb,linucb
    seeds: [0, 1, 2]
    hyperparameters:
      lambda1: 300
    environment: env.yaml
"""

from __future__ import annotations

import logging
import os
from collections.abc import Iterable, Mapping
from typing import Any

from dbetto import AttrsDict, utils

from .environments.synthetic import SyntheticSpec
from .policies import PolicyConfig

log = logging.getLogger(__name__)

SECTIONS = ("hyperparameters", "environment")

DEFAULTS: dict[str, Any] = {
    # experiment
    "tasks": 100,
    "rounds": 250,
    "policy": "p-linucb",
    "seeds": [0],
    "rank_mode": "auto",
    "fixed_rank": None,
    "init_tasks": None,
    "q_values": None,
    "heldout_draws": 200,
    "workers": 1,
    "out": "results",
    # hyperparameters, None means derived from the horizon
    "lambda1": None,
    "lambda2": None,
    "lambda_ridge": None,
    "delta": None,
    "alpha": None,
    "v_bound": 1.0,
    "w_bound": None,
    "ts_scale": None,
    # environment
    "d": 30,
    "p_true": 15,
    "var_rho": 1e-3,
    "arms": 25,
    "noise_std": 0.1,
    "context_cov_seed": 0,
    "subspace_seed": 1,
    "data_path": None,
    "group": None,
}

DATA_PATH_ENV = "MOVIELENS_PATH"


def load_section(config: Mapping, section: str) -> AttrsDict:
    """The ``section`` mapping of ``config``, read from a file if given as a path."""
    value = config.get(section)
    if value is None:
        return AttrsDict()
    if isinstance(value, str | os.PathLike):
        value = utils.load_dict(str(value))
    if not isinstance(value, Mapping):
        msg = f"section {section!r} must be a mapping or a file path, got {value!r}"
        raise ValueError(msg)
    return AttrsDict(dict(value))


def flatten_config(config: Mapping) -> AttrsDict:
    """Merge the nested sections into the top level and reject unknown keys."""
    flat = {k: v for k, v in config.items() if k not in SECTIONS}
    for section in SECTIONS:
        flat.update(load_section(config, section))

    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        msg = f"unknown configuration keys {unknown}"
        raise ValueError(msg)
    return AttrsDict(flat)


def load_config(path: str | os.PathLike) -> AttrsDict:
    """Load and flatten a YAML/JSON configuration file."""
    log.info("loading configuration from %s", path)
    config = utils.load_dict(str(path))
    if not isinstance(config, dict):
        msg = f"configuration file {path} does not contain a mapping"
        raise ValueError(msg)
    return flatten_config(config)


def parse_seeds(value: str | int | Iterable[int]) -> list[int]:
    """Seeds from a comma list (``0,1,2``), a range (``0:10``) or a sequence of ints."""
    if isinstance(value, int):
        return [value]
    if not isinstance(value, str):
        return [int(s) for s in value]

    seeds = []
    for raw in value.split(","):
        part = raw.strip()
        if not part:
            continue
        if ":" in part:
            start, _, stop = part.partition(":")
            seeds += list(range(int(start), int(stop)))
        else:
            seeds.append(int(part))
    if not seeds:
        msg = f"no seeds in {value!r}"
        raise ValueError(msg)
    return seeds


def parse_int_list(value: str | Iterable[int] | None) -> list[int] | None:
    """Like :func:`parse_seeds`, but ``None`` passes through."""
    return None if value is None else parse_seeds(value)


def resolve_settings(
    flags: Mapping[str, Any],
    config_file: str | os.PathLike | None = None,
    environ: Mapping[str, str] | None = None,
) -> AttrsDict:
    """Combine the settings with precedence flags > configuration file > defaults.

    Flags set to ``None`` are ignored. ``data_path`` falls back to the
    ``MOVIELENS_PATH`` environment variable.
    """
    settings = dict(DEFAULTS)
    if config_file is not None:
        settings.update(load_config(config_file))
    settings.update({k: v for k, v in flags.items() if k in DEFAULTS and v is not None})

    environ = os.environ if environ is None else environ
    if settings["data_path"] is None and environ.get(DATA_PATH_ENV):
        settings["data_path"] = environ[DATA_PATH_ENV]

    settings["seeds"] = parse_seeds(settings["seeds"])
    settings["q_values"] = parse_int_list(settings["q_values"])
    return AttrsDict(settings)


def policy_config(settings: Mapping[str, Any], dim: int) -> PolicyConfig:
    """:class:`~.policies.PolicyConfig` with the horizon defaults, overridden by ``settings``."""
    return PolicyConfig.from_horizon(
        int(settings["rounds"]),
        dim,
        v_bound=float(settings["v_bound"]),
        lambda1=settings["lambda1"],
        lambda2=settings["lambda2"],
        lambda_ridge=settings["lambda_ridge"],
        delta=settings["delta"],
        alpha=settings["alpha"],
        w_bound=settings["w_bound"],
        ts_scale=settings["ts_scale"],
    )


def synthetic_spec(settings: Mapping[str, Any]) -> SyntheticSpec:
    return SyntheticSpec(
        dim=int(settings["d"]),
        true_rank=int(settings["p_true"]),
        task_variance=float(settings["var_rho"]),
        param_scale=float(settings["v_bound"]),
        arms_per_round=int(settings["arms"]),
        noise_std=float(settings["noise_std"]),
        context_cov_seed=int(settings["context_cov_seed"]),
        subspace_seed=int(settings["subspace_seed"]),
    )
