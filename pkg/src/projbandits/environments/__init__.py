"""Subpackage with the bandit environments.

The MovieLens environment needs :mod:`pandas` and is only imported on first access.
"""

from __future__ import annotations

from .base import BanditRound, BaseEnvironment
from .synthetic import (
    SyntheticEnvironment,
    SyntheticRound,
    SyntheticSpec,
    SyntheticTask,
    gen_task,
    random_orthogonal,
    sample_contexts,
    synthetic_reward,
)

__all__ = [
    "BanditRound",
    "BaseEnvironment",
    "SyntheticEnvironment",
    "SyntheticRound",
    "SyntheticSpec",
    "SyntheticTask",
    "gen_task",
    "movielens",  # lazy import!
    "random_orthogonal",
    "sample_contexts",
    "synthetic_reward",
]


def __getattr__(name: str):
    if name in __all__:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    msg = f"module {__name__!r} has no attribute {name!r}"
    raise AttributeError(msg)
