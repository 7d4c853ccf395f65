from __future__ import annotations

# note: the MovieLens environment and the command line interface are not loaded
# here. see lazy loading below.
from . import environments, linalg, policies, runner, subspace
from ._version import version as __version__
from .checkpoint import read_subspace_model, write_subspace_model
from .environments import SyntheticEnvironment, SyntheticSpec
from .policies import PolicyConfig, make_policy
from .runner import ExperimentConfig, RegretLog, run_experiment
from .subspace import ProjectionPair, SubspaceModel, ccipca_update

__all__ = [
    "ExperimentConfig",
    "PolicyConfig",
    "ProjectionPair",
    "RegretLog",
    "SubspaceModel",
    "SyntheticEnvironment",
    "SyntheticSpec",
    "__version__",
    "ccipca_update",
    "checks",  # lazy import!
    "cli",  # lazy import!
    "config",  # lazy import!
    "environments",
    "linalg",
    "make_policy",
    "output",  # lazy import!
    "policies",
    "read_subspace_model",
    "run_experiment",
    "runner",
    "subspace",
    "write_subspace_model",
]


# inspired by PEP 562.
def __getattr__(name: str):
    if name in __all__:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    msg = f"module {__name__!r} has no attribute {name!r}"
    raise AttributeError(msg)
