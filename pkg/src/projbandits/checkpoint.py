"""Checkpointing of :class:`~.subspace.SubspaceModel` instances.

Two formats are available, picked by file suffix:

* ``.lh5``: binary, a :class:`lgdo.types.Struct` written with :mod:`lgdo.lh5`.
* anything else: plain text, floats written with 17 significant digits.

.. note::
    see :doc:`../formats` for a reference of both layouts.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

from .exceptions import ParseError
from .subspace import SubspaceModel

log = logging.getLogger(__name__)

LH5_GROUP = "subspace_model"
TEXT_HEADER = "# projbandits subspace model v1"


def _fmt(values) -> str:
    return " ".join(f"{float(x):.17g}" for x in values)


def write_subspace_model(model: SubspaceModel, path: str | os.PathLike) -> None:
    """Write ``model`` to ``path`` (text, or LH5 if the suffix is ``.lh5``)."""
    path = Path(path)
    log.info("writing subspace model (%d tasks) to %s", model.count, path)
    if path.suffix == ".lh5":
        _write_lh5(model, path)
        return

    lines = [
        TEXT_HEADER,
        f"dim {model.dim}",
        f"count {model.count}",
        f"rank_override {-1 if model.rank_override is None else model.rank_override}",
        f"mean {_fmt(model.running_mean)}",
    ]
    lines += [f"component {_fmt(v)}" for v in model.scaled_components]

    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def read_subspace_model(path: str | os.PathLike) -> SubspaceModel:
    """Read a model previously written with :func:`write_subspace_model`."""
    path = Path(path)
    if path.suffix == ".lh5":
        return _read_lh5(path)

    fields = {}
    components = []
    with path.open(encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key not in ("component", "mean", "dim", "count", "rank_override"):
                msg = f"unknown key {key!r}"
                raise ParseError(msg, str(path), lineno)
            try:
                if key == "component":
                    components.append([float(x) for x in rest.split()])
                elif key == "mean":
                    fields[key] = [float(x) for x in rest.split()]
                else:
                    fields[key] = int(rest)
            except ValueError as e:
                msg = f"invalid value for {key!r}: {e}"
                raise ParseError(msg, str(path), lineno) from e

    missing = {"dim", "count", "rank_override", "mean"} - set(fields)
    if missing:
        msg = f"missing keys {sorted(missing)}"
        raise ParseError(msg, str(path))

    rank = fields["rank_override"]
    return SubspaceModel(
        dim=fields["dim"],
        count=fields["count"],
        running_mean=np.array(fields["mean"]),
        scaled_components=np.array(components).reshape(len(components), -1),
        rank_override=None if rank < 0 else rank,
    )


def _write_lh5(model: SubspaceModel, path: Path) -> None:
    from lgdo import Array, Scalar, Struct, lh5

    obj = Struct(
        {
            "dim": Scalar(model.dim),
            "count": Scalar(model.count),
            "rank_override": Scalar(
                -1 if model.rank_override is None else model.rank_override
            ),
            "running_mean": Array(model.running_mean),
            "scaled_components": Array(model.scaled_components),
        }
    )
    lh5.write(obj, LH5_GROUP, str(path), wo_mode="of")


def _read_lh5(path: Path) -> SubspaceModel:
    from lgdo import lh5

    obj = lh5.read(LH5_GROUP, str(path))
    rank = int(obj["rank_override"].value)
    return SubspaceModel(
        dim=int(obj["dim"].value),
        count=int(obj["count"].value),
        running_mean=np.asarray(obj["running_mean"].nda, dtype=np.float64),
        scaled_components=np.asarray(obj["scaled_components"].nda, dtype=np.float64),
        rank_override=None if rank < 0 else rank,
    )
