from __future__ import annotations

import numpy as np
import pytest

from projbandits.checkpoint import read_subspace_model, write_subspace_model
from projbandits.exceptions import ParseError
from projbandits.subspace import SubspaceModel, ccipca_update


@pytest.fixture
def model():
    rng = np.random.default_rng(0)
    m = SubspaceModel(4, rank_override=2)
    for _ in range(10):
        m = ccipca_update(m, rng.standard_normal(4) / 3)
    return m


def assert_same_model(a, b):
    assert a.dim == b.dim
    assert a.count == b.count
    assert a.rank_override == b.rank_override
    assert np.array_equal(a.running_mean, b.running_mean)
    assert np.array_equal(a.scaled_components, b.scaled_components)


def test_text_round_trip(tmp_path, model):
    path = tmp_path / "model.txt"
    write_subspace_model(model, path)
    assert_same_model(read_subspace_model(path), model)

    text = path.read_text(encoding="utf-8")
    assert text.startswith("# projbandits subspace model")
    assert text.count("\ncomponent ") == 4


def test_text_round_trip_no_override(tmp_path):
    model = SubspaceModel(2)
    write_subspace_model(model, tmp_path / "empty.txt")
    back = read_subspace_model(tmp_path / "empty.txt")
    assert back.rank_override is None
    assert_same_model(back, model)


def test_lh5_round_trip(tmp_path, model):
    path = tmp_path / "model.lh5"
    write_subspace_model(model, path)
    assert_same_model(read_subspace_model(path), model)

    # overwriting is allowed
    write_subspace_model(SubspaceModel(4), path)
    assert read_subspace_model(path).count == 0


def test_text_parse_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("dim 2\ncount two\n", encoding="utf-8")
    with pytest.raises(ParseError, match=r"bad.txt:2: invalid value") as exc:
        read_subspace_model(path)
    assert exc.value.line == 2

    path.write_text("dim 2\nfoo 1\n", encoding="utf-8")
    with pytest.raises(ParseError, match="unknown key 'foo'"):
        read_subspace_model(path)

    path.write_text("dim 2\ncount 0\n", encoding="utf-8")
    with pytest.raises(ParseError, match="missing keys"):
        read_subspace_model(path)
