from __future__ import annotations

import numpy as np
import pytest

from projbandits.exceptions import DimensionMismatchError, NotPositiveDefiniteError
from projbandits.linalg import (
    mvn_sample,
    mvn_sample_precision,
    spd_factor,
    spd_logdet,
    spd_solve,
    weighted_norms,
)


def random_spd(d, rng):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


def test_spd_solve_simple():
    assert np.array_equal(spd_solve(np.eye(3), [1, 2, 3]), [1, 2, 3])
    assert np.allclose(spd_solve(np.diag([2.0, 4.0]), [2, 4]), [1, 1])


def test_spd_solve_random():
    rng = np.random.default_rng(1)
    m = random_spd(5, rng)
    rhs = rng.standard_normal(5)
    assert np.allclose(spd_solve(m, rhs), np.linalg.solve(m, rhs), atol=1e-8, rtol=0)


def test_spd_errors():
    with pytest.raises(NotPositiveDefiniteError):
        spd_solve(np.diag([1.0, -1.0]), [1, 1])

    # NotPositiveDefiniteError is a LinAlgError
    with pytest.raises(np.linalg.LinAlgError):
        spd_factor(np.zeros((2, 2)))

    with pytest.raises(DimensionMismatchError):
        spd_factor(np.ones((2, 3)))

    with pytest.raises(DimensionMismatchError, match="right-hand side"):
        spd_solve(np.eye(2), [1, 2, 3])

    with pytest.raises(ValueError, match="not symmetric"):
        spd_factor([[1.0, 0.5], [0.0, 1.0]])


def test_spd_factor_tolerates_roundoff():
    m = np.array([[2.0, 1.0], [1.0 + 1e-14, 2.0]])
    factor = spd_factor(m)
    assert np.allclose(factor @ factor.T, m)


def test_spd_logdet():
    assert spd_logdet(np.eye(4)) == 0
    assert spd_logdet(2 * np.eye(3)) == pytest.approx(3 * np.log(2))

    m = random_spd(6, np.random.default_rng(2))
    assert spd_logdet(m) == pytest.approx(np.sum(np.log(np.linalg.eigvalsh(m))), abs=1e-8)


def test_weighted_norms():
    m = np.diag([1.0, 100.0])
    assert np.allclose(weighted_norms(m, np.eye(2)), [1.0, 0.1])

    rng = np.random.default_rng(3)
    m = random_spd(4, rng)
    x = rng.standard_normal((6, 4))
    expected = np.sqrt(np.einsum("ij,jk,ik->i", x, np.linalg.inv(m), x))
    assert np.allclose(weighted_norms(m, x), expected)

    with pytest.raises(DimensionMismatchError):
        weighted_norms(m, np.ones((2, 3)))


def test_mvn_sample_degenerate_and_deterministic():
    mean = np.array([1.0, -2.0, 0.5])
    draw = mvn_sample(mean, 1e-30 * np.eye(3), np.random.default_rng(0))
    assert draw.shape == (3,)
    assert np.allclose(draw, mean, atol=1e-12)

    cov = random_spd(3, np.random.default_rng(4))
    a = mvn_sample(mean, cov, np.random.default_rng(42))
    b = mvn_sample(mean, cov, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_mvn_sample_moments():
    draws = mvn_sample(np.zeros(2), np.eye(2), np.random.default_rng(5), size=100_000)
    assert draws.shape == (100_000, 2)
    assert np.abs(draws.mean(axis=0)).max() < 0.02
    assert np.linalg.norm(np.cov(draws, rowvar=False) - np.eye(2)) < 0.05


def test_mvn_sample_precision_covariance():
    rng = np.random.default_rng(6)
    precision = random_spd(3, rng)
    scale = 2.0
    draws = mvn_sample_precision(np.zeros(3), precision, rng, scale=scale, size=100_000)
    expected = scale**2 * np.linalg.inv(precision)
    rel = np.linalg.norm(np.cov(draws, rowvar=False) - expected) / np.linalg.norm(expected)
    assert rel < 0.05

    single = mvn_sample_precision(np.ones(3), precision, rng, scale=0.0)
    assert np.array_equal(single, np.ones(3))
