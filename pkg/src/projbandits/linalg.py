"""Numerical contracts on symmetric positive-definite matrices.

Every consumer in this package goes through these helpers, no matrix is ever
inverted explicitly. Matrices are symmetrized as ``(M + M^T)/2`` before the
Cholesky factorization.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .exceptions import DimensionMismatchError, NotPositiveDefiniteError

SYMMETRY_RTOL = 1e-10


def symmetrize(m: ArrayLike) -> NDArray[np.float64]:
    """Return ``(M + M^T)/2`` as a float array."""
    m = np.asarray(m, dtype=np.float64)
    return 0.5 * (m + m.T)


def spd_factor(m: ArrayLike) -> NDArray[np.float64]:
    """Lower Cholesky factor ``L`` with ``M = L L^T``.

    Raises
    ------
    DimensionMismatchError
        if ``m`` is not a square matrix.
    ValueError
        if ``m`` is asymmetric beyond a relative tolerance of ``1e-10``.
    NotPositiveDefiniteError
        if the factorization fails.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        msg = f"expected a square matrix, got shape {m.shape}"
        raise DimensionMismatchError(msg)

    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_RTOL * scale:
        msg = "matrix is not symmetric"
        raise ValueError(msg)

    try:
        return linalg.cholesky(symmetrize(m), lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        msg = f"matrix of dimension {m.shape[0]} is not positive-definite ({e})"
        raise NotPositiveDefiniteError(msg) from e


def spd_solve(m: ArrayLike, rhs: ArrayLike) -> NDArray[np.float64]:
    """Solve ``M x = rhs`` for a symmetric positive-definite ``M``."""
    rhs = np.asarray(rhs, dtype=np.float64)
    factor = spd_factor(m)
    if rhs.shape[0] != factor.shape[0]:
        msg = f"right-hand side of length {rhs.shape[0]} for a {factor.shape[0]}-dim matrix"
        raise DimensionMismatchError(msg)
    return linalg.cho_solve((factor, True), rhs)


def spd_logdet(m: ArrayLike) -> float:
    """``log det M`` via the Cholesky diagonal."""
    factor = spd_factor(m)
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def weighted_norms(m: ArrayLike, vectors: ArrayLike) -> NDArray[np.float64]:
    """Inverse-weighted norms ``sqrt(x^T M^-1 x)`` for every row ``x`` of ``vectors``."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    factor = spd_factor(m)
    if vectors.shape[1] != factor.shape[0]:
        msg = f"vectors of dimension {vectors.shape[1]} for a {factor.shape[0]}-dim matrix"
        raise DimensionMismatchError(msg)
    z = linalg.solve_triangular(factor, vectors.T, lower=True)
    return np.sqrt(np.sum(z * z, axis=0))


def mvn_sample(
    mean: ArrayLike,
    cov: ArrayLike,
    rng: np.random.Generator,
    size: int | None = None,
) -> NDArray[np.float64]:
    """Draw from ``N(mean, cov)``.

    Parameters
    ----------
    mean
        d-dimensional mean vector.
    cov
        symmetric positive-definite covariance.
    rng
        seeded generator, the only source of randomness.
    size
        number of draws. ``None`` returns a single d-vector, otherwise an array of
        shape ``(size, d)``.
    """
    mean = np.asarray(mean, dtype=np.float64)
    factor = spd_factor(cov)
    n = 1 if size is None else size
    z = rng.standard_normal((factor.shape[0], n))
    draws = mean[:, None] + factor @ z
    return draws[:, 0] if size is None else draws.T


def mvn_sample_precision(
    mean: ArrayLike,
    precision: ArrayLike,
    rng: np.random.Generator,
    scale: float = 1.0,
    size: int | None = None,
) -> NDArray[np.float64]:
    """Draw from ``N(mean, scale^2 * precision^-1)`` without forming the inverse.

    With ``precision = L L^T``, ``L^-T z`` has covariance ``precision^-1``.
    """
    mean = np.asarray(mean, dtype=np.float64)
    factor = spd_factor(precision)
    n = 1 if size is None else size
    z = rng.standard_normal((factor.shape[0], n))
    y = linalg.solve_triangular(factor, z, lower=True, trans="T")
    draws = mean[:, None] + scale * y
    return draws[:, 0] if size is None else draws.T
