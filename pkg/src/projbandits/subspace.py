"""Online estimation of the task subspace with CCIPCA and construction of projections.

The model absorbs one (ridge) task estimate per finished task. It keeps the running
task mean and ``d`` scaled components ``v_j = sigma_j u_j``; the projection pair used by
the biased policies is derived from it at task boundaries.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import DegenerateSpectrumError, DimensionMismatchError, RankOutOfRangeError

log = logging.getLogger(__name__)

DEGENERATE_SPECTRUM_ATOL = 1e-12
PROJECTION_ATOL = 1e-6
BOOTSTRAP_RTOL = 1e-12


@dataclass
class SubspaceModel:
    """Running CCIPCA state."""

    dim: int
    """dimension ``d`` of the task parameters."""

    count: int = 0
    """number of absorbed task estimates ``t``."""

    running_mean: NDArray[np.float64] | None = None
    """arithmetic mean of all absorbed estimates."""

    scaled_components: NDArray[np.float64] | None = None
    """``d x d`` array, row ``j`` holds ``v_j``. Rows keep their update order."""

    rank_override: int | None = None
    """fixed rank ``p`` that bypasses the eigengap selection."""

    def __post_init__(self):
        if self.dim < 1:
            msg = f"dimension must be positive, got {self.dim}"
            raise ValueError(msg)
        if self.running_mean is None:
            self.running_mean = np.zeros(self.dim)
        if self.scaled_components is None:
            self.scaled_components = np.zeros((self.dim, self.dim))
        self.running_mean = np.asarray(self.running_mean, dtype=np.float64)
        self.scaled_components = np.asarray(self.scaled_components, dtype=np.float64)
        if self.running_mean.shape != (self.dim,) or self.scaled_components.shape != (
            self.dim,
            self.dim,
        ):
            msg = f"model arrays do not match dimension {self.dim}"
            raise DimensionMismatchError(msg)
        if self.rank_override is not None and not 1 <= self.rank_override <= self.dim:
            msg = f"rank override {self.rank_override} outside of [1, {self.dim}]"
            raise RankOutOfRangeError(msg)

    @property
    def eigenvalue_estimates(self) -> NDArray[np.float64]:
        """``sigma_j = ||v_j||`` in the maintained order."""
        return np.linalg.norm(self.scaled_components, axis=1)

    @property
    def unit_components(self) -> NDArray[np.float64]:
        """``u_j = v_j / ||v_j||``; zero rows stay zero."""
        norms = self.eigenvalue_estimates
        out = np.zeros_like(self.scaled_components)
        nz = norms > 0
        out[nz] = self.scaled_components[nz] / norms[nz, None]
        return out


@dataclass
class ProjectionPair:
    """Complementary projections onto the learned subspace and its orthogonal complement."""

    p_hat: NDArray[np.float64]
    p_perp: NDArray[np.float64]
    rank_p: int
    rank_q: int
    bias_w: NDArray[np.float64] = field(repr=False)
    """``w = P_perp theta_bar``, the point the orthogonal directions are pulled to."""

    @property
    def dim(self) -> int:
        return self.p_hat.shape[0]


def ccipca_update(model: SubspaceModel, theta_new: ArrayLike) -> SubspaceModel:
    """Absorb one task estimate and return the updated model.

    The running mean is updated first, the freshly centered residual then drives the
    component updates. For each ``j`` in order, the residual is deflated by the already
    updated directions ``u_1 .. u_{j-1}`` and

    .. math::

        v_{j,i+1} = \\frac{i}{i+1} v_{j,i} + \\frac{1}{i+1} z z^T \\frac{v_{j,i}}{\\|v_{j,i}\\|}

    with ``i`` the number of previously absorbed estimates. A zero component is
    initialized with the residual that reaches it.
    """
    theta = np.asarray(theta_new, dtype=np.float64)
    if theta.shape != (model.dim,):
        msg = f"task estimate of shape {theta.shape} for a {model.dim}-dim model"
        raise DimensionMismatchError(msg)

    i = model.count
    mean = model.running_mean + (theta - model.running_mean) / (i + 1)
    z = theta - mean

    # residuals below this are deflation round-off, they must not seed a component
    floor = BOOTSTRAP_RTOL * (1.0 + np.linalg.norm(theta))

    components = model.scaled_components.copy()
    for j in range(model.dim):
        v = components[j]
        norm = np.linalg.norm(v)
        if norm > 0:
            v = (i / (i + 1)) * v + (1 / (i + 1)) * z * (z @ v) / norm
        elif np.linalg.norm(z) > floor:
            v = z.copy()
        components[j] = v

        new_norm = np.linalg.norm(v)
        if new_norm > 0:
            u = v / new_norm
            z = z - (z @ u) * u

    return SubspaceModel(
        dim=model.dim,
        count=i + 1,
        running_mean=mean,
        scaled_components=components,
        rank_override=model.rank_override,
    )


def select_rank(
    eigenvalue_estimates: ArrayLike, rank_override: int | None = None
) -> int:
    """Choose the rank ``p`` that maximizes the eigengap ``sigma_p - sigma_{p+1}``.

    The estimates are sorted internally. Ties go to the smallest ``p``, and
    ``p`` is restricted to ``1 .. d-1``.

    Raises
    ------
    DegenerateSpectrumError
        if all estimates are equal within ``1e-12`` (the caller should fall back to
        ``p = d``).
    """
    sigma = np.sort(np.asarray(eigenvalue_estimates, dtype=np.float64))[::-1]
    if sigma.size == 0:
        msg = "empty eigenvalue list"
        raise ValueError(msg)
    if rank_override is not None:
        if not 1 <= rank_override <= sigma.size:
            msg = f"rank override {rank_override} outside of [1, {sigma.size}]"
            raise RankOutOfRangeError(msg)
        return rank_override

    if sigma.size < 2 or sigma[0] - sigma[-1] <= DEGENERATE_SPECTRUM_ATOL:
        msg = "no positive eigengap in the spectrum estimate"
        raise DegenerateSpectrumError(msg)

    gaps = sigma[:-1] - sigma[1:]
    return int(np.argmax(gaps)) + 1


def _pair(p_hat: NDArray, theta_bar: ArrayLike, rank_p: int) -> ProjectionPair:
    d = p_hat.shape[0]
    p_perp = np.eye(d) - p_hat
    return ProjectionPair(
        p_hat=p_hat,
        p_perp=p_perp,
        rank_p=rank_p,
        rank_q=d - rank_p,
        bias_w=p_perp @ np.asarray(theta_bar, dtype=np.float64),
    )


def build_projections(model: SubspaceModel, p: int) -> ProjectionPair:
    """Projection on the ``p`` components with the largest ``sigma_j``.

    The selected directions are re-orthonormalized (QR, i.e. Gram-Schmidt) so the
    emitted pair is exactly idempotent; ``w = P_perp theta_bar``.
    """
    if not 1 <= p <= model.dim:
        msg = f"rank {p} outside of [1, {model.dim}]"
        raise RankOutOfRangeError(msg)

    if p == model.dim:
        return full_rank_pair(model.dim)

    sigma = model.eigenvalue_estimates
    selected = np.argsort(-sigma, kind="stable")[:p]
    if np.any(sigma[selected] <= 0):
        msg = f"only {np.count_nonzero(sigma > 0)} nonzero components available for rank {p}"
        raise DegenerateSpectrumError(msg)

    u = model.unit_components[selected]
    overlap = np.abs(u @ u.T - np.eye(p)).max()
    # learned components are only expected to be near-orthogonal after 2d tasks
    if overlap > 0.9 and model.count >= 2 * model.dim:
        warnings.warn(
            f"selected components are far from orthogonal (max overlap {overlap:.3f})",
            RuntimeWarning,
            stacklevel=2,
        )

    q_basis, _ = np.linalg.qr(u.T)
    return pair_from_basis(q_basis, model.running_mean)


def pair_from_basis(basis: ArrayLike, theta_bar: ArrayLike) -> ProjectionPair:
    """Pair built from an orthonormal ``d x p`` basis and a mean vector."""
    basis = np.asarray(basis, dtype=np.float64)
    p_hat = basis @ basis.T
    p_hat = 0.5 * (p_hat + p_hat.T)
    return _pair(p_hat, theta_bar, basis.shape[1])


def full_rank_pair(dim: int) -> ProjectionPair:
    """``P = I``, ``P_perp = 0``, ``w = 0``: no meta-knowledge."""
    return _pair(np.eye(dim), np.zeros(dim), dim)


def mean_biased_pair(theta_bar: ArrayLike) -> ProjectionPair:
    """``P = 0``, ``P_perp = I``: shrink every direction toward ``theta_bar``."""
    theta_bar = np.asarray(theta_bar, dtype=np.float64)
    return _pair(np.zeros((theta_bar.size, theta_bar.size)), theta_bar, 0)


def projection_error_metric(
    pair: ProjectionPair, theta_star: ArrayLike, theta_bar: ArrayLike
) -> float:
    """``W = ||P_perp (theta_star - theta_bar)||``."""
    diff = np.asarray(theta_star, dtype=np.float64) - np.asarray(theta_bar, dtype=np.float64)
    if diff.shape != (pair.dim,):
        msg = f"vectors of shape {diff.shape} for a {pair.dim}-dim projection"
        raise DimensionMismatchError(msg)
    return float(np.linalg.norm(pair.p_perp @ diff))


def check_projection_pair(pair: ProjectionPair, atol: float = PROJECTION_ATOL) -> None:
    """Check that the pair is a complementary couple of orthogonal projections.

    Raises a :class:`RuntimeError` naming the first violated property: symmetry,
    idempotency, complementarity and ``trace(P) = p``.
    """
    d = pair.dim
    p = pair.p_hat
    if pair.rank_p + pair.rank_q != d:
        msg = f"ranks {pair.rank_p} + {pair.rank_q} do not sum to {d}"
        raise RuntimeError(msg)
    if not np.allclose(p, p.T, rtol=0, atol=atol):
        msg = "projection is not symmetric"
        raise RuntimeError(msg)
    if not np.allclose(p @ p, p, rtol=0, atol=atol):
        msg = "projection is not idempotent"
        raise RuntimeError(msg)
    if not np.allclose(p + pair.p_perp, np.eye(d), rtol=0, atol=atol):
        msg = "projections are not complementary"
        raise RuntimeError(msg)
    if abs(np.trace(p) - pair.rank_p) > atol:
        msg = f"trace {np.trace(p):.6f} differs from rank {pair.rank_p}"
        raise RuntimeError(msg)


def model_projections(model: SubspaceModel) -> ProjectionPair:
    """Projection pair for the model's current state, using the eigengap rank.

    Falls back to :func:`full_rank_pair` when the spectrum is degenerate or too few
    components are populated.
    """
    try:
        p = select_rank(model.eigenvalue_estimates, model.rank_override)
        return build_projections(model, p)
    except DegenerateSpectrumError as e:
        log.debug("falling back to the full-rank pair after %d tasks: %s", model.count, e)
        return full_rank_pair(model.dim)
