"""Synthetic task population with a low-rank affine structure.

Task parameters live close to a ``p``-dimensional subspace through the origin: a draw
uniform on the ``V``-ball is projected onto the subspace and Gaussian noise of total
variance ``Var_rho`` is added in the orthogonal directions. Contexts are zero-mean
Gaussian with a diagonal covariance fixed per experiment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..policies.base import ArmSet
from ..subspace import ProjectionPair, pair_from_basis
from .base import BanditRound, BaseEnvironment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic population. Defaults follow the ``d = 30, p = 15`` setup."""

    dim: int = 30
    true_rank: int = 15
    task_variance: float = 1e-3
    """``Var_rho``, expected squared norm of the orthogonal component."""
    param_scale: float = 1.0
    """bound ``V`` on ``||theta*||``."""
    arms_per_round: int = 25
    noise_std: float = 0.1
    context_cov_seed: int = 0
    subspace_seed: int = 1

    def __post_init__(self):
        if self.dim < 1:
            msg = f"dimension must be positive, got {self.dim}"
            raise ValueError(msg)
        if not 1 <= self.true_rank <= self.dim:
            msg = f"true rank {self.true_rank} outside of [1, {self.dim}]"
            raise ValueError(msg)
        if self.task_variance < 0 or self.noise_std < 0:
            msg = "task_variance and noise_std must be nonnegative"
            raise ValueError(msg)
        if self.param_scale <= 0:
            msg = f"param_scale must be positive, got {self.param_scale}"
            raise ValueError(msg)
        if self.arms_per_round < 1:
            msg = f"need at least one arm per round, got {self.arms_per_round}"
            raise ValueError(msg)


@dataclass(frozen=True)
class SyntheticTask:
    theta_star: NDArray[np.float64]
    true_projection: ProjectionPair


def random_orthogonal(d: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Haar-distributed ``d x d`` orthogonal matrix.

    QR decomposition of a standard Gaussian matrix, with the columns of ``Q`` flipped
    so that ``R`` has a positive diagonal.
    """
    if d < 1:
        msg = f"dimension must be positive, got {d}"
        raise ValueError(msg)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1
    return q * sign[np.newaxis, :]


def uniform_ball(d: int, radius: float, rng: np.random.Generator) -> NDArray[np.float64]:
    """A point uniform in the ``d``-ball of the given radius."""
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    return radius * rng.uniform() ** (1.0 / d) * direction


def true_subspace(spec: SyntheticSpec) -> ProjectionPair:
    """Projection on the first ``p`` columns of the experiment's random rotation, ``mu = 0``."""
    q = random_orthogonal(spec.dim, np.random.default_rng(spec.subspace_seed))
    return pair_from_basis(q[:, : spec.true_rank], np.zeros(spec.dim))


def context_variances(spec: SyntheticSpec) -> NDArray[np.float64]:
    """Diagonal of the context covariance, ``c_i ~ U(0, 1)``."""
    return np.random.default_rng(spec.context_cov_seed).uniform(0.0, 1.0, spec.dim)


def gen_task(
    spec: SyntheticSpec,
    rng: np.random.Generator,
    projection: ProjectionPair | None = None,
) -> SyntheticTask:
    """Draw one task parameter ``theta* = P theta_raw + P_perp g``.

    ``theta_raw`` is uniform on the ``V``-ball and ``g ~ N(0, Var_rho / q I)``. The result
    is rescaled onto the ball if its norm exceeds ``V``.

    Parameters
    ----------
    projection
        the true subspace, computed from ``spec.subspace_seed`` if omitted.
    """
    if projection is None:
        projection = true_subspace(spec)

    theta = projection.p_hat @ uniform_ball(spec.dim, spec.param_scale, rng)
    q = spec.dim - spec.true_rank
    if q > 0:
        g = rng.normal(0.0, math.sqrt(spec.task_variance / q), size=spec.dim)
        theta = theta + projection.p_perp @ g

    norm = np.linalg.norm(theta)
    if norm > spec.param_scale:
        theta *= spec.param_scale / norm
    return SyntheticTask(theta_star=theta, true_projection=projection)


def sample_contexts(
    spec: SyntheticSpec,
    rng: np.random.Generator,
    variances: ArrayLike | None = None,
    normalize: bool = True,
) -> ArmSet:
    """``K`` contexts from ``N(0, diag(c))``; rows of norm above one are scaled to unit norm.

    Set ``normalize=False`` to get the raw Gaussian draws.
    """
    if variances is None:
        variances = context_variances(spec)
    scale = np.sqrt(np.asarray(variances, dtype=np.float64))
    x = rng.standard_normal((spec.arms_per_round, spec.dim)) * scale
    if normalize:
        norms = np.linalg.norm(x, axis=1)
        big = norms > 1
        x[big] /= norms[big, None]
    return ArmSet(contexts=x, ids=np.arange(spec.arms_per_round))


def synthetic_reward(
    task: SyntheticTask,
    x: ArrayLike,
    arms: ArmSet,
    rng: np.random.Generator,
    noise_std: float,
) -> tuple[float, float]:
    """Reward ``x^T theta* + eps`` and regret against the best arm of ``arms``."""
    x = np.asarray(x, dtype=np.float64)
    mean = float(x @ task.theta_star)
    best = float((arms.contexts @ task.theta_star).max())
    reward = mean + noise_std * float(rng.standard_normal()) if noise_std > 0 else mean
    return reward, best - mean


@dataclass(frozen=True)
class SyntheticRound(BanditRound):
    """Round whose observed rewards are drawn by :func:`synthetic_reward`."""

    task: SyntheticTask | None = None

    def reward(self, index: int, rng: np.random.Generator) -> float:
        x = self.arms.contexts[index]
        return synthetic_reward(self.task, x, self.arms, rng, self.noise_std)[0]


class SyntheticEnvironment(BaseEnvironment):
    """Environment built from a :class:`SyntheticSpec`.

    The subspace and the context covariance are generated once, from the seeds it
    carries; task and round randomness comes from the generators passed in.
    """

    name = "synthetic"
    has_truth = True

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.projection = true_subspace(spec)
        self.variances = context_variances(spec)
        log.debug(
            "synthetic environment d=%d p=%d Var=%g", spec.dim, spec.true_rank, spec.task_variance
        )

    @property
    def dim(self) -> int:
        return self.spec.dim

    def gen_task(self, rng: np.random.Generator) -> SyntheticTask:
        return gen_task(self.spec, rng, self.projection)

    def tasks(self, num_tasks, rng):
        return [self.gen_task(rng) for _ in range(num_tasks)]

    def next_round(self, task: SyntheticTask, rng):
        arms = sample_contexts(self.spec, rng, self.variances)
        return SyntheticRound(
            arms=arms,
            mean_rewards=arms.contexts @ task.theta_star,
            noise_std=self.spec.noise_std,
            task=task,
        )

    def true_projection(self, task=None):
        del task
        return self.projection

    def describe(self):
        return {"name": self.name, **asdict(self.spec)}
