"""Arm selection routines and the policies built on them.

Every policy keeps a :class:`~.base.ProjectedPolicyState` per task. The baselines only
read its plain ridge pair ``(A_k, b'_k)``; the projected ones read ``(B_k, theta_hat)``.
Selection routines return the position of the chosen arm in the
:class:`~.base.ArmSet`, ties go to the lowest position.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import replace
from typing import ClassVar

import numpy as np
from numpy.typing import NDArray

from ..linalg import mvn_sample_precision, spd_logdet, spd_solve, weighted_norms
from ..subspace import (
    ProjectionPair,
    SubspaceModel,
    full_rank_pair,
    mean_biased_pair,
    model_projections,
)
from .base import (
    ArmSet,
    PolicyConfig,
    ProjectedPolicyState,
    confidence_radius,
    init_projected_state,
    radius_from_logdet,
)

log = logging.getLogger(__name__)

BOFUL_LAMBDA2_FLOOR = 1e-6


def _ucb_argmax(
    theta: NDArray, matrix: NDArray, arms: ArmSet, gamma: float
) -> int:
    scores = arms.contexts @ theta + gamma * weighted_norms(matrix, arms.contexts)
    return int(np.argmax(scores))


def _sample_argmax(
    theta: NDArray,
    matrix: NDArray,
    arms: ArmSet,
    scale: float,
    rng: np.random.Generator,
) -> int:
    theta_tilde = mvn_sample_precision(theta, matrix, rng, scale=scale)
    return int(np.argmax(arms.contexts @ theta_tilde))


def ts_scale(cfg: PolicyConfig, dim: int) -> float:
    """Posterior scale ``v = 4 sqrt(log(1/delta) (d + 2) / alpha)``."""
    if cfg.ts_scale is not None:
        return cfg.ts_scale
    return 4.0 * math.sqrt(math.log(1.0 / cfg.delta) * (dim + 2) / cfg.alpha)


def ucb_select(s: ProjectedPolicyState, arms: ArmSet, gamma: float) -> int:
    """``argmax_a x_a^T theta_hat + gamma ||x_a||_{B^-1}``."""
    return _ucb_argmax(s.theta_hat, s.b_matrix, arms, gamma)


def ts_select(
    s: ProjectedPolicyState,
    arms: ArmSet,
    cfg: PolicyConfig,
    rng: np.random.Generator,
) -> int:
    """Greedy arm under ``theta_tilde ~ N(theta_hat, v^2 B^-1)``."""
    return _sample_argmax(s.theta_hat, s.b_matrix, arms, ts_scale(cfg, s.dim), rng)


def classic_linucb_select(
    a_matrix: NDArray, b_prime: NDArray, arms: ArmSet, cfg: PolicyConfig
) -> int:
    """Plain LinUCB on the ridge pair.

    The radius is the ``p = d, q = 0`` case of :func:`~.base.radius_from_logdet` with
    ``lambda1 = lambda2 = lambda``.
    """
    d = a_matrix.shape[0]
    gamma = radius_from_logdet(
        spd_logdet(a_matrix),
        d,
        0,
        cfg.lambda_ridge,
        cfg.lambda_ridge,
        cfg.delta,
        cfg.v_bound,
        cfg.w_surrogate,
    )
    return _ucb_argmax(spd_solve(a_matrix, b_prime), a_matrix, arms, gamma)


def classic_ts_select(
    a_matrix: NDArray,
    b_prime: NDArray,
    arms: ArmSet,
    cfg: PolicyConfig,
    rng: np.random.Generator,
) -> int:
    """Linear Thompson sampling on the ridge pair."""
    d = a_matrix.shape[0]
    return _sample_argmax(
        spd_solve(a_matrix, b_prime), a_matrix, arms, ts_scale(cfg, d), rng
    )


def biased_oful_policy(
    s: ProjectedPolicyState, arms: ArmSet, cfg: PolicyConfig
) -> int:
    """UCB on the mean-biased pair (``P_perp = I``): every direction is shrunk to the mean."""
    return ucb_select(s, arms, confidence_radius(s, cfg, 0, s.dim))


def oracle_policy(
    s: ProjectedPolicyState,
    pair: ProjectionPair,
    arms: ArmSet,
    cfg: PolicyConfig,
    rng: np.random.Generator,
    selector: str = "ucb",
) -> int:
    """Projected LinUCB or TS on the environment's true projection and mean."""
    if selector == "ts":
        return ts_select(s, arms, cfg, rng)
    return ucb_select(s, arms, confidence_radius(s, cfg, pair.rank_p, pair.rank_q))


class BasePolicy(ABC):
    """A policy picks the per-task projection and selects arms from the state."""

    kind: ClassVar[str]
    learns_subspace: ClassVar[bool] = False
    needs_truth: ClassVar[bool] = False

    def __init__(self, config: PolicyConfig):
        self.config = config

    def task_projection(
        self,
        model: SubspaceModel,
        *,
        init_phase: bool,
        truth: ProjectionPair | None = None,
    ) -> ProjectionPair:
        """Projection pair used during the next task."""
        del init_phase, truth
        return full_rank_pair(model.dim)

    def begin_task(self, pair: ProjectionPair) -> ProjectedPolicyState:
        return init_projected_state(pair, self.config)

    @abstractmethod
    def select(
        self,
        state: ProjectedPolicyState,
        pair: ProjectionPair,
        arms: ArmSet,
        rng: np.random.Generator,
    ) -> int:
        """Position of the chosen arm in ``arms``."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.kind!r})"


class _LearnedProjection(BasePolicy):
    learns_subspace = True

    def task_projection(self, model, *, init_phase, truth=None):
        del truth
        if init_phase:
            return full_rank_pair(model.dim)
        pair = model_projections(model)
        log.debug(
            "task %d: projection rank p=%d q=%d", model.count + 1, pair.rank_p, pair.rank_q
        )
        return pair


class ProjectedLinUCB(_LearnedProjection):
    kind = "p-linucb"

    def select(self, state, pair, arms, rng):
        del rng
        gamma = confidence_radius(state, self.config, pair.rank_p, pair.rank_q)
        return ucb_select(state, arms, gamma)


class ProjectedTS(_LearnedProjection):
    kind = "p-ts"

    def select(self, state, pair, arms, rng):
        del pair
        return ts_select(state, arms, self.config, rng)


class LinUCB(BasePolicy):
    kind = "linucb"

    def select(self, state, pair, arms, rng):
        del pair, rng
        return classic_linucb_select(state.a_matrix, state.b_prime, arms, self.config)


class LinearTS(BasePolicy):
    kind = "ts"

    def select(self, state, pair, arms, rng):
        del pair
        return classic_ts_select(state.a_matrix, state.b_prime, arms, self.config, rng)


class BiasedOFUL(BasePolicy):
    """Mean-biased OFUL: the projected policy with ``P_perp = I`` forced.

    ``lambda2`` is replaced by a floor of ``1e-6 lambda1``.
    """

    kind = "b-oful"

    def __init__(self, config: PolicyConfig):
        super().__init__(
            replace(config, lambda2=BOFUL_LAMBDA2_FLOOR * config.lambda1)
        )

    def task_projection(self, model, *, init_phase, truth=None):
        del init_phase, truth
        return mean_biased_pair(model.running_mean)

    def select(self, state, pair, arms, rng):
        del pair, rng
        return biased_oful_policy(state, arms, self.config)


class OracleUCB(BasePolicy):
    kind = "oracle-ucb"
    needs_truth = True
    selector = "ucb"

    def task_projection(self, model, *, init_phase, truth=None):
        del model, init_phase
        if truth is None:
            msg = f"policy {self.kind} needs the true projection of the environment"
            raise ValueError(msg)
        return truth

    def select(self, state, pair, arms, rng):
        return oracle_policy(state, pair, arms, self.config, rng, self.selector)


class OracleTS(OracleUCB):
    kind = "oracle-ts"
    selector = "ts"


POLICIES: dict[str, type[BasePolicy]] = {
    cls.kind: cls
    for cls in (
        ProjectedLinUCB,
        ProjectedTS,
        LinUCB,
        LinearTS,
        BiasedOFUL,
        OracleUCB,
        OracleTS,
    )
}


def make_policy(kind: str, config: PolicyConfig) -> BasePolicy:
    """Instantiate the policy registered under ``kind``."""
    try:
        cls = POLICIES[kind]
    except KeyError:
        msg = f"unknown policy {kind!r}, choose from {sorted(POLICIES)}"
        raise ValueError(msg) from None
    return cls(config)
