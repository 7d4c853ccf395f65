"""Per-task state of the projection-biased estimator and its transitions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..exceptions import DimensionMismatchError
from ..linalg import spd_logdet, spd_solve
from ..subspace import ProjectionPair

ARM_NORM_ATOL = 1e-12


@dataclass(frozen=True)
class PolicyConfig:
    """Hyperparameters shared by all policies.

    The theory sets ``lambda1 = 1/sqrt(Y)`` with ``Y`` a variance term that cannot be
    computed online, so ``lambda1`` is the main tunable. Keep ``lambda1 >> lambda2``.
    """

    lambda1: float
    """regularization toward the task mean along ``P_perp``."""
    lambda2: float
    """regularization toward zero along ``P``, also the cold-start ridge."""
    lambda_ridge: float
    """ridge parameter of the plain estimator ``A_k``."""
    delta: float
    """confidence level, in ``(0, 1)``."""
    v_bound: float = 1.0
    """bound ``V`` on the task parameter norm."""
    w_bound: float | None = None
    """surrogate for the unobservable ``W``, capped at (and defaulting to) ``2V``."""
    alpha: float = 0.5
    """Thompson sampling parameter, in ``(0, 1)``."""
    horizon: int = 250
    """rounds per task ``n``."""
    ts_scale: float | None = None
    """force the posterior scale ``v`` (``0`` turns TS greedy)."""

    def __post_init__(self):
        if not self.lambda1 >= self.lambda2 > 0:
            msg = f"need lambda1 >= lambda2 > 0, got {self.lambda1}, {self.lambda2}"
            raise ValueError(msg)
        if self.lambda_ridge <= 0:
            msg = f"lambda_ridge must be positive, got {self.lambda_ridge}"
            raise ValueError(msg)
        for name in ("delta", "alpha"):
            if not 0 < getattr(self, name) < 1:
                msg = f"{name} must lie in (0, 1), got {getattr(self, name)}"
                raise ValueError(msg)
        if self.v_bound <= 0:
            msg = f"v_bound must be positive, got {self.v_bound}"
            raise ValueError(msg)
        if self.w_bound is not None and self.w_bound < 0:
            msg = f"w_bound must be nonnegative, got {self.w_bound}"
            raise ValueError(msg)
        if self.horizon < 1:
            msg = f"horizon must be at least 1, got {self.horizon}"
            raise ValueError(msg)
        if self.ts_scale is not None and self.ts_scale < 0:
            msg = f"ts_scale must be nonnegative, got {self.ts_scale}"
            raise ValueError(msg)

    @classmethod
    def from_horizon(
        cls, horizon: int, dim: int, v_bound: float = 1.0, **overrides
    ) -> PolicyConfig:
        """Defaults for ``n`` rounds per task in ``d`` dimensions.

        ``lambda2 = 1/V^2``, ``lambda = 1/(n V^2)``, ``delta = 1/n``,
        ``lambda1 = 10 d lambda2`` and ``alpha = 1/log(n)`` clamped to ``(0, 0.999]``
        (``0.5`` for ``n <= 3``). Keyword arguments that are not ``None`` override the
        defaults.
        """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        lambda2 = overrides.get("lambda2", 1.0 / v_bound**2)
        params = {
            "lambda1": 10.0 * lambda2 * dim,
            "lambda2": lambda2,
            "lambda_ridge": 1.0 / (horizon * v_bound**2),
            "delta": 1.0 / horizon if horizon >= 2 else 0.5,
            "v_bound": v_bound,
            "alpha": min(1.0 / math.log(horizon), 0.999) if horizon > 3 else 0.5,
            "horizon": horizon,
        }
        params.update(overrides)
        return cls(**params)

    @property
    def w_surrogate(self) -> float:
        cap = 2.0 * self.v_bound
        return cap if self.w_bound is None else min(self.w_bound, cap)


@dataclass(frozen=True)
class ArmSet:
    """Candidate contexts of one round."""

    contexts: NDArray[np.float64]
    """``K x d`` matrix, one row per arm."""
    ids: NDArray
    """``K`` arm identifiers (e.g. movie ids)."""

    def __post_init__(self):
        contexts = np.atleast_2d(np.asarray(self.contexts, dtype=np.float64))
        ids = np.asarray(self.ids)
        object.__setattr__(self, "contexts", contexts)
        object.__setattr__(self, "ids", ids)
        if contexts.shape[0] < 1:
            msg = "an arm set needs at least one arm"
            raise ValueError(msg)
        if ids.shape != (contexts.shape[0],):
            msg = f"{ids.size} ids for {contexts.shape[0]} contexts"
            raise DimensionMismatchError(msg)

    def __len__(self) -> int:
        return self.contexts.shape[0]

    @property
    def dim(self) -> int:
        return self.contexts.shape[1]


def check_arm_set(arms: ArmSet, dim: int) -> None:
    """Check that every context has dimension ``dim`` and norm at most ``1``.

    Raises a :class:`RuntimeError` naming the violated property.
    """
    if arms.dim != dim:
        msg = f"arm contexts have dimension {arms.dim}, expected {dim}"
        raise RuntimeError(msg)
    norms = np.linalg.norm(arms.contexts, axis=1)
    if np.any(norms > 1 + ARM_NORM_ATOL):
        msg = f"context norms must not exceed 1, got max {norms.max()}"
        raise RuntimeError(msg)


@dataclass(frozen=True)
class ProjectedPolicyState:
    """Biased pair ``(B_k, b_k)`` with its estimate, plus the plain ridge pair ``(A_k, b'_k)``."""

    b_matrix: NDArray[np.float64]
    b_vector: NDArray[np.float64]
    theta_hat: NDArray[np.float64]
    a_matrix: NDArray[np.float64]
    b_prime: NDArray[np.float64]
    round: int = 0

    @property
    def dim(self) -> int:
        return self.b_vector.shape[0]


def init_projected_state(pair: ProjectionPair, cfg: PolicyConfig) -> ProjectedPolicyState:
    """``B_0 = lambda1 P_perp + lambda2 P``, ``b_0 = lambda1 P_perp w``, ``A_0 = lambda I``."""
    d = pair.dim
    b_matrix = cfg.lambda1 * pair.p_perp + cfg.lambda2 * pair.p_hat
    b_vector = cfg.lambda1 * (pair.p_perp @ pair.bias_w)
    return ProjectedPolicyState(
        b_matrix=b_matrix,
        b_vector=b_vector,
        theta_hat=spd_solve(b_matrix, b_vector),
        a_matrix=cfg.lambda_ridge * np.eye(d),
        b_prime=np.zeros(d),
        round=0,
    )


def update_state(
    s: ProjectedPolicyState, x: ArrayLike, r: float
) -> ProjectedPolicyState:
    """Add the observation ``(x, r)`` to both estimators and re-derive ``theta_hat``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (s.dim,):
        msg = f"context of shape {x.shape} for a {s.dim}-dim state"
        raise DimensionMismatchError(msg)

    xx = np.outer(x, x)
    b_matrix = s.b_matrix + xx
    b_vector = s.b_vector + r * x
    return ProjectedPolicyState(
        b_matrix=b_matrix,
        b_vector=b_vector,
        theta_hat=spd_solve(b_matrix, b_vector),
        a_matrix=s.a_matrix + xx,
        b_prime=s.b_prime + r * x,
        round=s.round + 1,
    )


def ridge_estimate(s: ProjectedPolicyState) -> NDArray[np.float64]:
    """Plain ridge estimate ``A_k^-1 b'_k``, the task summary fed to the subspace model."""
    return spd_solve(s.a_matrix, s.b_prime)


def radius_from_logdet(
    logdet: float,
    p: int,
    q: int,
    lambda1: float,
    lambda2: float,
    delta: float,
    v_bound: float,
    w: float,
) -> float:
    """Confidence radius given ``log det B_k``.

    .. math::

        \\gamma_k = \\sqrt{\\log\\det B_k - q\\log\\lambda_1 - p\\log\\lambda_2
        + \\log(1/\\delta^2)} + \\sqrt{\\lambda_2} V
        + \\frac{\\lambda_1}{\\sqrt{\\lambda_{\\min}(B_0)}} W

    The ``V`` term only exists for ``p > 0`` and the ``W`` term only for ``q > 0``;
    ``lambda_min(B_0)`` is ``lambda1`` when ``p = 0``.
    """
    arg = logdet - q * math.log(lambda1) - p * math.log(lambda2) + 2.0 * math.log(1.0 / delta)
    gamma = math.sqrt(max(arg, 0.0))
    if p > 0:
        gamma += math.sqrt(lambda2) * v_bound
    if q > 0:
        lambda_min = min(lambda1, lambda2) if p > 0 else lambda1
        gamma += lambda1 / math.sqrt(lambda_min) * w
    return gamma


def confidence_radius(
    s: ProjectedPolicyState, cfg: PolicyConfig, p: int, q: int
) -> float:
    """Radius ``gamma_k`` of the confidence ellipsoid around ``theta_hat`` in the ``B_k`` norm."""
    return radius_from_logdet(
        spd_logdet(s.b_matrix),
        p,
        q,
        cfg.lambda1,
        cfg.lambda2,
        cfg.delta,
        cfg.v_bound,
        cfg.w_surrogate,
    )
