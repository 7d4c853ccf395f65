"""Subpackage with the arm selection policies.

The projected policies bias the per-task estimate toward the learned affine subspace;
the baselines (LinUCB, linear TS, mean-biased OFUL, oracle) share the same state.
"""

from __future__ import annotations

from .base import (
    ArmSet,
    PolicyConfig,
    ProjectedPolicyState,
    check_arm_set,
    confidence_radius,
    init_projected_state,
    radius_from_logdet,
    ridge_estimate,
    update_state,
)
from .linear import (
    POLICIES,
    BasePolicy,
    biased_oful_policy,
    classic_linucb_select,
    classic_ts_select,
    make_policy,
    oracle_policy,
    ts_scale,
    ts_select,
    ucb_select,
)

__all__ = [
    "POLICIES",
    "ArmSet",
    "BasePolicy",
    "PolicyConfig",
    "ProjectedPolicyState",
    "biased_oful_policy",
    "check_arm_set",
    "classic_linucb_select",
    "classic_ts_select",
    "confidence_radius",
    "init_projected_state",
    "make_policy",
    "oracle_policy",
    "radius_from_logdet",
    "ridge_estimate",
    "ts_scale",
    "ts_select",
    "ucb_select",
    "update_state",
]
