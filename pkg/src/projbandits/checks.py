"""Property oracles run by ``projbandits check``.

Each check compares a piece of the library against an independent computation on
random instances and returns a :class:`CheckResult`.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .environments.synthetic import random_orthogonal
from .policies import PolicyConfig, init_projected_state, update_state
from .subspace import (
    ProjectionPair,
    SubspaceModel,
    build_projections,
    ccipca_update,
    check_projection_pair,
    full_rank_pair,
    mean_biased_pair,
    pair_from_basis,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    """measured quantity (error or number of failures)."""
    threshold: float

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3g} (threshold {self.threshold:.3g})"


def random_pair(d: int, p: int, rng: np.random.Generator) -> ProjectionPair:
    """Projection on a random ``p``-dimensional subspace with a random mean."""
    theta_bar = rng.standard_normal(d) / np.sqrt(d)
    if p == 0:
        return mean_biased_pair(theta_bar)
    if p == d:
        return full_rank_pair(d)
    return pair_from_basis(random_orthogonal(d, rng)[:, :p], theta_bar)


def brute_force_estimate(
    x: np.ndarray,
    r: np.ndarray,
    pair: ProjectionPair,
    lambda1: float,
    lambda2: float,
) -> np.ndarray:
    """Minimizer of ``||r - X theta||^2 + lambda1 ||P_perp theta - w||^2 + lambda2 ||P theta||^2``.

    Solved as one stacked least squares problem.
    """
    d = pair.dim
    a = np.vstack([x, np.sqrt(lambda1) * pair.p_perp, np.sqrt(lambda2) * pair.p_hat])
    b = np.concatenate([r, np.sqrt(lambda1) * pair.bias_w, np.zeros(d)])
    return np.linalg.lstsq(a, b, rcond=None)[0]


def check_estimator(
    rng: np.random.Generator, n_instances: int = 500, atol: float = 1e-8
) -> CheckResult:
    """``theta_hat`` after incremental updates against the stacked least squares solution."""
    worst = 0.0
    for _ in range(n_instances):
        d = int(rng.integers(1, 9))
        k = int(rng.integers(0, 51))
        p = int(rng.integers(0, d + 1))
        lambda2 = 1.0
        lambda1 = float(rng.choice([1.0, 10.0, 100.0])) * lambda2
        pair = random_pair(d, p, rng)
        cfg = PolicyConfig(lambda1=lambda1, lambda2=lambda2, lambda_ridge=1.0, delta=0.1)

        x = rng.standard_normal((k, d)) / np.sqrt(d)
        r = rng.standard_normal(k)
        state = init_projected_state(pair, cfg)
        for xi, ri in zip(x, r, strict=True):
            state = update_state(state, xi, ri)

        expected = brute_force_estimate(x, r, pair, lambda1, lambda2)
        worst = max(worst, float(np.abs(state.theta_hat - expected).max()))

    return CheckResult("estimator vs brute force", worst <= atol, worst, atol)


def check_ccipca(
    rng: np.random.Generator,
    n_seeds: int = 20,
    dim: int = 10,
    n_samples: int = 2000,
    rank: int = 2,
    threshold: float = 0.2,
) -> CheckResult:
    """Frobenius distance between the CCIPCA projection and batch PCA of the same stream."""
    spectrum = np.array([9.0, 4.0, 1.0] + [0.25 / 4**i for i in range(dim - 3)])
    errors = []
    for _ in range(n_seeds):
        rotation = random_orthogonal(dim, rng)
        samples = rng.standard_normal((n_samples, dim)) * np.sqrt(spectrum) @ rotation.T

        model = SubspaceModel(dim)
        for s in samples:
            model = ccipca_update(model, s)
        p_online = build_projections(model, rank).p_hat

        _, vecs = np.linalg.eigh(np.cov(samples, rowvar=False))
        top = vecs[:, ::-1][:, :rank]
        errors.append(np.linalg.norm(p_online - top @ top.T))

    mean_error = float(np.mean(errors))
    return CheckResult("CCIPCA vs batch PCA", mean_error <= threshold, mean_error, threshold)


def check_projections(
    rng: np.random.Generator, dim: int = 8, atol: float = 1e-6
) -> CheckResult:
    """Projection invariants for random pairs and pairs built from CCIPCA, every rank."""
    failures = 0
    model = SubspaceModel(dim)
    for _ in range(4 * dim):
        model = ccipca_update(model, rng.standard_normal(dim) * np.arange(dim, 0, -1))

    for p in range(dim + 1):
        pairs = [random_pair(dim, p, rng)]
        if p > 0:
            pairs.append(build_projections(model, p))
        for pair in pairs:
            try:
                check_projection_pair(pair, atol)
            except RuntimeError as e:
                log.warning("rank %d: %s", p, e)
                failures += 1

    return CheckResult("projection invariants", failures == 0, failures, 0)


CHECKS: dict[str, Callable[[np.random.Generator], CheckResult]] = {
    "estimator": check_estimator,
    "ccipca": check_ccipca,
    "projections": check_projections,
}


def run_checks(seed: int = 0, names: list[str] | None = None) -> list[CheckResult]:
    """Run the named checks (all by default), each on its own random stream."""
    names = list(CHECKS) if names is None else names
    rngs = np.random.SeedSequence(seed).spawn(len(CHECKS))
    results = []
    for name, ss in zip(CHECKS, rngs, strict=True):
        if name not in names:
            continue
        log.info("running check %s", name)
        results.append(CHECKS[name](np.random.default_rng(ss)))
    return results
