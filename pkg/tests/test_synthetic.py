from __future__ import annotations

import numpy as np
import pytest

from projbandits.environments import (
    BanditRound,
    SyntheticEnvironment,
    SyntheticSpec,
    gen_task,
    random_orthogonal,
    sample_contexts,
    synthetic_reward,
)
from projbandits.environments.synthetic import (
    context_variances,
    true_subspace,
    uniform_ball,
)
from projbandits.exceptions import DimensionMismatchError
from projbandits.policies import ArmSet, check_arm_set
from projbandits.subspace import check_projection_pair


@pytest.fixture
def spec():
    return SyntheticSpec(dim=8, true_rank=3, task_variance=1e-2, arms_per_round=6)


def test_spec_validation():
    with pytest.raises(ValueError, match="true rank"):
        SyntheticSpec(dim=4, true_rank=5)
    with pytest.raises(ValueError, match="nonnegative"):
        SyntheticSpec(task_variance=-1)
    with pytest.raises(ValueError, match="arm"):
        SyntheticSpec(arms_per_round=0)


def test_random_orthogonal():
    q = random_orthogonal(6, np.random.default_rng(0))
    assert np.allclose(q.T @ q, np.eye(6))
    assert np.array_equal(q, random_orthogonal(6, np.random.default_rng(0)))

    with pytest.raises(ValueError):
        random_orthogonal(0, np.random.default_rng(0))


def test_uniform_ball():
    rng = np.random.default_rng(1)
    draws = np.array([uniform_ball(3, 2.0, rng) for _ in range(1000)])
    norms = np.linalg.norm(draws, axis=1)
    assert norms.max() <= 2.0
    # the radius of a uniform draw in the 3-ball has median 2 * 0.5**(1/3)
    assert np.median(norms) == pytest.approx(2 * 0.5 ** (1 / 3), rel=0.05)


def test_true_subspace(spec):
    pair = true_subspace(spec)
    check_projection_pair(pair)
    assert pair.rank_p == 3
    assert np.array_equal(pair.bias_w, np.zeros(8))
    # fixed by the subspace seed
    assert np.array_equal(pair.p_hat, true_subspace(spec).p_hat)


def test_gen_task(spec):
    projection = true_subspace(spec)
    rng = np.random.default_rng(2)
    thetas = np.array([gen_task(spec, rng, projection).theta_star for _ in range(2000)])
    assert np.linalg.norm(thetas, axis=1).max() <= spec.param_scale + 1e-12

    perp = thetas @ projection.p_perp
    assert np.mean(np.sum(perp**2, axis=1)) == pytest.approx(spec.task_variance, rel=0.1)


def test_gen_task_on_the_subspace():
    spec = SyntheticSpec(dim=4, true_rank=2, task_variance=0.0)
    task = gen_task(spec, np.random.default_rng(3))
    assert np.allclose(task.true_projection.p_perp @ task.theta_star, 0)


def test_sample_contexts(spec):
    rng = np.random.default_rng(4)
    arms = sample_contexts(spec, rng)
    assert arms.contexts.shape == (6, 8)
    assert np.array_equal(arms.ids, np.arange(6))
    check_arm_set(arms, 8)

    variances = context_variances(spec)
    assert np.all((variances >= 0) & (variances <= 1))

    raw = sample_contexts(spec, rng, variances=np.full(8, 100.0), normalize=False)
    assert np.linalg.norm(raw.contexts, axis=1).max() > 1


def test_synthetic_reward(spec):
    task = gen_task(spec, np.random.default_rng(5))
    arms = sample_contexts(spec, np.random.default_rng(6))
    means = arms.contexts @ task.theta_star
    best = int(np.argmax(means))

    reward, regret = synthetic_reward(task, arms.contexts[best], arms, np.random.default_rng(0), 0.0)
    assert reward == pytest.approx(means[best])
    assert regret == pytest.approx(0, abs=1e-12)

    worst = int(np.argmin(means))
    _, regret = synthetic_reward(task, arms.contexts[worst], arms, np.random.default_rng(0), 0.1)
    assert regret == pytest.approx(means[best] - means[worst])


def test_bandit_round():
    arms = ArmSet(contexts=np.eye(2), ids=[0, 1])
    rnd = BanditRound(arms=arms, mean_rewards=[0.2, 0.5])
    rng = np.random.default_rng(0)
    assert rnd.reward(0, rng) == 0.2
    assert rnd.regret(0) == pytest.approx(0.3)
    assert rnd.regret(1) == 0

    noisy = BanditRound(arms=arms, mean_rewards=[0.2, 0.5], noise_std=1.0)
    assert noisy.reward(0, rng) != 0.2

    with pytest.raises(DimensionMismatchError):
        BanditRound(arms=arms, mean_rewards=[0.1])


def test_environment(spec):
    env = SyntheticEnvironment(spec)
    assert env.dim == 8
    assert env.has_truth
    assert env.true_projection(None) is env.projection

    tasks = env.tasks(4, np.random.default_rng(7))
    assert len(tasks) == 4
    rnd = env.next_round(tasks[0], np.random.default_rng(8))
    assert np.allclose(rnd.mean_rewards, rnd.arms.contexts @ tasks[0].theta_star)
    assert rnd.noise_std == spec.noise_std

    # observed rewards come from synthetic_reward with the round's noise level
    best = int(np.argmax(rnd.mean_rewards))
    expected, regret = synthetic_reward(
        tasks[0], rnd.arms.contexts[best], rnd.arms, np.random.default_rng(9), spec.noise_std
    )
    assert rnd.reward(best, np.random.default_rng(9)) == expected
    assert regret == pytest.approx(rnd.regret(best), abs=1e-12)

    desc = env.describe()
    assert desc["name"] == "synthetic"
    assert desc["true_rank"] == 3
