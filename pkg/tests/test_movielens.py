from __future__ import annotations

import logging

import numpy as np
import pytest

from projbandits.environments.movielens import (
    GENRES,
    genre_context,
    load_movielens,
    movielens_round,
    normalize_rating,
    parse_group,
)
from projbandits.exceptions import EmptyGroupError, MissingGenreError, ParseError
from projbandits.policies import PolicyConfig, check_arm_set
from projbandits.runner import ExperimentConfig, run_experiment

MOVIES = """\
1::Toy Story (1995)::Animation|Children's|Comedy
2::Jumanji (1995)::Adventure|Children's|Fantasy
3::Heat (1995)::Action|Crime|Thriller
4::Sabrina (1995)::Comedy|Romance
5::GoldenEye (1995)::Action|Adventure|Thriller
6::Casino (1995)::Drama|Thriller
"""

USERS = """\
1::F::1::12::48067
2::M::56::4::70072
3::F::25::0::55117
"""

RATINGS = """\
1::1::5::978300760
1::2::3::978302109
1::3::3::978301968
1::4::4::978300275
1::5::5::978824291
1::99::2::978824292
2::1::1::978298413
2::2::4::978299026
2::3::2::978299026
2::6::5::978299026
2::1::2::978299027
3::1::4::978298413
3::2::4::978298413
"""


@pytest.fixture
def ml_dir(tmp_path):
    (tmp_path / "movies.dat").write_text(MOVIES, encoding="latin-1")
    (tmp_path / "users.dat").write_text(USERS, encoding="latin-1")
    (tmp_path / "ratings.dat").write_text(RATINGS, encoding="latin-1")
    return tmp_path


def test_genre_context():
    x = genre_context("Action|Comedy")
    assert x.shape == (len(GENRES),)
    assert np.linalg.norm(x) == pytest.approx(1)
    assert x[GENRES.index("Action")] == pytest.approx(1 / np.sqrt(2))
    assert x[GENRES.index("Comedy")] == pytest.approx(1 / np.sqrt(2))

    with pytest.raises(MissingGenreError, match="Cartoon"):
        genre_context("Action|Cartoon")
    with pytest.raises(MissingGenreError):
        genre_context("")


def test_normalize_rating():
    assert normalize_rating(1) == 0
    assert normalize_rating(5) == 1
    assert np.allclose(normalize_rating(np.array([2, 3, 4])), [0.25, 0.5, 0.75])


def test_parse_group():
    assert parse_group(None) is None
    assert parse_group("all") is None
    assert parse_group("gender=f") == ("gender", "F")
    assert parse_group("occupation=12") == ("occupation", 12)
    assert parse_group("profession=programmer") == ("occupation", 12)
    assert parse_group("occupation=K-12 student") == ("occupation", 10)

    for bad in ("gender", "gender=X", "occupation=astronaut", "age=25", "occupation=21"):
        with pytest.raises(ValueError):
            parse_group(bad)


def test_load_all_users(ml_dir, caplog):
    with caplog.at_level(logging.WARNING):
        env = load_movielens(ml_dir, arms_per_round=2)
    assert "unknown movies" in caplog.text

    # user 3 rated fewer than 2 K movies
    assert env.users == [1, 2]
    assert env.dim == 18
    assert np.allclose(np.linalg.norm(env.contexts, axis=1), 1)

    # the duplicate rating of user 2 keeps the last value
    movies, ratings = env.user_ratings[2]
    assert len(movies) == 4
    assert ratings[list(env.movie_ids[movies]).index(1)] == pytest.approx(0.25)

    desc = env.describe()
    assert desc["n_users"] == 2
    assert desc["n_movies"] == 6


@pytest.mark.parametrize(
    ("group", "users"),
    [("gender=F", [1]), ("gender=M", [2]), ("occupation=programmer", [1])],
)
def test_load_group(ml_dir, group, users):
    assert load_movielens(ml_dir, group, arms_per_round=2).users == users


def test_empty_group(ml_dir):
    with pytest.raises(EmptyGroupError):
        load_movielens(ml_dir, "gender=F", arms_per_round=3)
    with pytest.raises(EmptyGroupError):
        load_movielens(ml_dir, "occupation=writer", arms_per_round=2)


def test_round(ml_dir):
    env = load_movielens(ml_dir, arms_per_round=2)
    rng = np.random.default_rng(0)
    arms, reward_fn, regret_fn = movielens_round(env, 1, rng)
    check_arm_set(arms, env.dim)
    assert len(arms) == 2
    assert len(set(arms.ids)) == 2
    assert set(arms.ids) <= {1, 2, 3, 4, 5}

    rewards = [reward_fn(i) for i in range(2)]
    assert all(0 <= r <= 1 for r in rewards)
    assert regret_fn(int(np.argmax(rewards))) == 0
    assert regret_fn(int(np.argmin(rewards))) == pytest.approx(max(rewards) - min(rewards))

    rnd = env.next_round(2, rng)
    assert rnd.noise_std == 0
    assert rnd.reward(0, rng) == rnd.mean_rewards[0]

    # next_round offers the same movies movielens_round would for the same stream
    arms, reward_fn, _ = movielens_round(env, 2, np.random.default_rng(4))
    rnd = env.next_round(2, np.random.default_rng(4))
    assert np.array_equal(rnd.arms.ids, arms.ids)
    assert list(rnd.mean_rewards) == [reward_fn(i) for i in range(len(arms))]

    with pytest.raises(KeyError):
        movielens_round(env, 3, rng)


def test_tasks_capped_by_group_size(ml_dir, caplog):
    env = load_movielens(ml_dir, arms_per_round=2)
    with caplog.at_level(logging.WARNING):
        tasks = env.tasks(5, np.random.default_rng(0))
    assert sorted(tasks) == [1, 2]
    assert "running 2 tasks instead of 5" in caplog.text


def test_run_on_movielens(ml_dir):
    env = load_movielens(ml_dir, arms_per_round=2)
    cfg = ExperimentConfig(
        environment=env,
        policy="p-linucb",
        policy_config=PolicyConfig.from_horizon(5, env.dim),
        num_tasks=2,
        rounds_per_task=5,
    )
    regret_log = run_experiment(cfg)
    assert regret_log.inst_regret.shape == (1, 2, 5)
    assert np.all(regret_log.inst_regret >= 0)

    with pytest.raises(ValueError, match="known projection"):
        ExperimentConfig(
            environment=env,
            policy="oracle-ucb",
            policy_config=PolicyConfig.from_horizon(5, env.dim),
        )


def test_missing_file(ml_dir):
    (ml_dir / "users.dat").unlink()
    with pytest.raises(FileNotFoundError, match=r"users\.dat"):
        load_movielens(ml_dir)


def test_unknown_genre(ml_dir):
    (ml_dir / "movies.dat").write_text(
        MOVIES + "7::Up (2009)::Animation|Cartoon\n", encoding="latin-1"
    )
    with pytest.raises(MissingGenreError) as exc:
        load_movielens(ml_dir, arms_per_round=2)
    assert exc.value.line == 7
    assert exc.value.path.endswith("movies.dat")


def test_bad_rating(ml_dir):
    (ml_dir / "ratings.dat").write_text(RATINGS + "1::6::7::978824291\n", encoding="latin-1")
    with pytest.raises(ParseError, match="outside of 1..5") as exc:
        load_movielens(ml_dir, arms_per_round=2)
    assert exc.value.line == 14


def test_malformed_lines(ml_dir):
    (ml_dir / "users.dat").write_text(USERS + "4::F\n", encoding="latin-1")
    with pytest.raises(ParseError) as exc:
        load_movielens(ml_dir, arms_per_round=2)
    assert exc.value.line == 4

    (ml_dir / "users.dat").write_text(USERS + "x::F::1::12::48067\n", encoding="latin-1")
    with pytest.raises(ParseError, match="invalid integer 'x'"):
        load_movielens(ml_dir, arms_per_round=2)
