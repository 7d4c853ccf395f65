"""MovieLens 1M as a bandit environment.

Every user is a task and the movies they rated are the arms. A movie's context is
the sum of its genre indicators, normalized to unit norm; the reward of a movie is
the user's rating mapped to ``[0, 1]``.

The dataset is not bundled: point :func:`load_movielens` at an extracted ``ml-1m``
directory containing ``movies.dat``, ``ratings.dat`` and ``users.dat``.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from ..exceptions import EmptyGroupError, MissingGenreError, ParseError
from ..policies.base import ArmSet
from .base import BanditRound, BaseEnvironment

log = logging.getLogger(__name__)

GENRES = (
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
)
"""genre vocabulary, in context coordinate order."""

OCCUPATIONS = (
    "other",
    "academic/educator",
    "artist",
    "clerical/admin",
    "college/grad student",
    "customer service",
    "doctor/health care",
    "executive/managerial",
    "farmer",
    "homemaker",
    "K-12 student",
    "lawyer",
    "programmer",
    "retired",
    "sales/marketing",
    "scientist",
    "self-employed",
    "technician/engineer",
    "tradesman/craftsman",
    "unemployed",
    "writer",
)
"""occupation names, indexed by their code in ``users.dat``."""

DEFAULT_ARMS_PER_ROUND = 25

_COLUMNS = {
    "movies.dat": ["movie_id", "title", "genres"],
    "ratings.dat": ["user_id", "movie_id", "rating", "timestamp"],
    "users.dat": ["user_id", "gender", "age", "occupation", "zip_code"],
}


def _read_dat(path: Path, fname: str, int_columns: list[str]) -> pd.DataFrame:
    fpath = path / fname
    if not fpath.is_file():
        msg = f"{fpath} does not exist"
        raise FileNotFoundError(msg)

    columns = _COLUMNS[fname]
    try:
        df = pd.read_csv(
            fpath,
            sep="::",
            engine="python",
            encoding="latin-1",
            header=None,
            names=columns,
            dtype=str,
            keep_default_na=False,
            index_col=False,
        )
    except pd.errors.ParserError as e:
        msg = f"malformed file: {e}"
        raise ParseError(msg, str(fpath)) from e

    missing = (df.isna() | (df == "")).any(axis=1)
    if missing.any():
        line = int(np.flatnonzero(missing.to_numpy())[0]) + 1
        msg = f"expected {len(columns)} fields separated by '::'"
        raise ParseError(msg, str(fpath), line)

    for col in int_columns:
        values = pd.to_numeric(df[col], errors="coerce")
        bad = values.isna().to_numpy() | (values.to_numpy() % 1 != 0)
        if bad.any():
            line = int(np.flatnonzero(bad)[0]) + 1
            msg = f"invalid integer {df[col].iloc[line - 1]!r} in column {col!r}"
            raise ParseError(msg, str(fpath), line)
        df[col] = values.astype(np.int64)

    return df


def genre_context(genres: str) -> NDArray[np.float64]:
    """Unit-norm context of a ``|``-separated genre list.

    Raises
    ------
    MissingGenreError
        if a genre is not part of :data:`GENRES` (or the list is empty).
    """
    x = np.zeros(len(GENRES))
    for token in genres.split("|"):
        try:
            x[GENRES.index(token.strip())] = 1.0
        except ValueError:
            msg = f"unknown genre {token!r}"
            raise MissingGenreError(msg) from None
    return x / np.linalg.norm(x)


def normalize_rating(rating):
    """Map star ratings ``1..5`` to ``[0, 1]``."""
    return (rating - 1) / 4


def parse_group(group_filter: str | None) -> tuple[str, str | int] | None:
    """Parse ``gender=F|M`` or ``occupation=<code or name>`` (alias ``profession``).

    ``None`` or ``"all"`` selects every user.
    """
    if group_filter is None or group_filter.strip().lower() == "all":
        return None

    key, sep, value = group_filter.partition("=")
    key, value = key.strip().lower(), value.strip()
    if not sep or not value:
        msg = f"group filter {group_filter!r} is not of the form key=value"
        raise ValueError(msg)

    if key == "gender":
        if value.upper() not in ("F", "M"):
            msg = f"gender must be F or M, got {value!r}"
            raise ValueError(msg)
        return ("gender", value.upper())

    if key in ("occupation", "profession"):
        if value.isdigit() and int(value) < len(OCCUPATIONS):
            return ("occupation", int(value))
        names = [o.lower() for o in OCCUPATIONS]
        if value.lower() in names:
            return ("occupation", names.index(value.lower()))
        msg = f"unknown occupation {value!r}"
        raise ValueError(msg)

    msg = f"cannot group users by {key!r}, use gender or occupation"
    raise ValueError(msg)


class MovieLensEnv(BaseEnvironment):
    """Users of one group with their normalized ratings.

    Parameters
    ----------
    movie_ids
        ids of all known movies.
    contexts
        ``n_movies x 18`` genre contexts, row ``i`` belongs to ``movie_ids[i]``.
    user_ratings
        maps a user id to the row indices of the movies they rated and the
        normalized ratings.
    group
        the group filter the users were selected with.
    """

    name = "movielens"

    def __init__(
        self,
        movie_ids: NDArray,
        contexts: NDArray[np.float64],
        user_ratings: dict[int, tuple[NDArray[np.int64], NDArray[np.float64]]],
        group: str | None = None,
        arms_per_round: int = DEFAULT_ARMS_PER_ROUND,
    ):
        if arms_per_round < 1:
            msg = f"need at least one arm per round, got {arms_per_round}"
            raise ValueError(msg)
        self.movie_ids = np.asarray(movie_ids)
        self.contexts = np.asarray(contexts, dtype=np.float64)
        self.user_ratings = user_ratings
        self.group = group
        self.arms_per_round = arms_per_round

    @property
    def dim(self) -> int:
        return len(GENRES)

    @property
    def users(self) -> list[int]:
        return sorted(self.user_ratings)

    def tasks(self, num_tasks, rng):
        users = rng.permutation(self.users)
        if num_tasks > len(users):
            log.warning(
                "only %d users in group %s, running %d tasks instead of %d",
                len(users),
                self.group,
                len(users),
                num_tasks,
            )
        return [int(u) for u in users[:num_tasks]]

    def next_round(self, task: int, rng):
        arms, reward_fn, _ = movielens_round(self, task, rng)
        return BanditRound(arms=arms, mean_rewards=[reward_fn(i) for i in range(len(arms))])

    def describe(self):
        return {
            "name": self.name,
            "group": self.group,
            "arms_per_round": self.arms_per_round,
            "n_users": len(self.user_ratings),
            "n_movies": len(self.movie_ids),
        }


def load_movielens(
    path: str | os.PathLike,
    group_filter: str | None = None,
    arms_per_round: int = DEFAULT_ARMS_PER_ROUND,
) -> MovieLensEnv:
    """Load an ``ml-1m`` directory.

    Only users of the requested group with at least ``2 K`` distinct rated movies
    are kept. Ratings of movies missing from ``movies.dat`` are dropped.

    Raises
    ------
    ParseError
        on malformed lines, with the file and line number.
    MissingGenreError
        on a genre outside of :data:`GENRES`.
    EmptyGroupError
        if no user is left after filtering.
    """
    path = Path(path)
    group = parse_group(group_filter)
    log.info("loading MovieLens data from %s", path)

    movies = _read_dat(path, "movies.dat", ["movie_id"])
    contexts = np.zeros((len(movies), len(GENRES)))
    for i, genres in enumerate(movies["genres"]):
        try:
            contexts[i] = genre_context(genres)
        except MissingGenreError as e:
            msg = f"unknown genre in {genres!r}"
            raise MissingGenreError(msg, str(path / "movies.dat"), i + 1) from e
    movie_ids = movies["movie_id"].to_numpy()
    row_of = pd.Series(np.arange(len(movies)), index=movie_ids)

    users = _read_dat(path, "users.dat", ["user_id", "age", "occupation"])
    if group is not None:
        key, value = group
        column = users[key].str.upper() if key == "gender" else users[key]
        users = users[column == value]

    ratings = _read_dat(path, "ratings.dat", ["user_id", "movie_id", "rating", "timestamp"])
    bad = ~ratings["rating"].between(1, 5)
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 1
        msg = f"rating {ratings['rating'].iloc[line - 1]} outside of 1..5"
        raise ParseError(msg, str(path / "ratings.dat"), line)

    known = ratings["movie_id"].isin(movie_ids)
    if not known.all():
        log.warning("dropping %d ratings of unknown movies", int((~known).sum()))
    ratings = ratings[known & ratings["user_id"].isin(users["user_id"])]
    ratings = ratings.drop_duplicates(["user_id", "movie_id"], keep="last")

    min_rated = 2 * arms_per_round
    user_ratings = {}
    for user_id, df in ratings.groupby("user_id", sort=True):
        if len(df) < min_rated:
            continue
        user_ratings[int(user_id)] = (
            row_of.loc[df["movie_id"].to_numpy()].to_numpy(),
            normalize_rating(df["rating"].to_numpy(dtype=np.float64)),
        )

    if not user_ratings:
        msg = f"no user in group {group_filter!r} rated at least {min_rated} movies"
        raise EmptyGroupError(msg)

    log.info(
        "%d users and %d movies in group %s", len(user_ratings), len(movie_ids), group_filter
    )
    return MovieLensEnv(movie_ids, contexts, user_ratings, group_filter, arms_per_round)


def _offer(
    env: MovieLensEnv, user: int, rng: np.random.Generator
) -> tuple[ArmSet, NDArray[np.float64]]:
    if user not in env.user_ratings:
        msg = f"user {user} is not part of the environment"
        raise KeyError(msg)
    movies, ratings = env.user_ratings[user]
    k = env.arms_per_round
    if len(movies) < k:
        msg = f"user {user} rated {len(movies)} movies, fewer than {k}"
        raise EmptyGroupError(msg)

    chosen = rng.choice(len(movies), size=k, replace=False)
    arms = ArmSet(contexts=env.contexts[movies[chosen]], ids=env.movie_ids[movies[chosen]])
    return arms, ratings[chosen]


def movielens_round(
    env: MovieLensEnv, user: int, rng: np.random.Generator
) -> tuple[ArmSet, Callable[[int], float], Callable[[int], float]]:
    """Sample ``K`` of the user's rated movies without replacement.

    Returns the arm set and two functions of the chosen arm position: the reward (the
    normalized rating) and the regret against the best rating in the set.
    """
    arms, offered = _offer(env, user, rng)
    best = float(offered.max())

    def reward_fn(index: int) -> float:
        return float(offered[index])

    def regret_fn(index: int) -> float:
        return best - float(offered[index])

    return arms, reward_fn, regret_fn
