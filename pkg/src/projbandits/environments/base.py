from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from numpy.typing import NDArray

from ..exceptions import DimensionMismatchError
from ..policies.base import ArmSet
from ..subspace import ProjectionPair


@dataclass(frozen=True)
class BanditRound:
    """One round served by an environment: the arm set and the expected reward of each arm."""

    arms: ArmSet
    mean_rewards: NDArray[np.float64]
    """expected reward of every arm, in arm order."""
    noise_std: float = 0.0
    """standard deviation of the Gaussian reward noise."""

    def __post_init__(self):
        mean_rewards = np.asarray(self.mean_rewards, dtype=np.float64)
        object.__setattr__(self, "mean_rewards", mean_rewards)
        if mean_rewards.shape != (len(self.arms),):
            msg = f"{mean_rewards.size} expected rewards for {len(self.arms)} arms"
            raise DimensionMismatchError(msg)

    def reward(self, index: int, rng: np.random.Generator) -> float:
        """Observed reward of arm ``index``. Noise is only drawn when ``noise_std > 0``."""
        mean = float(self.mean_rewards[index])
        if self.noise_std > 0:
            return mean + self.noise_std * float(rng.standard_normal())
        return mean

    def regret(self, index: int) -> float:
        """Expected reward of the best arm in the set minus the one of arm ``index``."""
        return float(self.mean_rewards.max() - self.mean_rewards[index])


class BaseEnvironment(ABC):
    """Source of bandit tasks.

    Environments are immutable once constructed; all randomness comes from the
    generators passed to :meth:`tasks` and :meth:`next_round`.
    """

    name: ClassVar[str]
    has_truth: ClassVar[bool] = False

    @property
    @abstractmethod
    def dim(self) -> int:
        """Context dimension ``d``."""

    @abstractmethod
    def tasks(self, num_tasks: int, rng: np.random.Generator) -> Sequence[Any]:
        """Draw the task sequence of one seed.

        May return fewer than ``num_tasks`` tasks if the environment runs out of them.
        """

    @abstractmethod
    def next_round(self, task: Any, rng: np.random.Generator) -> BanditRound:
        """Sample the arm set of the next round of ``task``."""

    def true_projection(self, task: Any) -> ProjectionPair | None:  # noqa: ARG002
        """Projection pair and mean of the task distribution, if known."""
        return None

    @abstractmethod
    def describe(self) -> dict[str, Any]:
        """JSON-serializable description, stored in the run manifest."""
