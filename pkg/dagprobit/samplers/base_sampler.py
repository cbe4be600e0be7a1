import numpy as np

from dagprobit.models.prior import Hyperparameters
from dagprobit.samplers.chain import ChainConfig, Dataset


class BaseSampler:
    """
    Parent class for Markov chain samplers which concrete implementations
    inherit from. One call to `update` performs one full sweep.
    """

    def __init__(
        self,
        data: Dataset,
        hp: Hyperparameters,
        config: ChainConfig,
        rng: np.random.Generator,
    ):
        self.data = data
        self.hp = hp
        self.config = config
        self.rng = rng
        self.num_updates = 0
        self.state = None

    def update(self):
        self.num_updates += 1
        return self._update()

    def _update(self):
        return None

    def reset(self):
        self.num_updates = 0
        return None
