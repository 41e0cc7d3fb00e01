# Derenderer Library
#
# Copyright 2026 The Derenderer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

from typing import Callable

from .extensions import Reward
from .exceptions import RewardNotFound

__all__ = ['RewardInterface']


class RewardInterface:
    """
    Keeps track of registered rewards and resolves them by name
    """

    def __init__(self, owner):
        self.owner = owner
        self.rewards = []

    def __len__(self):
        return len(self.rewards)

    def __iter__(self):
        for item in self.rewards:
            yield item

    def __add__(self, other):
        self.register(other)
        return self

    def register(self, reward: Reward):
        """
        Register a reward instance to the registry and calls initialization

        Parameters
        ----------
        reward: Reward

        Returns
        -------

        """
        if not isinstance(reward, Reward):
            raise ValueError("Provided reward is not a subclass of Reward")

        reward.init(self.owner)

        self.rewards.append(reward)

    def unregister_all(self):
        for reward in self.rewards:
            reward.close()
        self.rewards = []

    def call(self, name: str, *args, **kwargs) -> float:
        """
        Computes the reward registered under `name`

        Will raise a `RewardNotFound` when no reward with that name is registered
        """
        return self.get_reward(name)(*args, **kwargs)

    def get_reward(self, name: str) -> Callable:

        for reward in self.rewards:
            if reward.name == name:
                self.owner.debug_message(f"Compute '{name}' using {reward.__class__.__name__} ...")
                return reward

        raise RewardNotFound(f"No reward registered with name '{name}'")

    def __getattr__(self, name):
        if name in ('owner', 'rewards'):
            raise AttributeError(name)
        return self.get_reward(name)
