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
from .catalog import SpriteCatalog
from .render import RasterImage, render
from .rewards import iou_reward, inference_reward, image_distance, image_reward, ALIGNMENTS
from .spec import SceneSpec
from .exceptions import ConfigurationError

__all__ = ['Reward', 'IouReward', 'InferenceReward', 'ImageDistanceReward']


class Reward:
    """
    Base class of all rewards. A reward scores a predicted specification against the ground truth (and, for image
    based rewards, the input image) with a value in [0,1].
    """
    name = None

    def __init__(self):
        self.owner = None

    def init(self, owner):
        """
        Initialization process of the reward. This function is being called by the RewardInterface.

        Parameters
        ----------
        owner: object exposing `debug_message`, usually the trainer

        Returns
        -------

        """
        self.owner = owner

    def close(self):
        """
        Cleanup process of the reward. This function is being called by the RewardInterface.

        Returns
        -------

        """
        pass

    def debug_message(self, message: str):
        if self.owner is not None:
            self.owner.debug_message(f'Reward {self.__class__.__name__}: {message}')

    def __call__(self, pred: SceneSpec, gt: SceneSpec, image: RasterImage = None) -> float:
        return self.compute(pred, gt, image)

    def compute(self, pred: SceneSpec, gt: SceneSpec, image: RasterImage = None) -> float:
        raise NotImplementedError()


class IouReward(Reward):
    name = 'iou'

    def compute(self, pred: SceneSpec, gt: SceneSpec, image: RasterImage = None) -> float:
        return iou_reward(pred, gt)


class InferenceReward(Reward):
    name = 'inference'

    def __init__(self, align: str = 'index'):
        super().__init__()
        if align not in ALIGNMENTS:
            raise ConfigurationError(f'Unknown alignment "{align}", valid values are {ALIGNMENTS}')
        self.align = align

    def compute(self, pred: SceneSpec, gt: SceneSpec, image: RasterImage = None) -> float:
        return inference_reward(pred, gt, self.align)


class ImageDistanceReward(Reward):
    """
    Renders the prediction and compares it with the input image

    Parameters
    ----------
    sigma: NoisyShapes blur
    c: NoisyShapes reward scale
    catalog: SpriteCatalog used to render AbstractScene predictions
    """
    name = 'image'

    def __init__(self, sigma: float = 2.0, c: float = None, catalog: SpriteCatalog = None):
        super().__init__()
        self.sigma = sigma
        self.c = c
        self.catalog = catalog

    def compute(self, pred: SceneSpec, gt: SceneSpec, image: RasterImage = None) -> float:
        if image is None:
            raise ValueError('The image reward needs the input image')

        rendered = render(pred, catalog = self.catalog)
        distance = image_distance(image, rendered, pred.domain, self.sigma)
        return image_reward(distance, pred.domain, self.c, image.width, image.height)
