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

""" Residual CNN image encoder producing a set of m feature vectors of dimension d
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..exceptions import ShapeMismatch
from ..tensor import Tensor, relu, get_default_dtype
from .base import Module, Conv2d

__all__ = ['ImageFeatures', 'ResidualBlock', 'ImageEncoder', 'spatial_encoding']


@dataclass
class ImageFeatures:
    """
    Encoder output for a batch: `values` has shape (batch, m, d) with m = Hf * Wf spatial positions
    """
    values: Tensor

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    @property
    def batch_size(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, index) -> 'ImageFeatures':
        return ImageFeatures(self.values[index])


def spatial_encoding(height: int, width: int, dim: int) -> np.ndarray:
    """
    Fixed sinusoidal encoding of the (row, column) of every feature-map cell; half of the channels encode the row,
    the other half the column. Returns shape (height * width, dim).
    """
    half = dim // 2
    rows = np.repeat(np.arange(height), width)
    cols = np.tile(np.arange(width), height)

    def encode(positions: np.ndarray, size: int) -> np.ndarray:
        table = np.zeros((len(positions), size))
        rates = 1.0 / np.power(10000.0, np.arange(0, size, 2) / size)
        table[:, 0::2] = np.sin(positions[:, None] * rates)
        table[:, 1::2] = np.cos(positions[:, None] * rates[:table[:, 1::2].shape[1]])
        return table

    return np.concatenate([encode(rows, half), encode(cols, dim - half)], axis = 1)


class ResidualBlock(Module):
    """
    conv3x3(stride) -> relu -> conv3x3, plus a strided 1x1 projection shortcut, then relu
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, stride: int = 2,
                 zero_init: bool = False):
        super().__init__()
        self.conv1 = self.register_module('conv1', Conv2d(in_channels, out_channels, 3, rng, stride, padding = 1))
        self.conv2 = self.register_module('conv2', Conv2d(out_channels, out_channels, 3, rng, 1, padding = 1))
        self.shortcut = self.register_module('shortcut', Conv2d(in_channels, out_channels, 1, rng, stride))

        if zero_init:
            self.conv2.weight.data[...] = 0
            self.conv2.bias.data[...] = 0

    def forward(self, x):
        return relu(self.conv2(relu(self.conv1(x))) + self.shortcut(x))


class ImageEncoder(Module):
    """
    Stem convolution followed by one stride-2 residual block per entry of `channels`. The final feature map is
    flattened to m = Hf * Wf vectors and a fixed spatial encoding is added so attention can tell cells apart.

    Parameters
    ----------
    image_shape: (height, width, channels) of the input images
    channels: output channels of the stages, the last one is the feature dimension d
    rng: generator used for initialization
    zero_init_last: zero the last convolution of the final block
    """

    def __init__(self, image_shape: Sequence[int], channels: Sequence[int], rng: np.random.Generator,
                 zero_init_last: bool = False):
        super().__init__()
        self.image_shape = tuple(image_shape)
        height, width, in_channels = self.image_shape

        self.stem = self.register_module('stem', Conv2d(in_channels, channels[0], 3, rng, 1, padding = 1))

        self.stages = []
        previous = channels[0]
        for index, out_channels in enumerate(channels):
            zero_init = zero_init_last and index == len(channels) - 1
            block = ResidualBlock(previous, out_channels, rng, stride = 2, zero_init = zero_init)
            self.stages.append(self.register_module(f'stages.{index}', block))
            previous = out_channels

        for _ in channels:
            height = (height - 1) // 2 + 1
            width = (width - 1) // 2 + 1

        self.feature_shape = (height, width)
        self.d = channels[-1]
        self.position = Tensor(spatial_encoding(height, width, self.d))

    @property
    def m(self) -> int:
        return self.feature_shape[0] * self.feature_shape[1]

    def forward(self, images) -> ImageFeatures:
        """
        Parameters
        ----------
        images: (batch, channels, height, width) floats in [0,1]

        Returns
        -------
        ImageFeatures
        """
        if not isinstance(images, Tensor):
            images = Tensor(np.asarray(images, dtype = get_default_dtype()))

        height, width, channels = self.image_shape
        if images.ndim != 4 or images.shape[1:] != (channels, height, width):
            raise ShapeMismatch(f'Encoder expects (N, {channels}, {height}, {width}) images, got {images.shape}')

        x = relu(self.stem(images))
        for stage in self.stages:
            x = stage(x)

        batch, dim = x.shape[:2]
        features = x.reshape(batch, dim, self.m).transpose(0, 2, 1)
        return ImageFeatures(features + self.position)
