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

""" Procedural clip-art catalog for the AbstractScene domain
"""

from functools import lru_cache
from typing import Sequence

import numpy as np

from .constants import DEFAULT_CATEGORIES
from .exceptions import UnknownCategory, ConfigurationError

__all__ = ['SpriteCatalog']

# Base sprite sizes (width, height) on the 500x400 scene canvas, cycled for extra categories
BASE_SIZES = (
    (90, 60), (90, 130), (80, 60), (60, 120), (60, 120), (50, 50), (40, 40), (60, 36), (56, 24), (60, 70)
)

# Body outline per category, cycled for extra categories
OUTLINES = ('ellipse', 'tree', 'ellipse', 'person', 'person', 'diamond', 'ellipse', 'triangle', 'rect', 'rect')

HUES = (
    (250, 210, 60), (60, 150, 60), (150, 100, 60), (70, 110, 200), (210, 80, 150),
    (220, 60, 60), (240, 150, 40), (90, 60, 160), (40, 40, 40), (60, 170, 170)
)

SHADOW_ALPHA = 96


def _outline_mask(outline: str, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if outline == 'ellipse':
        return (u - 0.5) ** 2 / 0.25 + (v - 0.5) ** 2 / 0.25 <= 1.0
    if outline == 'rect':
        return (u >= 0.05) & (u <= 0.95) & (v >= 0.1) & (v <= 0.9)
    if outline == 'diamond':
        return np.abs(u - 0.5) + np.abs(v - 0.5) <= 0.5
    if outline == 'triangle':
        return (v >= 0.1) & (np.abs(u - 0.5) <= (v - 0.1) * 0.55)
    if outline == 'tree':
        crown = (u - 0.5) ** 2 / 0.2 + (v - 0.35) ** 2 / 0.12 <= 1.0
        trunk = (np.abs(u - 0.5) <= 0.1) & (v >= 0.5)
        return crown | trunk
    if outline == 'person':
        head = (u - 0.5) ** 2 + (v - 0.15) ** 2 <= 0.02
        body = (np.abs(u - 0.5) <= 0.22) & (v >= 0.28) & (v <= 0.7)
        legs = ((np.abs(u - 0.38) <= 0.07) | (np.abs(u - 0.62) <= 0.07)) & (v > 0.7)
        return head | body | legs
    raise ValueError(f'Unknown outline "{outline}"')


@lru_cache(maxsize = 1024)
def _draw_sprite(outline: str, color: tuple, accent: tuple, variant: int, width: int, height: int) -> np.ndarray:
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    u = (u + 0.5) / width
    v = (v + 0.5) / height

    body = _outline_mask(outline, u, v)

    # Marker in the upper-left quadrant so horizontal flips are visible; its size encodes the subcategory
    marker_size = 0.12 + 0.04 * variant
    marker = body & (u >= 0.2) & (u <= 0.2 + marker_size) & (v >= 0.25) & (v <= 0.25 + marker_size)

    # Translucent ground shadow below the body
    shadow = ((u - 0.5) ** 2 / 0.2 + (v - 0.97) ** 2 / 0.002 <= 1.0) & ~body

    sprite = np.zeros((height, width, 4), dtype = np.uint8)
    sprite[body, :3] = color
    sprite[body, 3] = 255
    sprite[marker, :3] = accent
    sprite[shadow, :3] = (30, 30, 30)
    sprite[shadow, 3] = SHADOW_ALPHA

    sprite.setflags(write = False)
    return sprite


class SpriteCatalog:
    """
    Deterministic procedural stand-in for the clip-art library: C categories with a per-category number of
    subcategories. Each (category, subcategory) pair has a fixed RGBA sprite that can be drawn at any pixel size.
    """

    _default = None

    def __init__(self, categories: Sequence[int] = DEFAULT_CATEGORIES):
        categories = tuple(int(c) for c in categories)

        if not categories:
            raise ConfigurationError('Catalog needs at least one category')

        if any(c < 1 for c in categories):
            raise ConfigurationError('Every category needs at least one subcategory')

        self.categories = categories

    @classmethod
    def default(cls) -> 'SpriteCatalog':
        if cls._default is None:
            cls._default = cls()
        return cls._default

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    @property
    def max_subcategories(self) -> int:
        return max(self.categories)

    def check_category(self, category: int):
        if not 0 <= category < self.num_categories:
            raise UnknownCategory(f'Category {category} not in catalog (0..{self.num_categories - 1})')

    def num_subcategories(self, category: int) -> int:
        self.check_category(category)
        return self.categories[category]

    def base_size(self, category: int) -> tuple:
        self.check_category(category)
        return BASE_SIZES[category % len(BASE_SIZES)]

    def sprite(self, category: int, subcategory: int, width: int, height: int, flip: bool = False) -> np.ndarray:
        """
        RGBA sprite of the given pixel size

        Parameters
        ----------
        category
        subcategory
        width: pixels, >= 1
        height: pixels, >= 1
        flip: mirror horizontally

        Returns
        -------
        ndarray (height, width, 4) of uint8, read-only
        """
        if not 0 <= subcategory < self.num_subcategories(category):
            raise UnknownCategory(f'Subcategory {subcategory} not in category {category}')

        hue = np.array(HUES[category % len(HUES)], dtype = np.int64)
        # Subcategories shade the category hue
        shade = 1.0 - 0.18 * subcategory
        color = tuple(int(c) for c in np.clip(np.floor(hue * shade), 0, 255))
        accent = tuple(255 - c for c in color)

        sprite = _draw_sprite(
            OUTLINES[category % len(OUTLINES)], color, accent, subcategory, max(1, int(width)), max(1, int(height))
        )

        if flip:
            return sprite[:, ::-1]
        return sprite

    def to_dict(self) -> dict:
        return {'categories': list(self.categories)}
