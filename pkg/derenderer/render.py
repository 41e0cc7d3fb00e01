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

""" Deterministic rasterization of specifications, the NoisyShapes noise model and the blur used by image rewards
"""

import math
from dataclasses import dataclass, asdict

import numpy as np

from .catalog import SpriteCatalog
from .constants import DOMAIN_NOISY_SHAPES, DOMAIN_ABSTRACT_SCENE, GRID_MAX, SCENE_WIDTH, SCENE_HEIGHT
from .exceptions import InvalidDomain, ConfigurationError, ShapeMismatch
from .spec import SceneSpec, ShapeKind, type_key
from .utils import round_half_away, to_uint8
from .utils.hasher import derive_rng
from .utils.netpbm import encode_netpbm, decode_netpbm, write_netpbm, read_netpbm

__all__ = [
    'RasterImage', 'NoiseParams', 'render_noisy_shapes', 'render_abstract_scene', 'render', 'gaussian_blur',
    'side_by_side'
]

INK = 0
PAPER = 255
DASH_LENGTH = 3

SKY = (200, 225, 255)
GRASS = (150, 200, 120)
HORIZON = 0.62


class RasterImage:
    """
    Dense 8-bit pixel grid, stored as a (height, width, channels) uint8 array with 1 or 3 channels
    """

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels)

        if pixels.ndim == 2:
            pixels = pixels[:, :, None]

        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise ShapeMismatch(f'Expected (height, width, 1|3) pixels, got shape {pixels.shape}')

        if pixels.dtype != np.uint8:
            raise ValueError(f'Pixels must be uint8, got {pixels.dtype}')

        self.pixels = pixels

    @classmethod
    def blank(cls, width: int, height: int, channels: int = 1, value = PAPER) -> 'RasterImage':
        pixels = np.empty((height, width, channels), dtype = np.uint8)
        pixels[...] = value
        return cls(pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        return isinstance(other, RasterImage) and self.pixels.shape == other.pixels.shape and \
            np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f'<RasterImage {self.width}x{self.height}x{self.channels}>'

    def to_float(self) -> np.ndarray:
        """
        Intensities normalized to [0,1], shape (channels, height, width), float32 (encoder input layout)
        """
        return (self.pixels.transpose(2, 0, 1).astype(np.float32) / 255.0)

    def to_netpbm(self) -> bytes:
        return encode_netpbm(self.pixels)

    @classmethod
    def from_netpbm(cls, data: bytes) -> 'RasterImage':
        return cls(decode_netpbm(data))

    def save(self, path: str):
        write_netpbm(path, self.pixels)

    @classmethod
    def load(cls, path: str) -> 'RasterImage':
        return cls(read_netpbm(path))


@dataclass(frozen = True)
class NoiseParams:
    """
    NoisyShapes noise model

    * intensity_scale_range: [lo, hi] factor applied to ink darkness
    * translate_max: maximum global shift in pixels (both axes)
    * jitter_max: maximum perturbation of object coordinates and radii, in grid units
    * stroke_dropout: probability that a stroke pixel is dropped
    * dither: add +-1 intensity dither to stroke pixels
    * seed: 64-bit seed of the noise draws

    """
    intensity_scale_range: tuple = (0.7, 1.0)
    translate_max: int = 2
    jitter_max: float = 0.25
    stroke_dropout: float = 0.1
    dither: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'intensity_scale_range', tuple(float(v) for v in self.intensity_scale_range))
        self.validate()

    def validate(self):
        low, high = self.intensity_scale_range
        if low < 0 or high < low:
            raise ConfigurationError(f'Invalid intensity_scale_range {self.intensity_scale_range}')
        if self.translate_max < 0 or self.jitter_max < 0:
            raise ConfigurationError('translate_max and jitter_max must be non-negative')
        if not 0 <= self.stroke_dropout <= 1:
            raise ConfigurationError(f'stroke_dropout={self.stroke_dropout} must be a probability')
        if self.seed < 0:
            raise ConfigurationError('seed must be non-negative')

    @classmethod
    def zero(cls, seed: int = 0) -> 'NoiseParams':
        return cls(intensity_scale_range = (1.0, 1.0), translate_max = 0, jitter_max = 0.0, stroke_dropout = 0.0,
                   dither = False, seed = seed)

    def with_seed(self, seed: int) -> 'NoiseParams':
        values = asdict(self)
        values['seed'] = seed
        return NoiseParams(**values)

    @property
    def is_zero(self) -> bool:
        return self.intensity_scale_range == (1.0, 1.0) and self.translate_max == 0 and self.jitter_max == 0 \
            and self.stroke_dropout == 0 and not self.dither

    def to_dict(self) -> dict:
        values = asdict(self)
        values['intensity_scale_range'] = list(self.intensity_scale_range)
        return values

    @classmethod
    def from_dict(cls, values: dict) -> 'NoiseParams':
        return cls(**values)


def _plot(mask: np.ndarray, x: int, y: int):
    if 0 <= y < mask.shape[0] and 0 <= x < mask.shape[1]:
        mask[y, x] = True


def _bresenham(mask: np.ndarray, x0: int, y0: int, x1: int, y1: int, dashed: bool = False):
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    step = 0

    while True:
        if not dashed or (step // DASH_LENGTH) % 2 == 0:
            _plot(mask, x0, y0)
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
        step += 1


def _midpoint_circle(mask: np.ndarray, cx: int, cy: int, radius: int):
    x = radius
    y = 0
    err = 1 - radius

    while x >= y:
        for px, py in ((x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)):
            _plot(mask, cx + px, cy + py)
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1


def _arrowhead(mask: np.ndarray, x0: int, y0: int, x1: int, y1: int, length: int):
    dx, dy = x1 - x0, y1 - y0
    norm = math.hypot(dx, dy)
    if norm == 0:
        return

    ux, uy = dx / norm, dy / norm
    for angle in (math.pi / 6, -math.pi / 6):
        cos_a, sin_a = math.cos(angle), math.sin(angle)
        bx = ux * cos_a - uy * sin_a
        by = ux * sin_a + uy * cos_a
        _bresenham(mask, x1, y1, round_half_away(x1 - length * bx), round_half_away(y1 - length * by))


def render_noisy_shapes(spec: SceneSpec, noise: NoiseParams = None) -> RasterImage:
    """
    Rasterizes a NoisyShapes specification: the 16x16 logical grid is mapped linearly onto the canvas and every
    object is drawn as dark strokes on white. Noise is applied as coordinate jitter, rasterization, stroke dropout,
    global intensity rescale, stroke dither, then a global translation with white fill. Jitter is drawn in type
    order and strokes are a union of masks, so the image does not depend on the object order.

    Parameters
    ----------
    spec: SceneSpec of domain noisy_shapes
    noise: NoiseParams, defaults to no noise

    Returns
    -------
    RasterImage (grayscale)
    """
    if spec.domain != DOMAIN_NOISY_SHAPES:
        raise InvalidDomain(f'Cannot render "{spec.domain}" specification as NoisyShapes')

    noise = noise or NoiseParams.zero()
    width, height = spec.canvas
    scale_x = (width - 1) / GRID_MAX
    scale_y = (height - 1) / GRID_MAX

    rng = None if noise.is_zero else derive_rng(noise.seed, 'noise')

    def jitter(count: int) -> np.ndarray:
        if rng is None or noise.jitter_max == 0:
            return np.zeros(count)
        return rng.uniform(-noise.jitter_max, noise.jitter_max, size = count)

    mask = np.zeros((height, width), dtype = bool)
    arrow_length = max(3, round_half_away(width / 16))

    for obj in sorted(spec.objects, key = type_key):
        if obj.kind == ShapeKind.CIRCLE:
            offset = jitter(3)
            cx = round_half_away((obj.cx + offset[0]) * scale_x)
            cy = round_half_away((obj.cy + offset[1]) * scale_y)
            radius = max(1, round_half_away((obj.radius + offset[2]) * min(scale_x, scale_y)))
            _midpoint_circle(mask, cx, cy, radius)
            continue

        offset = jitter(4)
        x1 = round_half_away((obj.x1 + offset[0]) * scale_x)
        y1 = round_half_away((obj.y1 + offset[1]) * scale_y)
        x2 = round_half_away((obj.x2 + offset[2]) * scale_x)
        y2 = round_half_away((obj.y2 + offset[3]) * scale_y)

        if obj.kind == ShapeKind.LINE:
            _bresenham(mask, x1, y1, x2, y2, dashed = obj.dashed)
            if obj.arrow:
                _arrowhead(mask, x1, y1, x2, y2, arrow_length)
        else:
            _bresenham(mask, x1, y1, x2, y1)
            _bresenham(mask, x2, y1, x2, y2)
            _bresenham(mask, x2, y2, x1, y2)
            _bresenham(mask, x1, y2, x1, y1)

    pixels = np.full((height, width), PAPER, dtype = np.int64)
    pixels[mask] = INK

    if rng is not None:
        # Pencil texture: the full-canvas draws keep the stream independent of the stroke layout
        keep = rng.random((height, width)) >= noise.stroke_dropout
        dither = rng.integers(-1, 2, size = (height, width)) if noise.dither else np.zeros((height, width), np.int64)
        stroke = mask & keep
        pixels[mask & ~keep] = PAPER

        low, high = noise.intensity_scale_range
        factor = rng.uniform(low, high) if high > low else low
        pixels = PAPER - round_half_away((PAPER - pixels) * factor)

        # dither around the rescaled ink level, reflected where it would leave [0, 255]
        dithered = pixels + dither
        outside = (dithered < 0) | (dithered > 255)
        dithered[outside] = pixels[outside] - dither[outside]
        pixels = np.where(stroke, dithered, pixels)

        if noise.translate_max > 0:
            dx, dy = rng.integers(-noise.translate_max, noise.translate_max + 1, size = 2)
            shifted = np.full_like(pixels, PAPER)
            src = pixels[max(0, -dy):height - max(0, dy), max(0, -dx):width - max(0, dx)]
            shifted[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
            pixels = shifted

    return RasterImage(np.clip(pixels, 0, 255).astype(np.uint8)[:, :, None])


def _background(width: int, height: int) -> np.ndarray:
    pixels = np.empty((height, width, 3), dtype = np.int64)
    horizon = round_half_away(height * HORIZON)
    pixels[:horizon] = SKY
    pixels[horizon:] = GRASS
    return pixels


def _z_key(obj) -> tuple:
    return obj.category, obj.subcategory, obj.y, obj.x, obj.scale, obj.flip


def render_abstract_scene(spec: SceneSpec, catalog: SpriteCatalog = None) -> RasterImage:
    """
    Composites the sprites of an AbstractScene specification over a fixed background. Sprites are drawn in the
    z-order (category, subcategory, y, x), sized from the catalog base size and scale, centered on (x, y) and
    clipped at the canvas edges. Compositing uses integer alpha with 8 fractional bits.

    Parameters
    ----------
    spec: SceneSpec of domain abstract_scene
    catalog: SpriteCatalog, defaults to the standard catalog

    Returns
    -------
    RasterImage (RGB)
    """
    if spec.domain != DOMAIN_ABSTRACT_SCENE:
        raise InvalidDomain(f'Cannot render "{spec.domain}" specification as AbstractScene')

    catalog = catalog or SpriteCatalog.default()
    width, height = spec.canvas
    factor_x = width / SCENE_WIDTH
    factor_y = height / SCENE_HEIGHT

    canvas = _background(width, height)

    for obj in sorted(spec.objects, key = _z_key):
        catalog.check_category(obj.category)
        base_width, base_height = obj.size(catalog)
        sprite_width = max(1, round_half_away(base_width * factor_x))
        sprite_height = max(1, round_half_away(base_height * factor_y))

        sprite = catalog.sprite(obj.category, obj.subcategory, sprite_width, sprite_height, flip = bool(obj.flip))

        left = round_half_away(obj.x * factor_x) - sprite_width // 2
        top = round_half_away(obj.y * factor_y) - sprite_height // 2

        x0, y0 = max(0, left), max(0, top)
        x1, y1 = min(width, left + sprite_width), min(height, top + sprite_height)
        if x0 >= x1 or y0 >= y1:
            continue

        patch = sprite[y0 - top:y1 - top, x0 - left:x1 - left].astype(np.int64)
        alpha = patch[:, :, 3:4]
        alpha = alpha + (alpha >> 7)

        dst = canvas[y0:y1, x0:x1]
        canvas[y0:y1, x0:x1] = (patch[:, :, :3] * alpha + dst * (256 - alpha) + 128) >> 8

    return RasterImage(canvas.astype(np.uint8))


def render(spec: SceneSpec, noise: NoiseParams = None, catalog: SpriteCatalog = None) -> RasterImage:
    """
    Renders a specification of either domain; `noise` only applies to NoisyShapes
    """
    if spec.domain == DOMAIN_NOISY_SHAPES:
        return render_noisy_shapes(spec, noise)
    return render_abstract_scene(spec, catalog)


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """
    Separable Gaussian blur with kernel radius ceil(3 sigma) and clamped edges; sigma=0 returns the input unchanged

    Parameters
    ----------
    img: RasterImage
    sigma: standard deviation in pixels, >= 0

    Returns
    -------
    RasterImage
    """
    if sigma < 0:
        raise ValueError('sigma must be non-negative')

    if sigma == 0:
        return RasterImage(img.pixels.copy())

    radius = int(math.ceil(3 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype = np.float64)
    kernel = np.exp(-offsets ** 2 / (2 * sigma ** 2))
    kernel /= kernel.sum()

    values = img.pixels.astype(np.float64)
    height, width = values.shape[:2]

    for axis, size in ((0, height), (1, width)):
        pad = [(0, 0)] * 3
        pad[axis] = (radius, radius)
        padded = np.pad(values, pad, mode = 'edge')
        blurred = np.zeros_like(values)
        for index, weight in enumerate(kernel):
            blurred += weight * np.take(padded, np.arange(index, index + size), axis = axis)
        values = blurred

    return RasterImage(to_uint8(values))


def side_by_side(left: RasterImage, right: RasterImage, gap: int = 2) -> RasterImage:
    """
    Places two images next to each other on a white strip; grayscale inputs are promoted to RGB when mixed
    """
    images = [left, right]
    channels = max(img.channels for img in images)
    pixels = [np.repeat(img.pixels, channels // img.channels, axis = 2) for img in images]

    height = max(p.shape[0] for p in pixels)
    width = sum(p.shape[1] for p in pixels) + gap
    strip = np.full((height, width, channels), PAPER, dtype = np.uint8)
    strip[:pixels[0].shape[0], :pixels[0].shape[1]] = pixels[0]
    strip[:pixels[1].shape[0], pixels[0].shape[1] + gap:] = pixels[1]

    return RasterImage(strip)
