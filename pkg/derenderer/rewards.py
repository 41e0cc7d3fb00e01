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

""" Reward functions comparing a predicted specification with the ground truth, and the joint reward schedule
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import DOMAIN_NOISY_SHAPES, DOMAIN_ABSTRACT_SCENE, GRID_SIZE, SCENE_WIDTH, SCENE_HEIGHT, \
    EVAL_BINS, PIXEL_BUCKETS, IMAGE_REWARD_EPS
from .exceptions import ShapeMismatch, ConfigurationError
from .render import RasterImage, gaussian_blur, render
from .spec import SceneSpec, OrderingStrategy, canonical_order, check_same_domain, ShapeKind
from .utils.hasher import derive_rng

__all__ = [
    'RewardKind', 'iou_reward', 'inference_reward', 'inference_counts', 'object_slots', 'image_distance',
    'image_reward', 'next_reward', 'pixel_buckets', 'calibrate_image_reward_scale', 'ALIGNMENTS', 'REWARD_NAMES'
]

logger = logging.getLogger(__name__)

REWARD_NAMES = ('iou', 'inference', 'image')
ALIGNMENTS = ('index', 'hungarian')

MAX_PAIRING_ROUNDS = 20

# Field slot types per NoisyShapes kind, 'coord' slots are binned, 'flag' slots compared exactly
FIELD_TYPES = {
    ShapeKind.CIRCLE: ('coord', 'coord', 'coord'),
    ShapeKind.LINE: ('coord', 'coord', 'coord', 'coord', 'flag', 'flag'),
    ShapeKind.RECTANGLE: ('coord', 'coord', 'coord', 'coord'),
}


@dataclass(frozen = True)
class RewardKind:
    """
    A single reward ('iou', 'inference', 'image') or the alternating joint reward taking `first_steps`
    mini-batches with `first` and then `second_steps` with `second`
    """
    name: str
    first: Optional['RewardKind'] = None
    second: Optional['RewardKind'] = None
    first_steps: int = 1
    second_steps: int = 1

    def __post_init__(self):
        if self.name == 'joint':
            if self.first is None or self.second is None:
                raise ConfigurationError('Joint reward needs two operands')
            if self.first.is_joint or self.second.is_joint:
                raise ConfigurationError('Joint reward operands cannot be joint rewards')
            if self.first_steps < 1 or self.second_steps < 1:
                raise ConfigurationError('Joint reward step counts must be >= 1')
        elif self.name not in REWARD_NAMES:
            raise ConfigurationError(f'Unknown reward "{self.name}", valid values are {REWARD_NAMES} or joint')

    @property
    def is_joint(self) -> bool:
        return self.name == 'joint'

    @classmethod
    def parse(cls, value: str) -> 'RewardKind':
        """
        Parses "iou", "inference", "image" or "joint:<r1>:<r2>:<a1>:<a2>"
        """
        parts = value.split(':')

        if parts[0] != 'joint':
            if len(parts) != 1:
                raise ConfigurationError(f'Unexpected arguments in reward "{value}"')
            return cls(parts[0])

        if len(parts) != 5:
            raise ConfigurationError(f'Joint reward format is joint:r1:r2:a1:a2, got "{value}"')

        try:
            first_steps, second_steps = int(parts[3]), int(parts[4])
        except ValueError:
            raise ConfigurationError(f'Joint reward step counts must be integers, got "{value}"')

        return cls('joint', cls(parts[1]), cls(parts[2]), first_steps, second_steps)

    def __str__(self):
        if self.is_joint:
            return f'joint:{self.first}:{self.second}:{self.first_steps}:{self.second_steps}'
        return self.name


def next_reward(kind: RewardKind, step: int) -> RewardKind:
    """
    Reward used at optimizer step `step`: periodic with period a1 + a2, the first a1 steps of every period use r1

    Parameters
    ----------
    kind: RewardKind
    step: 0-based step

    Returns
    -------
    RewardKind (never joint)
    """
    if not kind.is_joint:
        return kind

    position = step % (kind.first_steps + kind.second_steps)
    return kind.first if position < kind.first_steps else kind.second


def iou_reward(pred: SceneSpec, gt: SceneSpec) -> float:
    """
    Multiset intersection over union of the objects under exact equality of every field; 1 when both are empty
    """
    check_same_domain(pred, gt)

    pred_counts = Counter(pred.objects)
    gt_counts = Counter(gt.objects)

    intersection = sum((pred_counts & gt_counts).values())
    union = sum((pred_counts | gt_counts).values())

    return 1.0 if union == 0 else intersection / union


def _bin(value: int, upper: float) -> int:
    return int(value * EVAL_BINS // upper)


def object_slots(obj) -> tuple:
    """
    Property slots of an object for the inference comparison, as (type, value) pairs. NoisyShapes objects use a
    kind slot followed by the fields of that kind (3 for a circle, 4 for a rectangle, 6 for a line); AbstractScene
    objects use their six integers.
    """
    if obj.domain == DOMAIN_ABSTRACT_SCENE:
        return (
            ('cat', obj.category), ('cat', obj.subcategory), ('cat', obj.scale), ('cat', obj.flip),
            ('bin', _bin(obj.x, SCENE_WIDTH)), ('bin', _bin(obj.y, SCENE_HEIGHT))
        )

    slots = [('kind', obj.kind)]
    for slot_type, value in zip(FIELD_TYPES[obj.kind], obj.fields()):
        slots.append(('bin', _bin(value, GRID_SIZE)) if slot_type == 'coord' else ('cat', int(value)))
    return tuple(slots)


def _agreement(pred_slots: tuple, gt_slots: tuple) -> int:
    # fields of different shape kinds are different properties
    if pred_slots[0][0] == 'kind' and pred_slots[0] != gt_slots[0]:
        return 0
    return sum(1 for a, b in zip(pred_slots, gt_slots) if a == b)


def _pairing_counts(pred_slots: list, gt_slots: list, pairs) -> tuple:
    """
    (matched, total) of a pairing: a pair counts the slots of its longer side, an unpaired object its own slots
    """
    total = sum(len(s) for s in pred_slots) + sum(len(s) for s in gt_slots)
    matched = 0
    for p, g in pairs:
        total -= min(len(pred_slots[p]), len(gt_slots[g]))
        matched += _agreement(pred_slots[p], gt_slots[g])
    return matched, total


def _best_pairing(pred_slots: list, gt_slots: list, pairs: list) -> list:
    """
    Pairing maximizing matched / total, by repeated assignment on agreement + ratio * shared slots starting from
    the ratio of `pairs`. Every pairing considered pairs min(m, n) objects, so the result is never worse than `pairs`.
    """
    agreement = np.array([[_agreement(p, g) for g in gt_slots] for p in pred_slots], dtype = np.float64)
    shared = np.array([[min(len(p), len(g)) for g in gt_slots] for p in pred_slots], dtype = np.float64)

    matched, total = _pairing_counts(pred_slots, gt_slots, pairs)
    ratio = matched / total

    for _ in range(MAX_PAIRING_ROUNDS):
        rows, cols = linear_sum_assignment(agreement + ratio * shared, maximize = True)
        candidate = list(zip(rows.tolist(), cols.tolist()))
        matched, total = _pairing_counts(pred_slots, gt_slots, candidate)
        if matched / total <= ratio + 1e-12:
            break
        pairs, ratio = candidate, matched / total

    return pairs


def inference_counts(pred: SceneSpec, gt: SceneSpec, align: str = 'index') -> tuple:
    """
    Failed and total property slots between a prediction and its ground truth

    Both sides are put in type order. With 'index' alignment the k-th objects are compared; with 'hungarian' the
    pairing with the highest fraction of agreeing slots is used. A pair of objects counts the slots of the longer
    one, so shape kinds with fewer fields are not padded; unpaired objects count all their slots as failures.

    Parameters
    ----------
    pred: SceneSpec
    gt: SceneSpec
    align: 'index' or 'hungarian'

    Returns
    -------
    tuple of (failed, total)
    """
    check_same_domain(pred, gt)

    if align not in ALIGNMENTS:
        raise ConfigurationError(f'Unknown alignment "{align}", valid values are {ALIGNMENTS}')

    order = OrderingStrategy('type')

    pred_slots = [object_slots(o) for o in canonical_order(pred, order).objects]
    gt_slots = [object_slots(o) for o in canonical_order(gt, order).objects]

    pairs = [(k, k) for k in range(min(len(pred_slots), len(gt_slots)))]
    matched, total = _pairing_counts(pred_slots, gt_slots, pairs)
    if total == 0:
        return 0, 0

    if align == 'hungarian' and pairs:
        matched, total = _pairing_counts(pred_slots, gt_slots, _best_pairing(pred_slots, gt_slots, pairs))

    return total - matched, total


def inference_reward(pred: SceneSpec, gt: SceneSpec, align: str = 'index') -> float:
    """
    1 - inference error, where the error is the fraction of property slots that fail to match
    """
    failed, total = inference_counts(pred, gt, align)
    return 1.0 if total == 0 else 1.0 - failed / total


def pixel_buckets(img: RasterImage) -> np.ndarray:
    return img.pixels.astype(np.int64) * PIXEL_BUCKETS // 256


def _check_dimensions(a: RasterImage, b: RasterImage):
    if a.pixels.shape != b.pixels.shape:
        raise ShapeMismatch(f'Image {a!r} cannot be compared with {b!r}')


def image_distance(image: RasterImage, rendered: RasterImage, domain: str, sigma: float = 2.0) -> float:
    """
    Distance between an input image and the render of a prediction

    * NoisyShapes: squared l2 distance of [0,1] intensities after blurring the render with `sigma`
    * AbstractScene: number of pixels whose channels do not all fall in the same of 20 equal buckets

    Parameters
    ----------
    image: input image I
    rendered: render of the predicted specification
    domain
    sigma: blur of the NoisyShapes render

    Returns
    -------
    float
    """
    _check_dimensions(image, rendered)

    if domain == DOMAIN_NOISY_SHAPES:
        blurred = gaussian_blur(rendered, sigma)
        difference = image.pixels.astype(np.float64) / 255.0 - blurred.pixels.astype(np.float64) / 255.0
        return float(np.sum(difference ** 2))

    mismatched = np.any(pixel_buckets(image) != pixel_buckets(rendered), axis = 2)
    return float(mismatched.sum())


def image_reward(distance: float, domain: str, c: float = None, width: int = None, height: int = None) -> float:
    """
    NoisyShapes: min(1, c / (d + eps)); AbstractScene: 1 - d / (w * h)
    """
    if distance < 0:
        raise ValueError('distance must be non-negative')

    if domain == DOMAIN_NOISY_SHAPES:
        if c is None:
            raise ConfigurationError('The NoisyShapes image reward needs a scale c')
        return min(1.0, c / (distance + IMAGE_REWARD_EPS))

    return float(np.clip(1.0 - distance / (width * height), 0.0, 1.0))


def calibrate_image_reward_scale(manifest, sigma: float = 2.0, sample: int = 64, seed: int = 0) -> float:
    """
    Scale c of the NoisyShapes image reward: the median distance between a noisy input image and the blurred
    noiseless render of its own ground truth, over a seeded sample of the train split. A correct prediction then
    scores about 1.

    Parameters
    ----------
    manifest: DatasetManifest
    sigma: blur used by the image distance
    sample: number of train examples
    seed: sampling seed

    Returns
    -------
    float
    """
    train = manifest.train
    if not train:
        return 1.0

    order = derive_rng(seed, 'calibrate').permutation(len(train))[:sample]
    catalog = manifest.catalog()

    distances = []
    for index in order:
        entry = train[index]
        distances.append(image_distance(
            manifest.load_image(entry), render(entry.spec, catalog = catalog), manifest.domain, sigma
        ))

    c = float(np.median(distances))
    if c <= 0:
        c = 1.0

    logger.info(f'Calibrated image reward scale c={c:.6g} on {len(distances)} examples')
    return c
