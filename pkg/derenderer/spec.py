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
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from .constants import DOMAIN_NOISY_SHAPES, DOMAIN_ABSTRACT_SCENE, DOMAINS, DOMAIN_DEFAULTS, GRID_MAX, \
    RADIUS_MIN, RADIUS_MAX, SCENE_WIDTH, SCENE_HEIGHT, SCENE_SCALES
from .exceptions import InvalidDomain, InvalidObject, DomainMismatch, ConfigurationError
from .utils import round_half_away
from .utils.hasher import derive_rng

__all__ = [
    'ShapeKind', 'Circle', 'Line', 'Rectangle', 'SceneObject', 'SceneSpec', 'OrderingStrategy', 'canonical_order',
    'shape_from_array', 'object_from_array', 'check_same_domain'
]


class ShapeKind:
    """
    Kind of a NoisyShapes object, in declared kind order (used for sorting and token ids)

    * CIRCLE = 0
    * LINE = 1
    * RECTANGLE = 2

    """
    CIRCLE = 0
    LINE = 1
    RECTANGLE = 2

    NAMES = {0: 'circle', 1: 'line', 2: 'rectangle'}


def _check_grid(name: str, value: int):
    if type(value) is not int or not 0 <= value <= GRID_MAX:
        raise InvalidObject(f'{name}={value!r} outside grid range [0,{GRID_MAX}]')


@dataclass(frozen = True)
class Circle:
    cx: int
    cy: int
    radius: int

    kind = ShapeKind.CIRCLE
    domain = DOMAIN_NOISY_SHAPES

    def fields(self) -> tuple:
        return self.cx, self.cy, self.radius

    def validate(self):
        _check_grid('cx', self.cx)
        _check_grid('cy', self.cy)
        if type(self.radius) is not int or not RADIUS_MIN <= self.radius <= RADIUS_MAX:
            raise InvalidObject(f'radius={self.radius!r} outside [{RADIUS_MIN},{RADIUS_MAX}]')
        if self.cx - self.radius < 0 or self.cx + self.radius > GRID_MAX or \
                self.cy - self.radius < 0 or self.cy + self.radius > GRID_MAX:
            raise InvalidObject(f'{self} does not fit in the canvas')

    def bbox(self) -> tuple:
        return self.cx - self.radius, self.cy - self.radius, self.cx + self.radius, self.cy + self.radius


@dataclass(frozen = True)
class Line:
    x1: int
    y1: int
    x2: int
    y2: int
    arrow: bool = False
    dashed: bool = False

    kind = ShapeKind.LINE
    domain = DOMAIN_NOISY_SHAPES

    def fields(self) -> tuple:
        return self.x1, self.y1, self.x2, self.y2, int(self.arrow), int(self.dashed)

    def validate(self):
        for name in ('x1', 'y1', 'x2', 'y2'):
            _check_grid(name, getattr(self, name))
        if type(self.arrow) is not bool or type(self.dashed) is not bool:
            raise InvalidObject('arrow and dashed must be booleans')

    def bbox(self) -> tuple:
        return min(self.x1, self.x2), min(self.y1, self.y2), max(self.x1, self.x2), max(self.y1, self.y2)


@dataclass(frozen = True)
class Rectangle:
    x1: int
    y1: int
    x2: int
    y2: int

    kind = ShapeKind.RECTANGLE
    domain = DOMAIN_NOISY_SHAPES

    def fields(self) -> tuple:
        return self.x1, self.y1, self.x2, self.y2

    def validate(self):
        for name in ('x1', 'y1', 'x2', 'y2'):
            _check_grid(name, getattr(self, name))
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvalidObject(f'{self} corners are not strictly ordered')

    def bbox(self) -> tuple:
        return self.x1, self.y1, self.x2, self.y2


SHAPE_CLASSES = {ShapeKind.CIRCLE: Circle, ShapeKind.LINE: Line, ShapeKind.RECTANGLE: Rectangle}


@dataclass(frozen = True)
class SceneObject:
    """
    AbstractScene clip-art object, exactly 6 integers: category, subcategory, scale, flip and the (x, y) pixel
    position of the sprite center on the 500x400 scene canvas
    """
    category: int
    subcategory: int
    scale: int
    flip: int
    x: int
    y: int

    domain = DOMAIN_ABSTRACT_SCENE

    @property
    def kind(self) -> int:
        return self.category

    def fields(self) -> tuple:
        return self.subcategory, self.scale, self.flip, self.x, self.y

    def validate(self, catalog = None):
        values = (self.category, self.subcategory, self.scale, self.flip, self.x, self.y)
        if any(type(v) is not int for v in values):
            raise InvalidObject(f'{self} fields must be integers')

        if catalog is None:
            from .catalog import SpriteCatalog
            catalog = SpriteCatalog.default()

        if not 0 <= self.category < catalog.num_categories:
            raise InvalidObject(f'category={self.category} outside [0,{catalog.num_categories})')
        if not 0 <= self.subcategory < catalog.num_subcategories(self.category):
            raise InvalidObject(f'subcategory={self.subcategory} invalid for category {self.category}')
        if self.scale not in (0, 1, 2):
            raise InvalidObject(f'scale={self.scale} not in {{0,1,2}}')
        if self.flip not in (0, 1):
            raise InvalidObject(f'flip={self.flip} not in {{0,1}}')
        if not 0 <= self.x < SCENE_WIDTH or not 0 <= self.y < SCENE_HEIGHT:
            raise InvalidObject(f'position ({self.x},{self.y}) outside the {SCENE_WIDTH}x{SCENE_HEIGHT} scene')

    def size(self, catalog = None) -> tuple:
        if catalog is None:
            from .catalog import SpriteCatalog
            catalog = SpriteCatalog.default()
        base_width, base_height = catalog.base_size(self.category)
        factor = SCENE_SCALES[self.scale]
        return max(1, round_half_away(base_width * factor)), max(1, round_half_away(base_height * factor))

    def bbox(self, catalog = None) -> tuple:
        width, height = self.size(catalog)
        left = self.x - width // 2
        top = self.y - height // 2
        return left, top, left + width - 1, top + height - 1


DomainObject = Union[Circle, Line, Rectangle, SceneObject]


def type_key(obj: DomainObject) -> tuple:
    return (obj.kind,) + obj.fields()


def shape_from_array(values) -> Union[Circle, Line, Rectangle]:
    """
    Builds a NoisyShapes object from its nested-array form [kind, field, ...]

    Parameters
    ----------
    values: list of ints

    Returns
    -------
    Circle, Line or Rectangle
    """
    values = [int(v) for v in values]
    if not values or values[0] not in SHAPE_CLASSES:
        raise InvalidObject(f'Unknown shape array {values}')

    kind, params = values[0], values[1:]

    if kind == ShapeKind.LINE:
        if len(params) != 6:
            raise InvalidObject(f'Line expects 6 fields, {len(params)} given')
        return Line(*params[:4], arrow = bool(params[4]), dashed = bool(params[5]))

    cls = SHAPE_CLASSES[kind]
    if len(params) != len(cls.__dataclass_fields__):
        raise InvalidObject(f'{cls.__name__} expects {len(cls.__dataclass_fields__)} fields, {len(params)} given')

    return cls(*params)


def object_from_array(domain: str, values) -> DomainObject:
    if domain == DOMAIN_NOISY_SHAPES:
        return shape_from_array(values)
    elif domain == DOMAIN_ABSTRACT_SCENE:
        values = [int(v) for v in values]
        if len(values) != 6:
            raise InvalidObject(f'Scene objects are specified by 6 integers, {len(values)} given')
        return SceneObject(*values)
    raise InvalidDomain(f'Unknown domain "{domain}"')


def object_to_array(obj: DomainObject) -> list:
    return [int(v) for v in type_key(obj)]


@dataclass(frozen = True)
class SceneSpec:
    """
    A graphics program: an unordered collection of domain objects plus a domain tag and the canvas size in pixels.
    The object tuple keeps a sequence order (needed for tokenization) but equality of specifications as sets is
    tested with `same_objects`.
    """
    domain: str
    objects: Tuple[DomainObject, ...] = ()
    canvas: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise InvalidDomain(f'Unknown domain "{self.domain}"')

        object.__setattr__(self, 'objects', tuple(self.objects))

        if self.canvas is None:
            object.__setattr__(self, 'canvas', tuple(DOMAIN_DEFAULTS[self.domain]['canvas']))
        else:
            object.__setattr__(self, 'canvas', tuple(int(v) for v in self.canvas))

    def __len__(self):
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)

    def validate(self, check_count: bool = True, object_bounds: tuple = None, catalog = None):
        """
        Checks every object invariant and, optionally, the object count against the domain bounds

        Parameters
        ----------
        check_count: also enforce the object count bounds
        object_bounds: (min, max) overriding the domain bounds
        catalog: SpriteCatalog for AbstractScene validation

        Returns
        -------

        """
        for obj in self.objects:
            if obj.domain != self.domain:
                raise DomainMismatch(f'{obj} does not belong to domain "{self.domain}"')
            if self.domain == DOMAIN_ABSTRACT_SCENE:
                obj.validate(catalog)
            else:
                obj.validate()

        if check_count:
            low, high = object_bounds or DOMAIN_DEFAULTS[self.domain]['object_bounds']
            if not low <= len(self.objects) <= high:
                raise InvalidObject(f'{len(self.objects)} objects outside [{low},{high}] for "{self.domain}"')

    def multiset(self) -> Counter:
        return Counter(self.objects)

    def same_objects(self, other: 'SceneSpec') -> bool:
        return self.domain == other.domain and self.multiset() == other.multiset()

    def replace_objects(self, objects) -> 'SceneSpec':
        return SceneSpec(domain = self.domain, objects = tuple(objects), canvas = self.canvas)

    def to_array(self) -> list:
        return [object_to_array(obj) for obj in self.objects]

    def to_dict(self) -> dict:
        return {'domain': self.domain, 'canvas': list(self.canvas), 'objects': self.to_array()}

    @classmethod
    def from_array(cls, domain: str, arrays, canvas: tuple = None) -> 'SceneSpec':
        return cls(domain = domain, objects = tuple(object_from_array(domain, a) for a in arrays), canvas = canvas)

    @classmethod
    def from_dict(cls, data: dict) -> 'SceneSpec':
        if 'domain' not in data or 'objects' not in data:
            raise ValueError("Specification requires 'domain' and 'objects'")
        return cls.from_array(data['domain'], data['objects'], canvas = data.get('canvas'))


def check_same_domain(pred: SceneSpec, gt: SceneSpec):
    if pred.domain != gt.domain:
        raise DomainMismatch(f'Cannot compare "{pred.domain}" prediction with "{gt.domain}" ground truth')


@dataclass(frozen = True)
class OrderingStrategy:
    """
    Object ordering used to turn a specification into a sequence

    * type: kind/category, then all remaining fields
    * size: rendered bounding-box area descending, then type order
    * position: (y, x) of the bounding-box top-left, then type order
    * random: seeded permutation of the type order
    * asis: keep the given order

    """
    variant: str = 'type'
    seed: Optional[int] = field(default = None)

    VARIANTS = ('type', 'size', 'position', 'random', 'asis')

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ConfigurationError(f'Unknown ordering "{self.variant}", valid values are {self.VARIANTS}')
        if self.variant == 'random' and self.seed is None:
            object.__setattr__(self, 'seed', 0)

    @classmethod
    def parse(cls, value: str) -> 'OrderingStrategy':
        """
        Parses "type", "size", "position", "asis", "random" or "random:<seed>"
        """
        name, _, seed = value.partition(':')
        if seed:
            if name != 'random':
                raise ConfigurationError(f'Only the random ordering takes a seed, got "{value}"')
            return cls(name, int(seed))
        return cls(name)

    def with_seed(self, seed: int) -> 'OrderingStrategy':
        return OrderingStrategy(self.variant, seed) if self.variant == 'random' else self

    def __str__(self):
        return f'random:{self.seed}' if self.variant == 'random' else self.variant


def _bbox(obj: DomainObject, catalog) -> tuple:
    return obj.bbox(catalog) if obj.domain == DOMAIN_ABSTRACT_SCENE else obj.bbox()


def _area(obj: DomainObject, catalog = None) -> int:
    x1, y1, x2, y2 = _bbox(obj, catalog)
    return (x2 - x1 + 1) * (y2 - y1 + 1)


def canonical_order(spec: SceneSpec, strategy: OrderingStrategy, catalog = None) -> SceneSpec:
    """
    Permutes the objects of `spec` according to `strategy`. Every strategy except asis is a deterministic total
    order (ties broken lexicographically over all fields), so the result does not depend on the input order.

    Parameters
    ----------
    spec: SceneSpec
    strategy: OrderingStrategy
    catalog: SpriteCatalog giving AbstractScene sprite sizes for the size and position orders, defaults to the
        standard catalog

    Returns
    -------
    SceneSpec
    """
    objects = list(spec.objects)

    if strategy.variant == 'asis':
        return spec

    by_type = sorted(objects, key = type_key)

    if strategy.variant == 'type':
        ordered = by_type
    elif strategy.variant == 'size':
        ordered = sorted(objects, key = lambda o: (-_area(o, catalog),) + type_key(o))
    elif strategy.variant == 'position':
        ordered = sorted(objects, key = lambda o: (_bbox(o, catalog)[1], _bbox(o, catalog)[0]) + type_key(o))
    else:
        permutation = derive_rng(strategy.seed, 'random-order').permutation(len(by_type))
        ordered = [by_type[i] for i in permutation]

    return spec.replace_objects(ordered)
