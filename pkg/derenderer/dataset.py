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

""" Procedural generation of paired (image, specification) datasets and manifest management
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

from tqdm import tqdm

from .catalog import SpriteCatalog
from .constants import DOMAIN_NOISY_SHAPES, DOMAIN_DEFAULTS, DOMAINS, GRID_MAX, \
    RADIUS_MIN, RADIUS_MAX, SCENE_BIN, SCENE_X_BINS, SCENE_Y_BINS, DEFAULT_CATEGORIES
from .exceptions import ResampleLimit, OverLength, ConfigurationError, InvalidDomain
from .render import RasterImage, NoiseParams, render
from .spec import SceneSpec, Circle, Line, Rectangle, SceneObject, ShapeKind
from .utils import atomic_write, resolve_threads, round_half_away
from .utils.hasher import derive_rng, derive_seed, example_rng
from .vocabulary import Vocabulary, encode_tokens

__all__ = ['DatasetConfig', 'DatasetManifest', 'ManifestEntry', 'sample_spec', 'generate_dataset', 'boxes_overlap']

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 1000
OVERLAP_MARGIN = 1

MANIFEST_FILE = 'manifest.jsonl'
METADATA_FILE = 'dataset.json'
VOCAB_FILE = 'vocab.txt'
IMAGE_DIR = 'images'


class DatasetConfig:
    """
    Dataset generation settings. Unset values resolve to the desk-scale defaults of the domain.
    """

    def __init__(self, config: dict = None):

        self.config = {
            'domain': DOMAIN_NOISY_SHAPES,
            'count': None,
            'seed': 0,
            'test_count': None,
            'test_fraction': None,
            'min_objects': None,
            'max_objects': None,
            'canvas': None,
            'noise': NoiseParams().to_dict(),
            'categories': list(DEFAULT_CATEGORIES),
            'max_length': None,
            'threads': None,
        }

        if type(config) is dict:
            self.config.update(config)

        self.__resolve()

    def __resolve(self):
        domain = self.config['domain']
        if domain not in DOMAINS:
            raise InvalidDomain(f'Unknown domain "{domain}"')

        defaults = DOMAIN_DEFAULTS[domain]

        if self.config['count'] is None:
            self.config['count'] = defaults['count']

        low, high = defaults['desk_object_bounds']
        if self.config['min_objects'] is None:
            self.config['min_objects'] = low
        if self.config['max_objects'] is None:
            self.config['max_objects'] = high

        if self.config['canvas'] is None:
            self.config['canvas'] = list(defaults['canvas'])

        if self.config['max_length'] is None:
            self.config['max_length'] = defaults['max_length']

        if self.config['test_count'] is None:
            fraction = self.config['test_fraction']
            if fraction is None:
                fraction = defaults['test_count'] / defaults['count']
            self.config['test_count'] = round_half_away(self.config['count'] * fraction)

        self.validate()

    def validate(self):
        count = self.config['count']
        if type(count) is not int or count < 0:
            raise ConfigurationError(f'count must be a non-negative integer, got {count!r}')

        if not 0 <= self.config['test_count'] <= count:
            raise ConfigurationError(f'test_count={self.config["test_count"]} outside [0,{count}]')

        low, high = self.config['min_objects'], self.config['max_objects']
        bound_low, bound_high = DOMAIN_DEFAULTS[self.config['domain']]['object_bounds']
        if not bound_low <= low <= high <= bound_high:
            raise ConfigurationError(
                f'Object bounds [{low},{high}] must lie within [{bound_low},{bound_high}] for "{self.config["domain"]}"'
            )

        if self.config['seed'] < 0:
            raise ConfigurationError('seed must be non-negative')

        NoiseParams.from_dict(self.config['noise'])

    def __getattr__(self, item):
        if item != 'config' and item in self.config:
            return self.config[item]
        raise AttributeError("'{}' object has no attribute '{}'".format(self.__class__.__name__, item))

    @classmethod
    def create_from_file(cls, config_file: str) -> 'DatasetConfig':
        with open(os.path.abspath(config_file), 'r') as fp:
            return cls(json.load(fp))

    @property
    def object_bounds(self) -> tuple:
        return self.config['min_objects'], self.config['max_objects']

    def noise_params(self) -> NoiseParams:
        return NoiseParams.from_dict(self.config['noise'])

    def catalog(self) -> SpriteCatalog:
        return SpriteCatalog(self.config['categories'])

    def to_dict(self) -> dict:
        return dict(self.config)


def boxes_overlap(a: tuple, b: tuple, margin: int = OVERLAP_MARGIN) -> bool:
    """
    True when two inclusive (x1, y1, x2, y2) boxes are closer than `margin` grid units on both axes
    """
    return a[0] <= b[2] + margin and b[0] <= a[2] + margin and a[1] <= b[3] + margin and b[1] <= a[3] + margin


def _sample_shape(rng):
    kind = int(rng.integers(0, 3))

    if kind == ShapeKind.CIRCLE:
        radius = int(rng.integers(RADIUS_MIN, RADIUS_MAX + 1))
        cx = int(rng.integers(radius, GRID_MAX - radius + 1))
        cy = int(rng.integers(radius, GRID_MAX - radius + 1))
        return Circle(cx, cy, radius)

    if kind == ShapeKind.LINE:
        while True:
            x1, y1, x2, y2 = (int(v) for v in rng.integers(0, GRID_MAX + 1, size = 4))
            if (x1, y1) != (x2, y2):
                break
        return Line(x1, y1, x2, y2, arrow = bool(rng.integers(0, 2)), dashed = bool(rng.integers(0, 2)))

    x1, x2 = sorted(int(v) for v in rng.choice(GRID_MAX + 1, size = 2, replace = False))
    y1, y2 = sorted(int(v) for v in rng.choice(GRID_MAX + 1, size = 2, replace = False))
    return Rectangle(x1, y1, x2, y2)


def _sample_scene_object(rng, catalog: SpriteCatalog) -> SceneObject:
    category = int(rng.integers(0, catalog.num_categories))
    subcategory = int(rng.integers(0, catalog.num_subcategories(category)))
    scale = int(rng.integers(0, 3))
    flip = int(rng.integers(0, 2))
    x = int(rng.integers(0, SCENE_X_BINS)) * SCENE_BIN + SCENE_BIN // 2
    y = int(rng.integers(0, SCENE_Y_BINS)) * SCENE_BIN + SCENE_BIN // 2
    return SceneObject(category, subcategory, scale, flip, x, y)


def sample_spec(domain: str, rng, object_bounds: tuple = None, catalog: SpriteCatalog = None,
                canvas: tuple = None, vocab: Vocabulary = None, max_length: int = None) -> SceneSpec:
    """
    Samples a random specification: an object count uniform over the bounds, then every field uniform over its
    valid range. NoisyShapes specifications whose object bounding boxes come within one grid unit of each other are
    rejected and resampled as a whole, as are specifications whose token encoding would not fit `max_length`.

    Parameters
    ----------
    domain: 'noisy_shapes' or 'abstract_scene'
    rng: numpy.random.Generator
    object_bounds: (min, max) objects, defaults to the desk-scale bounds of the domain
    catalog: SpriteCatalog (AbstractScene)
    canvas: (width, height), defaults to the domain canvas
    vocab: Vocabulary used for the length check, built for the domain when omitted
    max_length: maximum encoded length, defaults to the domain maximum

    Returns
    -------
    SceneSpec
    """
    if domain not in DOMAINS:
        raise InvalidDomain(f'Unknown domain "{domain}"')

    catalog = catalog or SpriteCatalog.default()
    low, high = object_bounds or DOMAIN_DEFAULTS[domain]['desk_object_bounds']
    vocab = vocab or Vocabulary.for_domain(domain, catalog)

    for attempt in range(MAX_RESAMPLES):
        count = int(rng.integers(low, high + 1))

        if domain == DOMAIN_NOISY_SHAPES:
            objects = [_sample_shape(rng) for _ in range(count)]
            boxes = [obj.bbox() for obj in objects]
            if any(boxes_overlap(boxes[i], boxes[j]) for i in range(count) for j in range(i + 1, count)):
                continue
        else:
            objects = [_sample_scene_object(rng, catalog) for _ in range(count)]

        spec = SceneSpec(domain = domain, objects = tuple(objects), canvas = canvas)

        try:
            encode_tokens(spec, vocab, max_length)
        except OverLength:
            continue

        return spec

    raise ResampleLimit(f'No valid "{domain}" specification after {MAX_RESAMPLES} attempts, bounds [{low},{high}]')


@dataclass(frozen = True)
class ManifestEntry:
    id: int
    split: str
    image: str
    spec: SceneSpec

    def to_json(self) -> str:
        record = {'id': self.id, 'split': self.split, 'image': self.image, 'spec': self.spec.to_array()}
        return json.dumps(record, separators = (',', ':'))

    @classmethod
    def from_json(cls, line: str, domain: str, canvas: tuple) -> 'ManifestEntry':
        record = json.loads(line)
        return cls(
            id = int(record['id']), split = record['split'], image = record['image'],
            spec = SceneSpec.from_array(domain, record['spec'], canvas = canvas)
        )


class DatasetManifest:
    """
    Generated dataset: metadata plus one entry per example, in id order. Image paths are relative to `root`.
    """

    def __init__(self, domain: str, seed: int, entries: List[ManifestEntry], canvas: tuple = None,
                 root: str = None, config: dict = None):
        self.domain = domain
        self.seed = seed
        self.entries = list(entries)
        self.canvas = tuple(canvas or DOMAIN_DEFAULTS[domain]['canvas'])
        self.root = root
        self.config = config or {}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def train(self) -> List[ManifestEntry]:
        return [entry for entry in self.entries if entry.split == 'train']

    @property
    def test(self) -> List[ManifestEntry]:
        return [entry for entry in self.entries if entry.split == 'test']

    def split(self, name: str) -> List[ManifestEntry]:
        if name not in ('train', 'test'):
            raise ValueError(f'Unknown split "{name}"')
        return [entry for entry in self.entries if entry.split == name]

    def catalog(self) -> SpriteCatalog:
        return SpriteCatalog(self.config.get('categories', DEFAULT_CATEGORIES))

    def vocabulary(self) -> Vocabulary:
        return Vocabulary.for_domain(self.domain, self.catalog())

    def image_path(self, entry: ManifestEntry) -> str:
        return os.path.join(self.root or '.', entry.image)

    def load_image(self, entry: ManifestEntry) -> RasterImage:
        return RasterImage.load(self.image_path(entry))

    def subsample(self, fraction: float, seed: int = None) -> 'DatasetManifest':
        """
        Deterministic subset of the train split of size floor(fraction * train); the test split is untouched. The
        subset is a prefix of one seeded permutation, so smaller fractions are nested in larger ones.

        Parameters
        ----------
        fraction: 0 < fraction <= 1
        seed: permutation seed, defaults to the dataset seed

        Returns
        -------
        DatasetManifest
        """
        if not 0 < fraction <= 1:
            raise ValueError(f'fraction={fraction} must be in (0, 1]')

        if fraction == 1:
            return self

        seed = self.seed if seed is None else seed
        train = self.train
        keep_count = int(fraction * len(train))
        order = derive_rng(seed, 'subsample').permutation(len(train))
        kept = {train[i].id for i in order[:keep_count]}

        entries = [entry for entry in self.entries if entry.split == 'test' or entry.id in kept]
        return DatasetManifest(self.domain, self.seed, entries, self.canvas, self.root, self.config)

    def validation_split(self, fraction: float = 0.1, seed: int = None) -> tuple:
        """
        Fixed (train, validation) partition of the train split used for checkpoint selection

        Parameters
        ----------
        fraction: share of the train split held out
        seed: defaults to the dataset seed

        Returns
        -------
        tuple of (list of ManifestEntry, list of ManifestEntry)
        """
        seed = self.seed if seed is None else seed
        train = self.train
        held_out = int(fraction * len(train))
        order = derive_rng(seed, 'validation').permutation(len(train))
        validation_ids = {train[i].id for i in order[:held_out]}

        return [e for e in train if e.id not in validation_ids], [e for e in train if e.id in validation_ids]

    def metadata(self) -> dict:
        return {
            'domain': self.domain, 'seed': self.seed, 'count': self.count, 'canvas': list(self.canvas),
            'config': self.config
        }

    def save(self, directory: str):
        """
        Writes dataset.json and then manifest.jsonl, each atomically
        """
        os.makedirs(directory, exist_ok = True)

        with atomic_write(os.path.join(directory, METADATA_FILE), 'w') as fp:
            fp.write(json.dumps(self.metadata(), sort_keys = True, indent = 2) + '\n')

        with atomic_write(os.path.join(directory, MANIFEST_FILE), 'w') as fp:
            for entry in self.entries:
                fp.write(entry.to_json() + '\n')

        self.root = directory

    @classmethod
    def load(cls, path: str) -> 'DatasetManifest':
        """
        Loads a manifest from a dataset directory (or its manifest.jsonl path)
        """
        directory = path if os.path.isdir(path) else os.path.dirname(os.path.abspath(path))

        with open(os.path.join(directory, METADATA_FILE), 'r') as fp:
            metadata = json.load(fp)

        domain = metadata['domain']
        canvas = tuple(metadata['canvas'])

        entries = []
        with open(os.path.join(directory, MANIFEST_FILE), 'r') as fp:
            for line in fp:
                if line.strip():
                    entries.append(ManifestEntry.from_json(line, domain, canvas))

        return cls(domain, metadata['seed'], entries, canvas = canvas, root = directory,
                   config = metadata.get('config'))


def _image_name(index: int, domain: str) -> str:
    extension = 'pgm' if domain == DOMAIN_NOISY_SHAPES else 'ppm'
    return f'{IMAGE_DIR}/{index:06d}.{extension}'


def generate_dataset(config: DatasetConfig, out_dir: str, threads: int = None,
                     progress: bool = False) -> DatasetManifest:
    """
    Generates `config.count` examples: for every index a specification is sampled from its own derived generator and
    rendered with its own noise seed, so examples can be produced in any order and regeneration is byte-identical.
    The test split is a seeded permutation prefix. The manifest is written last.

    Parameters
    ----------
    config: DatasetConfig
    out_dir: output directory, created if missing
    threads: worker cap, falls back to the config value and then DERENDER_THREADS
    progress: show a progress bar

    Returns
    -------
    DatasetManifest
    """
    if type(config) is dict:
        config = DatasetConfig(config)

    threads = resolve_threads(threads or config.threads)
    catalog = config.catalog()
    vocab = Vocabulary.for_domain(config.domain, catalog)
    noise = config.noise_params()
    canvas = tuple(config.canvas)

    os.makedirs(os.path.join(out_dir, IMAGE_DIR), exist_ok = True)

    test_ids = set(int(i) for i in derive_rng(config.seed, 'split').permutation(config.count)[:config.test_count])

    logger.info(f'Generating {config.count} "{config.domain}" examples ({len(test_ids)} test) '
                f'with seed {config.seed} into {out_dir}')

    def build(index: int) -> ManifestEntry:
        rng = example_rng(config.seed, index, 'spec')
        spec = sample_spec(config.domain, rng, object_bounds = config.object_bounds, catalog = catalog,
                           canvas = canvas, vocab = vocab, max_length = config.max_length)
        image = render(spec, noise.with_seed(derive_seed(config.seed, f'noise-{index}')), catalog)

        name = _image_name(index, config.domain)
        image.save(os.path.join(out_dir, name))

        return ManifestEntry(index, 'test' if index in test_ids else 'train', name, spec)

    with ThreadPoolExecutor(max_workers = threads) as executor:
        entries = list(tqdm(
            executor.map(build, range(config.count)), total = config.count, disable = not progress, desc = 'gen'
        ))

    vocab.save(os.path.join(out_dir, VOCAB_FILE))

    # Worker count does not influence the output
    metadata = config.to_dict()
    metadata.pop('threads')

    manifest = DatasetManifest(config.domain, config.seed, entries, canvas = canvas, config = metadata)
    manifest.save(out_dir)

    logger.info(f'Wrote manifest with {len(manifest.train)} train and {len(manifest.test)} test examples')

    return manifest
