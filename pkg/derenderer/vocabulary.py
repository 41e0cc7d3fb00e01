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
from dataclasses import dataclass
from typing import Sequence, Tuple

from .catalog import SpriteCatalog
from .constants import PAD_ID, BOS_ID, EOS_ID, PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, DOMAIN_NOISY_SHAPES, \
    DOMAIN_ABSTRACT_SCENE, DOMAIN_DEFAULTS, GRID_SIZE, RADIUS_MIN, RADIUS_MAX, SCENE_BIN, SCENE_X_BINS, \
    SCENE_Y_BINS
from .exceptions import OverLength, InvalidDomain, InvalidObject
from .spec import SceneSpec, ShapeKind, Circle, Line, Rectangle, SceneObject
from .utils import atomic_write

__all__ = ['Vocabulary', 'TokenSequence', 'encode_tokens', 'decode_tokens']

KIND_TOKENS = {ShapeKind.CIRCLE: 'CIRCLE', ShapeKind.LINE: 'LINE', ShapeKind.RECTANGLE: 'RECT'}

# Slot grammar per NoisyShapes kind: (slot type, min, max)
COORD = ('value', 0, GRID_SIZE - 1)
RADIUS = ('value', RADIUS_MIN, RADIUS_MAX)
BOOL = ('bool', 0, 1)

SHAPE_SLOTS = {
    ShapeKind.CIRCLE: (COORD, COORD, RADIUS),
    ShapeKind.LINE: (COORD, COORD, COORD, COORD, BOOL, BOOL),
    ShapeKind.RECTANGLE: (COORD, COORD, COORD, COORD),
}

SCENE_SLOTS = ('sub', 'scale', 'flip', 'x', 'y')


@dataclass(frozen = True)
class TokenSequence:
    """
    Bounded sequence of vocabulary ids: BOS, content, EOS, then PAD up to `max_length`
    """
    ids: Tuple[int, ...]
    max_length: int

    def __post_init__(self):
        object.__setattr__(self, 'ids', tuple(int(i) for i in self.ids))

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def content(self) -> Tuple[int, ...]:
        """
        Ids after the leading BOS up to (excluding) the first EOS
        """
        ids = self.ids[1:] if self.ids and self.ids[0] == BOS_ID else self.ids
        if EOS_ID in ids:
            ids = ids[:ids.index(EOS_ID)]
        return ids

    def padded(self) -> 'TokenSequence':
        if len(self.ids) >= self.max_length:
            return self
        return TokenSequence(self.ids + (PAD_ID,) * (self.max_length - len(self.ids)), self.max_length)


class Vocabulary:
    """
    Bijection between token strings and ids for one domain. Ids 0, 1 and 2 are always PAD, BOS and EOS.
    """

    def __init__(self, domain: str, tokens: Sequence[str], catalog: SpriteCatalog = None):
        if domain not in DOMAIN_DEFAULTS:
            raise InvalidDomain(f'Unknown domain "{domain}"')

        tokens = list(tokens)
        if tokens[:3] != [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN]:
            raise ValueError('Vocabulary must start with the reserved tokens PAD, BOS, EOS')

        if len(set(tokens)) != len(tokens):
            raise ValueError('Vocabulary tokens must be unique')

        self.domain = domain
        self.tokens = tokens
        self.token_ids = {token: idx for idx, token in enumerate(tokens)}
        self.catalog = catalog or SpriteCatalog.default()

        # id -> (slot type, value)
        self.slot_of = {}
        for idx, token in enumerate(tokens):
            slot = self.__classify(token)
            if slot is not None:
                self.slot_of[idx] = slot

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.domain == other.domain and self.tokens == other.tokens

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def default_max_length(self) -> int:
        return DOMAIN_DEFAULTS[self.domain]['max_length']

    @staticmethod
    def __classify(token: str):
        if token in (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN):
            return None

        for kind, name in KIND_TOKENS.items():
            if token == name:
                return 'kind', kind

        if token in ('T', 'F'):
            return 'bool', int(token == 'T')

        for prefix, slot in (('V', 'value'), ('CAT', 'cat'), ('SUB', 'sub'), ('SCALE', 'scale'),
                             ('FLIP', 'flip'), ('X', 'x'), ('Y', 'y')):
            if token.startswith(prefix) and token[len(prefix):].isdigit():
                return slot, int(token[len(prefix):])

        raise ValueError(f'Token "{token}" does not belong to any slot')

    @classmethod
    def for_domain(cls, domain: str, catalog: SpriteCatalog = None) -> 'Vocabulary':
        """
        Builds the vocabulary of the grammar of `domain`

        Parameters
        ----------
        domain: 'noisy_shapes' or 'abstract_scene'
        catalog: SpriteCatalog, determines the AbstractScene category/subcategory tokens

        Returns
        -------
        Vocabulary
        """
        tokens = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN]

        if domain == DOMAIN_NOISY_SHAPES:
            tokens += [KIND_TOKENS[kind] for kind in sorted(KIND_TOKENS)]
            tokens += [f'V{v}' for v in range(GRID_SIZE)]
            tokens += ['T', 'F']

        elif domain == DOMAIN_ABSTRACT_SCENE:
            catalog = catalog or SpriteCatalog.default()
            tokens += [f'CAT{c}' for c in range(catalog.num_categories)]
            tokens += [f'SUB{s}' for s in range(catalog.max_subcategories)]
            tokens += [f'SCALE{s}' for s in range(3)]
            tokens += [f'FLIP{f}' for f in range(2)]
            tokens += [f'X{b}' for b in range(SCENE_X_BINS)]
            tokens += [f'Y{b}' for b in range(SCENE_Y_BINS)]

        else:
            raise InvalidDomain(f'Unknown domain "{domain}"')

        return cls(domain, tokens, catalog = catalog)

    def encode_token(self, token: str) -> int:
        return self.token_ids[token]

    def decode_token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def to_text(self) -> str:
        lines = [f'#vocab domain={self.domain} size={self.size}']
        lines += [f'{idx}\t{token}' for idx, token in enumerate(self.tokens)]
        return '\n'.join(lines) + '\n'

    def save(self, path: str):
        with atomic_write(path, 'w') as fp:
            fp.write(self.to_text())

    @classmethod
    def from_text(cls, text: str, catalog: SpriteCatalog = None) -> 'Vocabulary':
        lines = [line for line in text.splitlines() if line.strip()]

        if not lines or not lines[0].startswith('#vocab'):
            raise ValueError('Missing "#vocab" header line')

        header = dict(item.split('=', 1) for item in lines[0].split()[1:])
        if 'domain' not in header or 'size' not in header:
            raise ValueError('Vocabulary header requires domain and size')

        tokens = []
        for expected_id, line in enumerate(lines[1:]):
            token_id, token = line.split('\t')
            if int(token_id) != expected_id:
                raise ValueError(f'Vocabulary ids must be dense, found {token_id} at position {expected_id}')
            tokens.append(token)

        if len(tokens) != int(header['size']):
            raise ValueError(f'Vocabulary header declares {header["size"]} tokens, found {len(tokens)}')

        return cls(header['domain'], tokens, catalog = catalog)

    @classmethod
    def load(cls, path: str, catalog: SpriteCatalog = None) -> 'Vocabulary':
        with open(path, 'r', encoding = 'utf-8') as fp:
            return cls.from_text(fp.read(), catalog = catalog)


def _object_tokens(obj, vocab: Vocabulary) -> list:
    if vocab.domain == DOMAIN_NOISY_SHAPES:
        tokens = [KIND_TOKENS[obj.kind]]
        for (slot_type, _, _), value in zip(SHAPE_SLOTS[obj.kind], obj.fields()):
            tokens.append(('T' if value else 'F') if slot_type == 'bool' else f'V{value}')
    else:
        tokens = [
            f'CAT{obj.category}', f'SUB{obj.subcategory}', f'SCALE{obj.scale}', f'FLIP{obj.flip}',
            f'X{obj.x // SCENE_BIN}', f'Y{obj.y // SCENE_BIN}'
        ]

    return [vocab.encode_token(token) for token in tokens]


def encode_tokens(spec: SceneSpec, vocab: Vocabulary, max_length: int = None) -> TokenSequence:
    """
    Encodes the objects of `spec`, in their current order, as BOS, one fixed-arity token group per object, EOS,
    then PAD up to `max_length`

    Parameters
    ----------
    spec: SceneSpec, usually passed through canonical_order first
    vocab: Vocabulary of the same domain
    max_length: L, defaults to 80 (NoisyShapes) or 100 (AbstractScene)

    Returns
    -------
    TokenSequence
    """
    if spec.domain != vocab.domain:
        raise InvalidDomain(f'Vocabulary for "{vocab.domain}" cannot encode a "{spec.domain}" specification')

    max_length = max_length or vocab.default_max_length

    spec.validate(check_count = False, catalog = vocab.catalog)

    ids = [BOS_ID]
    for obj in spec.objects:
        ids += _object_tokens(obj, vocab)
    ids.append(EOS_ID)

    if len(ids) > max_length:
        raise OverLength(f'Encoding needs {len(ids)} tokens, maximum length is {max_length}')

    return TokenSequence(tuple(ids), max_length).padded()


def _accepts(vocab: Vocabulary, token_id: int, slot) -> bool:
    found = vocab.slot_of.get(token_id)
    if found is None:
        return False

    if vocab.domain == DOMAIN_NOISY_SHAPES:
        slot_type, low, high = slot
        return found[0] == slot_type and low <= found[1] <= high

    return found[0] == slot


def _build_object(vocab: Vocabulary, head: int, values: list):
    if vocab.domain == DOMAIN_NOISY_SHAPES:
        if head == ShapeKind.CIRCLE:
            return Circle(*values)
        elif head == ShapeKind.LINE:
            return Line(*values[:4], arrow = bool(values[4]), dashed = bool(values[5]))
        return Rectangle(*values)

    sub, scale, flip, x_bin, y_bin = values
    return SceneObject(head, sub, scale, flip, x_bin * SCENE_BIN + SCENE_BIN // 2, y_bin * SCENE_BIN + SCENE_BIN // 2)


def decode_tokens(seq, vocab: Vocabulary, canvas: tuple = None) -> Tuple[SceneSpec, int]:
    """
    Greedy left-to-right parse of any id sequence. Complete, well-typed token groups become objects; parsing stops
    at the first EOS. Malformed groups (wrong arity, a token that does not fit its slot, or an object violating its
    invariants) are skipped object by object, and their tokens counted as discarded.

    Parameters
    ----------
    seq: TokenSequence or sequence of ids
    vocab: Vocabulary
    canvas: (width, height) of the decoded specification, defaults to the domain canvas

    Returns
    -------
    tuple of (SceneSpec, number of discarded tokens)
    """
    ids = [int(i) for i in seq]
    position = 1 if ids and ids[0] == BOS_ID else 0
    head_slot = 'kind' if vocab.domain == DOMAIN_NOISY_SHAPES else 'cat'

    objects = []
    discarded = 0

    while position < len(ids):
        token_id = ids[position]

        if token_id == EOS_ID:
            break

        head = vocab.slot_of.get(token_id)
        if head is None or head[0] != head_slot:
            discarded += 1
            position += 1
            continue

        slots = SHAPE_SLOTS[head[1]] if vocab.domain == DOMAIN_NOISY_SHAPES else SCENE_SLOTS

        values = []
        cursor = position + 1
        complete = True

        for slot in slots:
            if cursor >= len(ids) or not _accepts(vocab, ids[cursor], slot):
                complete = False
                break
            values.append(vocab.slot_of[ids[cursor]][1])
            cursor += 1

        if complete:
            try:
                obj = _build_object(vocab, head[1], values)
                if vocab.domain == DOMAIN_ABSTRACT_SCENE:
                    obj.validate(vocab.catalog)
                else:
                    obj.validate()
                objects.append(obj)
            except InvalidObject:
                discarded += cursor - position
        else:
            discarded += cursor - position

        position = cursor

    return SceneSpec(domain = vocab.domain, objects = tuple(objects), canvas = canvas), discarded
