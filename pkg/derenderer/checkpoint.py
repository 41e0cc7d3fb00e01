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

""" DRND1 checkpoint format: magic, config echo, then one record per named parameter
"""

import json
import struct
from collections import OrderedDict
from typing import Mapping, Tuple

import numpy as np

from .constants import CHECKPOINT_MAGIC
from .exceptions import CheckpointFormatError
from .utils import atomic_write

__all__ = ['encode_checkpoint', 'decode_checkpoint', 'save_checkpoint', 'load_checkpoint']

UINT32 = struct.Struct('<I')


def encode_checkpoint(params: Mapping[str, np.ndarray], config: dict) -> bytes:
    """
    Serializes parameters in mapping order. Layout, all integers little-endian uint32:

    * magic `DRND1`
    * config length, config as UTF-8 JSON (sorted keys)
    * per parameter: name length, UTF-8 name, rank, dims, float32 little-endian data

    Parameters
    ----------
    params: mapping of name to array (or Tensor)
    config: JSON-serializable dict echoed in the header

    Returns
    -------
    bytes
    """
    config_bytes = json.dumps(config, sort_keys = True, separators = (',', ':')).encode('utf-8')

    chunks = [CHECKPOINT_MAGIC, UINT32.pack(len(config_bytes)), config_bytes]

    for name, value in params.items():
        array = np.asarray(getattr(value, 'data', value), dtype = '<f4')
        name_bytes = name.encode('utf-8')
        chunks.append(UINT32.pack(len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(UINT32.pack(array.ndim))
        chunks.extend(UINT32.pack(dim) for dim in array.shape)
        chunks.append(array.tobytes(order = 'C'))

    return b''.join(chunks)


def decode_checkpoint(data: bytes) -> Tuple[dict, 'OrderedDict[str, np.ndarray]']:
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError('Missing DRND1 magic')

    offset = len(CHECKPOINT_MAGIC)

    def read(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(data):
            raise CheckpointFormatError(f'Truncated checkpoint at byte {offset}')
        chunk = data[offset:offset + size]
        offset += size
        return chunk

    def read_uint() -> int:
        return UINT32.unpack(read(UINT32.size))[0]

    try:
        config = json.loads(read(read_uint()).decode('utf-8'))
    except ValueError as e:
        raise CheckpointFormatError(f'Invalid config block: {e}')

    params = OrderedDict()
    while offset < len(data):
        name = read(read_uint()).decode('utf-8')
        rank = read_uint()
        shape = tuple(read_uint() for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(read(4 * count), dtype = '<f4').reshape(shape).astype(np.float32)

    return config, params


def save_checkpoint(path: str, params: Mapping[str, np.ndarray], config: dict):
    with atomic_write(path, 'wb') as fp:
        fp.write(encode_checkpoint(params, config))


def load_checkpoint(path: str) -> Tuple[dict, 'OrderedDict[str, np.ndarray]']:
    with open(path, 'rb') as fp:
        return decode_checkpoint(fp.read())
