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

""" Binary Netpbm (P5 grayscale / P6 RGB, maxval 255) reading and writing
"""

import numpy as np

from . import atomic_write

MAGIC_CHANNELS = {b'P5': 1, b'P6': 3}
CHANNELS_MAGIC = {1: b'P5', 3: b'P6'}


def encode_netpbm(pixels: np.ndarray) -> bytes:
    """
    Encodes an (H, W, C) uint8 array as P5 (C=1) or P6 (C=3) bytes

    Parameters
    ----------
    pixels: ndarray of dtype uint8

    Returns
    -------
    bytes
    """
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] not in CHANNELS_MAGIC:
        raise ValueError('Expected an (H, W, 1|3) uint8 array')

    height, width, channels = pixels.shape
    header = CHANNELS_MAGIC[channels] + f'\n{width} {height}\n255\n'.encode('ascii')

    return header + np.ascontiguousarray(pixels).tobytes()


def decode_netpbm(data: bytes) -> np.ndarray:
    """
    Decodes P5/P6 bytes with maxval 255 into an (H, W, C) uint8 array

    Parameters
    ----------
    data: file content

    Returns
    -------
    ndarray
    """
    tokens = []
    offset = 0

    # Header: magic, width, height, maxval separated by whitespace, '#' comments until end of line
    while len(tokens) < 4:
        while offset < len(data) and data[offset:offset + 1].isspace():
            offset += 1

        if offset >= len(data):
            raise ValueError('Truncated Netpbm header')

        if data[offset:offset + 1] == b'#':
            end = data.find(b'\n', offset)
            offset = len(data) if end < 0 else end + 1
            continue

        start = offset
        while offset < len(data) and not data[offset:offset + 1].isspace():
            offset += 1
        tokens.append(data[start:offset])

    # Exactly one whitespace byte separates the header from the raster
    offset += 1

    magic, width, height, maxval = tokens

    if magic not in MAGIC_CHANNELS:
        raise ValueError(f'Unsupported Netpbm format "{magic.decode("ascii", "replace")}"')

    if int(maxval) != 255:
        raise ValueError('Only maxval 255 is supported')

    channels = MAGIC_CHANNELS[magic]
    width, height = int(width), int(height)
    expected = width * height * channels

    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise ValueError(f'Netpbm raster has {len(raster)} bytes, expected {expected}')

    return np.frombuffer(raster, dtype = np.uint8).reshape(height, width, channels).copy()


def write_netpbm(path: str, pixels: np.ndarray):
    with atomic_write(path, 'wb') as fp:
        fp.write(encode_netpbm(pixels))


def read_netpbm(path: str) -> np.ndarray:
    with open(path, 'rb') as fp:
        return decode_netpbm(fp.read())
