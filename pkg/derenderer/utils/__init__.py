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
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from ..constants import THREADS_ENV


def round_half_away(values):
    """
    Rounds to the nearest integer with ties away from zero, the rounding used at every 8-bit quantization step

    Parameters
    ----------
    values: scalar or ndarray

    Returns
    -------
    ndarray of int64 (or int for scalar input)
    """
    values = np.asarray(values, dtype = np.float64)
    rounded = (np.sign(values) * np.floor(np.abs(values) + 0.5)).astype(np.int64)
    if rounded.ndim == 0:
        return int(rounded)
    return rounded


def to_uint8(values) -> np.ndarray:
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


@contextmanager
def atomic_write(path: str, mode: str = 'wb'):
    """
    Opens a temporary file next to `path` and moves it into place when the block exits without error

    Parameters
    ----------
    path: final destination
    mode: 'wb' or 'w'

    Returns
    -------
    file object
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok = True)

    fd, tmp_path = tempfile.mkstemp(dir = directory, prefix = ".tmp-", suffix = os.path.basename(path))
    try:
        encoding = None if 'b' in mode else 'utf-8'
        with os.fdopen(fd, mode, encoding = encoding) as fp:
            yield fp
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def resolve_threads(threads: int = None) -> int:
    """
    Worker cap: explicit value, then the DERENDER_THREADS environment variable, then 1
    """
    if threads is None:
        env_value = os.environ.get(THREADS_ENV)
        if env_value:
            try:
                threads = int(env_value)
            except ValueError:
                raise ValueError(f'{THREADS_ENV} must be an integer, got "{env_value}"')
        else:
            threads = 1

    if threads < 1:
        raise ValueError('threads must be >= 1')

    return threads
