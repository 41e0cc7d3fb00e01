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

""" Helper functions used to derive reproducible sub-seeds from a single experiment seed
"""

import numpy as np
import xxhash

SEED_MASK = (1 << 64) - 1


def derive_seed(seed: int, purpose: str) -> int:
    """
    Derives a 64-bit sub-seed for `purpose` (e.g. "example-17", "split", "epoch-3") from the experiment seed.
    The xxh64 digest of the purpose string, seeded with the experiment seed, is used as sub-seed.

    Parameters
    ----------
    seed: experiment seed, any non-negative int (reduced modulo 2^64)
    purpose: free-form purpose string

    Returns
    -------
    int
    """
    if seed < 0:
        raise ValueError('seed must be non-negative')

    return xxhash.xxh64(purpose.encode('utf-8'), seed = seed & SEED_MASK).intdigest()


def derive_rng(seed: int, purpose: str) -> np.random.Generator:
    """
    Counter-based (Philox) generator keyed by the derived sub-seed, self-contained per purpose

    Parameters
    ----------
    seed: experiment seed
    purpose: purpose string

    Returns
    -------
    numpy.random.Generator
    """
    return np.random.Generator(np.random.Philox(key = derive_seed(seed, purpose)))


def example_rng(seed: int, index: int, purpose: str = 'example') -> np.random.Generator:
    return derive_rng(seed, f'{purpose}-{index}')
