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

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2

PAD_TOKEN = 'PAD'
BOS_TOKEN = 'BOS'
EOS_TOKEN = 'EOS'

DOMAIN_NOISY_SHAPES = 'noisy_shapes'
DOMAIN_ABSTRACT_SCENE = 'abstract_scene'

DOMAINS = (DOMAIN_NOISY_SHAPES, DOMAIN_ABSTRACT_SCENE)

# NoisyShapes logical grid
GRID_SIZE = 16
GRID_MAX = GRID_SIZE - 1
RADIUS_MIN = 1
RADIUS_MAX = 4

# AbstractScene logical canvas (pixels) and token bins
SCENE_WIDTH = 500
SCENE_HEIGHT = 400
SCENE_BIN = 10
SCENE_X_BINS = SCENE_WIDTH // SCENE_BIN
SCENE_Y_BINS = SCENE_HEIGHT // SCENE_BIN
SCENE_SCALES = (1.0, 0.7, 0.49)

DEFAULT_CATEGORIES = (2, 3, 4, 2, 3, 4, 2, 3, 4, 3)

DOMAIN_DEFAULTS = {
    DOMAIN_NOISY_SHAPES: {
        'object_bounds': (1, 12),
        'desk_object_bounds': (1, 4),
        'canvas': (64, 64),
        'channels': 1,
        'max_length': 80,
        'count': 9000,
        'test_count': 1000,
    },
    DOMAIN_ABSTRACT_SCENE: {
        'object_bounds': (3, 18),
        'desk_object_bounds': (3, 6),
        'canvas': (125, 100),
        'channels': 3,
        'max_length': 100,
        'count': 5000,
        'test_count': 500,
    },
}

# Evaluation / reward quantization
EVAL_BINS = 20
PIXEL_BUCKETS = 20
IOU_THRESHOLDS = (1.0, 0.8, 0.6)

IMAGE_REWARD_EPS = 1e-6

CHECKPOINT_MAGIC = b'DRND1'

THREADS_ENV = 'DERENDER_THREADS'
