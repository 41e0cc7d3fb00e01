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

from .base import *
from .config import *
from .spec import *
from .vocabulary import *
from .catalog import *
from .dataset import *
from .rewards import *
from .interfaces import *
from .extensions import *
from .metrics import *
from .training import *
from . import render as render_module
from .render import *

__all__ = (base.__all__ + config.__all__ + spec.__all__ + vocabulary.__all__ + catalog.__all__ + dataset.__all__ +
           rewards.__all__ + interfaces.__all__ + extensions.__all__ + metrics.__all__ + training.__all__ +
           render_module.__all__)
