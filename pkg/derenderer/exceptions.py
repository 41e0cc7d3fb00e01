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


class ConfigurationError(Exception):
    pass


class OverLength(ValueError):
    pass


class InvalidDomain(ValueError):
    pass


class DomainMismatch(ValueError):
    pass


class UnknownCategory(ValueError):
    pass


class InvalidObject(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NotScalar(ValueError):
    pass


class ResampleLimit(Exception):
    pass


class NaNLoss(Exception):
    pass


class MissingRender(Exception):
    pass


class IdMismatch(ValueError):
    pass


class CheckpointFormatError(ValueError):
    pass


class RewardNotFound(AttributeError):
    pass


class UsageError(Exception):
    pass
