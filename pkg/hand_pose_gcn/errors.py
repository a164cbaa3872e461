#  Copyright (c) 2026 hand-pose-gcn contributors
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  https://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License

"""Exceptions raised by the hand pose pipeline."""

from typing import Dict, Optional


class HandPoseError(Exception):
    """Base class of every error the package raises on purpose."""


class InvalidPoseError(HandPoseError, ValueError):
    """Pose array has the wrong shape or non-finite coordinates."""


class OutOfRangeError(HandPoseError, ValueError):
    """A joint falls outside the quantization grid or a label outside [0, C)."""


class ConfigurationError(HandPoseError, ValueError):
    """Settings that cannot work together."""


class ProjectionError(HandPoseError, ValueError):
    """A point cannot be projected through the pinhole camera."""


class SchemaError(HandPoseError):
    """Checkpoint archive does not match the expected format or config."""


class DatasetError(HandPoseError):
    """Dataset file is missing or malformed."""

    def __init__(self, message: str, path: Optional[str] = None):
        """Initialize instance attributes."""
        self.path = path
        super().__init__(f"{message}: {path}" if path else message)


class NonFiniteLossError(HandPoseError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, step: int, components: Dict[str, float]):
        """Initialize instance attributes."""
        self.step = step
        self.components = components
        details = ", ".join(f"{k}={v:.6g}" for k, v in components.items())
        super().__init__(f"Non-finite loss at step {step} ({details})")


class LockError(HandPoseError, RuntimeError):
    """Another process holds the lock of an output or cache directory."""
