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

"""Module contains utility functions."""

import hashlib
import json
import logging
import os
import random
import time
from typing import Any, Dict, Union

import numpy as np
import torch

from hand_pose_gcn.errors import LockError

logger = logging.getLogger(__name__)

_TRUE_VALUES = ("y", "yes", "t", "true", "on", "1")
_FALSE_VALUES = ("n", "no", "f", "false", "off", "0")


class Singleton(type):
    """Implementation of Singleton pattern."""

    _instances = {}

    def __call__(cls, *args, **kwargs):
        """Redefine call method."""
        if cls not in cls._instances:
            cls._instances[cls] = super(Singleton, cls).__call__(
                *args, **kwargs
            )
        return cls._instances[cls]


def strtobool(value: Union[str, bool, int]) -> bool:
    """Convert a string representation of truth to a bool.

    :param value: 'true'/'false' style string, bool or int
    :return: parsed value
    """
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in _TRUE_VALUES:
        return True
    if lowered in _FALSE_VALUES:
        return False
    raise ValueError(f"invalid truth value {value!r}")


def config_hash(settings: Dict[str, Any], length: int = 10) -> str:
    """Return a short stable hash of a settings mapping."""
    payload = json.dumps(settings, sort_keys=True, default=str)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:length]


def seed_everything(seed: int) -> torch.Generator:
    """Seed python, numpy and torch; return a generator for data shuffling."""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


class LockFile(object):
    """Exclusive lock implemented as an atomically created file.

    With a positive timeout, acquire polls every poll_interval seconds until
    the holder releases the lock and raises LockError once timeout passes.
    """

    def __init__(self, path: str, timeout: float = 0.0,
                 poll_interval: float = 0.5):
        """Initialize instance attributes."""
        self.path = path
        self.timeout = timeout
        self.poll_interval = poll_interval
        self._fd = None

    def _try_create(self) -> bool:
        try:
            self._fd = os.open(
                self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY
            )
        except FileExistsError:
            return False
        return True

    def acquire(self) -> None:
        """Create the lock file, waiting up to timeout for the holder."""
        os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        deadline = time.monotonic() + self.timeout
        waited = False
        while not self._try_create():
            if time.monotonic() >= deadline:
                raise LockError(
                    f"Lock {self.path} is held by another process "
                    f"(remove it if that process is gone)"
                )
            if not waited:
                logger.info("Waiting for lock %s", self.path)
                waited = True
            time.sleep(self.poll_interval)
        os.write(self._fd, str(os.getpid()).encode("ascii"))
        logger.debug("Acquired lock %s", self.path)

    def release(self) -> None:
        """Remove the lock file."""
        if self._fd is None:
            return
        os.close(self._fd)
        self._fd = None
        try:
            os.remove(self.path)
        except FileNotFoundError:
            pass
        logger.debug("Released lock %s", self.path)

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()
        return False
