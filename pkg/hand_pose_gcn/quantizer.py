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

"""Ground-truth block classes of hand joints.

The 2D grid splits the square crop into splits x splits blocks, the 3D grid
splits the pose's own bounding box into splits^3 blocks. Intervals are closed
on both ends, so a joint on a grid line matches two blocks; the lowest class
index wins, as argmax over a multi-hot vector returns the first set position.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from hand_pose_gcn.errors import ConfigurationError, OutOfRangeError
from hand_pose_gcn.skeleton import NUM_JOINTS, PoseLike, validate_pose

DEGENERATE_AXIS_EPS = 1e-6


@dataclass(frozen=True)
class QuantizerConfig(object):
    """Grid resolution of both classifiers."""

    splits_2d: int = 4
    splits_3d: int = 3
    image_size: int = 256

    def __post_init__(self):
        if self.splits_2d < 1 or self.splits_3d < 1:
            raise ConfigurationError(
                f"Splits must be >= 1, got {self.splits_2d}/{self.splits_3d}"
            )
        if self.image_size < 1:
            raise ConfigurationError(
                f"Image size must be positive, got {self.image_size}"
            )

    @property
    def num_classes_2d(self) -> int:
        return self.splits_2d ** 2

    @property
    def num_classes_3d(self) -> int:
        return self.splits_3d ** 3


@dataclass(frozen=True)
class JointClassLabels(object):
    """Per-joint block index in a quantized space."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.labels.shape != (NUM_JOINTS,):
            raise ValueError(f"Expected {NUM_JOINTS} labels, got {self.labels.shape}")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise OutOfRangeError(
                f"Labels must lie in [0, {self.num_classes})"
            )

    @property
    def one_hot(self) -> np.ndarray:
        """(21, C) binary matrix, one set entry per row."""
        return np.eye(self.num_classes, dtype=np.int64)[self.labels]

    def tolist(self):
        return [int(v) for v in self.labels]


def _square_size(size: Union[int, Tuple[int, int]]) -> int:
    if isinstance(size, (tuple, list)):
        width, height = size
        if width != height:
            raise ConfigurationError(
                f"2D quantization needs a square crop, got {width}x{height}"
            )
        size = width
    return int(size)


def _first_match(multi_hot: np.ndarray, what: str) -> np.ndarray:
    matched = multi_hot.any(axis=1)
    if not matched.all():
        missing = np.flatnonzero(~matched).tolist()
        raise OutOfRangeError(f"Joints {missing} fall outside the {what} grid")
    return multi_hot.argmax(axis=1).astype(np.int64)


def _interval_hits(values: np.ndarray, parts: np.ndarray) -> np.ndarray:
    """(21, splits) membership of values in closed intervals [p_i, p_i+1]."""
    column = values[:, None]
    return (parts[None, :-1] <= column) & (column <= parts[None, 1:])


def grid_lines_2d(splits: int, size: Union[int, Tuple[int, int]]) -> np.ndarray:
    """Block boundaries along one axis of the crop: 0, block, ..., splits*block.

    block = int(side / splits); when splits does not divide the side, joints
    past the last boundary are out of range.
    """
    side = _square_size(size)
    return int(side / splits) * np.arange(splits + 1, dtype=np.float64)


def create_classes_2d(pose: PoseLike, splits: int,
                      size: Union[int, Tuple[int, int]]) -> JointClassLabels:
    """Assign every 2D joint (crop pixels) to one of splits^2 blocks.

    label = x_interval * splits + y_interval
    """
    arr = validate_pose(pose, 2)
    parts = grid_lines_2d(splits, size)
    in_x = _interval_hits(arr[:, 0], parts)
    in_y = _interval_hits(arr[:, 1], parts)
    multi_hot = (in_x[:, :, None] & in_y[:, None, :]).reshape(NUM_JOINTS, -1)
    return JointClassLabels(_first_match(multi_hot, "2D"), splits ** 2)


def grid_lines_3d(pose: PoseLike, splits: int) -> np.ndarray:
    """(3, splits + 1) block boundaries of the pose's own bounding box."""
    arr = validate_pose(pose, 3)
    start, end = arr.min(axis=0), arr.max(axis=0)
    flat = (end - start) <= 0
    start = np.where(flat, start - DEGENERATE_AXIS_EPS, start)
    end = np.where(flat, end + DEGENERATE_AXIS_EPS, end)
    steps = (end - start) / splits
    parts = start[:, None] + steps[:, None] * np.arange(splits + 1)[None, :]
    # the far edge must equal the maximum exactly so it stays inside the grid
    parts[:, -1] = end
    return parts


def create_classes_3d(pose: PoseLike, splits: int) -> JointClassLabels:
    """Assign every 3D joint to one of splits^3 blocks of its bounding box.

    label = x_interval * splits^2 + y_interval * splits + z_interval
    """
    arr = validate_pose(pose, 3)
    parts = grid_lines_3d(arr, splits)
    in_x = _interval_hits(arr[:, 0], parts[0])
    in_y = _interval_hits(arr[:, 1], parts[1])
    in_z = _interval_hits(arr[:, 2], parts[2])
    multi_hot = (
        in_x[:, :, None, None] & in_y[:, None, :, None] & in_z[:, None, None, :]
    ).reshape(NUM_JOINTS, -1)
    return JointClassLabels(_first_match(multi_hot, "3D"), splits ** 3)


def _floor_index(values: np.ndarray, parts: np.ndarray, splits: int) -> np.ndarray:
    step = parts[1] - parts[0]
    index = np.clip(np.floor((values - parts[0]) / step), 0, splits - 1)
    index = index.astype(np.int64)
    # a joint on an inner grid line belongs to the lower block
    on_line = (values == parts[index]) & (index > 0)
    return np.where(on_line, index - 1, index)


def quantizer_oracle_2d(pose: PoseLike, splits: int,
                        size: Union[int, Tuple[int, int]]) -> JointClassLabels:
    """Direct index arithmetic version of create_classes_2d."""
    arr = validate_pose(pose, 2)
    parts = grid_lines_2d(splits, size)
    outside = (arr < parts[0]) | (arr > parts[-1])
    if outside.any():
        missing = np.flatnonzero(outside.any(axis=1)).tolist()
        raise OutOfRangeError(f"Joints {missing} fall outside the 2D grid")
    ix = _floor_index(arr[:, 0], parts, splits)
    iy = _floor_index(arr[:, 1], parts, splits)
    return JointClassLabels(ix * splits + iy, splits ** 2)


def quantizer_oracle_3d(pose: PoseLike, splits: int) -> JointClassLabels:
    """Direct index arithmetic version of create_classes_3d."""
    arr = validate_pose(pose, 3)
    parts = grid_lines_3d(arr, splits)
    ix, iy, iz = (
        _floor_index(arr[:, axis], parts[axis], splits) for axis in range(3)
    )
    return JointClassLabels(ix * splits ** 2 + iy * splits + iz, splits ** 3)


def quantize_pose(pose_2d_px: PoseLike, pose_3d: PoseLike,
                  config: QuantizerConfig
                  ) -> Tuple[JointClassLabels, JointClassLabels]:
    """Labels of one sample in both spaces."""
    return (
        create_classes_2d(pose_2d_px, config.splits_2d, config.image_size),
        create_classes_3d(pose_3d, config.splits_3d),
    )
