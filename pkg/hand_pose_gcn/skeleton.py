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

"""21-joint hand model, pose validation and coordinate conventions.

Joint 0 is the wrist. Joints 1..20 cover thumb, index, middle, ring and pinky,
four joints per finger ordered tip, dip, pip, mcp. Every adjacency matrix in
the package indexes joints in this order.
"""

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from hand_pose_gcn.errors import InvalidPoseError

NUM_JOINTS = 21
WRIST = 0
FINGERS = ("thumb", "index", "middle", "ring", "pinky")
PHALANGES = ("tip", "dip", "pip", "mcp")
JOINT_NAMES = ["wrist"] + [f"{f}_{p}" for f in FINGERS for p in PHALANGES]
MIDDLE_MCP = JOINT_NAMES.index("middle_mcp")
# wrist -> middle mcp, the length every normalized 3D pose is scaled by
REFERENCE_BONE = (WRIST, MIDDLE_MCP)
MIN_CROP_SIDE = 4.0

PoseLike = Union[np.ndarray, Sequence[Sequence[float]]]


def finger_joints(finger: str) -> List[int]:
    """Return joint indices of a finger ordered tip -> mcp."""
    start = 1 + 4 * FINGERS.index(finger)
    return list(range(start, start + 4))


def bones() -> List[Tuple[int, int]]:
    """Return (parent, child) pairs of the kinematic tree."""
    pairs = []
    for finger in FINGERS:
        tip, dip, pip, mcp = finger_joints(finger)
        pairs.extend([(WRIST, mcp), (mcp, pip), (pip, dip), (dip, tip)])
    return pairs


def validate_pose(pose: PoseLike, dims: int) -> np.ndarray:
    """Return the pose as a float64 (21, dims) array or raise InvalidPoseError."""
    arr = np.asarray(pose, dtype=np.float64)
    if arr.shape != (NUM_JOINTS, dims):
        raise InvalidPoseError(
            f"Expected pose of shape ({NUM_JOINTS}, {dims}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidPoseError("Pose contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class CropBox(object):
    """Axis-aligned box in original image pixels."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def contains(self, pose: PoseLike) -> bool:
        """Check every joint lies inside the closed box."""
        arr = validate_pose(pose, 2)
        return bool(
            np.all(arr[:, 0] >= self.min_x) and np.all(arr[:, 0] <= self.max_x)
            and np.all(arr[:, 1] >= self.min_y)
            and np.all(arr[:, 1] <= self.max_y)
        )

    def to_square(self) -> "CropBox":
        """Pad the shorter side so the box becomes a centered square."""
        side = max(self.width, self.height)
        cx = (self.min_x + self.max_x) / 2.0
        cy = (self.min_y + self.max_y) / 2.0
        return CropBox(cx - side / 2.0, cy - side / 2.0,
                       cx + side / 2.0, cy + side / 2.0)


def _clamped_interval(lo: float, hi: float, margin: float,
                      bound: Optional[float]) -> Tuple[float, float]:
    start, end = lo - margin, hi + margin
    if bound is not None:
        # clamp only sides whose joints are inside the image
        if lo >= 0:
            start = max(start, 0.0)
        if hi <= bound:
            end = min(end, float(bound))
    if end - start < MIN_CROP_SIDE:
        center = (start + end) / 2.0
        start, end = center - MIN_CROP_SIDE / 2.0, center + MIN_CROP_SIDE / 2.0
    return start, end


def crop_box_from_joints(pose: PoseLike, margin: float,
                         image_size: Optional[Tuple[int, int]] = None
                         ) -> CropBox:
    """Build the joint bounding box grown by margin pixels.

    :param pose:       (21, 2) joints in image pixels
    :param margin:     pixels added on every side (10 for RHD, 20 for STB)
    :param image_size: optional (width, height) used for clamping
    :return: box containing every joint
    """
    arr = validate_pose(pose, 2)
    if margin < 0:
        raise ValueError(f"Crop margin must be non-negative, got {margin}")
    width, height = image_size if image_size is not None else (None, None)
    min_x, max_x = _clamped_interval(
        arr[:, 0].min(), arr[:, 0].max(), margin, width)
    min_y, max_y = _clamped_interval(
        arr[:, 1].min(), arr[:, 1].max(), margin, height)
    return CropBox(min_x, min_y, max_x, max_y)


def root_relative(pose: PoseLike) -> np.ndarray:
    """Translate a 3D pose so the wrist sits at the origin."""
    arr = validate_pose(pose, 3)
    return arr - arr[WRIST]


def reference_bone_length(pose: PoseLike) -> float:
    """Length of the wrist -> middle-mcp bone."""
    arr = validate_pose(pose, 3)
    return float(np.linalg.norm(arr[REFERENCE_BONE[1]] - arr[REFERENCE_BONE[0]]))


def normalize_pose_3d(pose: PoseLike) -> Tuple[np.ndarray, float]:
    """Root-center a pose and scale it to unit reference bone length.

    :return: (normalized pose, reference bone length in input units)
    """
    centered = root_relative(pose)
    length = reference_bone_length(centered)
    if length <= 0:
        raise InvalidPoseError("Reference bone has zero length")
    return centered / length, length


def denormalize_pose_3d(pose: PoseLike, bone_length: float) -> np.ndarray:
    """Scale a normalized pose back to metric units (still root-relative)."""
    return validate_pose(pose, 3) * bone_length


def mirror_pose_3d(pose: PoseLike) -> np.ndarray:
    """Mirror a left hand into right-hand canonical form (x -> -x)."""
    arr = validate_pose(pose, 3).copy()
    arr[:, 0] = -arr[:, 0]
    return arr


def pose_to_json(pose: PoseLike) -> str:
    """Serialize a pose as a JSON array of 21 rows."""
    arr = np.asarray(pose, dtype=np.float64)
    validate_pose(arr, arr.shape[-1] if arr.ndim == 2 else 0)
    return json.dumps(arr.tolist())


def pose_from_json(text: str) -> np.ndarray:
    """Parse a JSON array of 21 [x, y] or [x, y, z] rows."""
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidPoseError(f"Pose is not valid JSON: {exc}") from exc
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise InvalidPoseError(
            f"Pose JSON must be 21 rows of 2 or 3 numbers, got shape {arr.shape}"
        )
    return validate_pose(arr, arr.shape[1])
