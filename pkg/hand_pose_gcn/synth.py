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

"""Procedural hands: a template right hand posed with random finger flexion,
rotated, placed in front of a pinhole camera and drawn as a stick figure.

The generator runs every sample through the same preprocessing as the real
datasets, so synthetic samples are interchangeable with RHD/STB ones.
"""

import logging
from typing import Dict, Iterator, Tuple

import cv2
import numpy as np
from scipy.spatial.transform import Rotation

from hand_pose_gcn.data import (RHD_MARGIN, CameraIntrinsics, Sample,
                                preprocess_sample, project_3d_to_2d)
from hand_pose_gcn.quantizer import QuantizerConfig
from hand_pose_gcn.skeleton import FINGERS, NUM_JOINTS, bones, finger_joints

logger = logging.getLogger(__name__)

SYNTH_IMAGE_SIZE = 320
SYNTH_INTRINSICS = CameraIntrinsics(400.0, 400.0, 160.0, 160.0)
BACKGROUND = (24, 24, 32)

# Per finger: mcp position relative to the wrist (mm), direction in the palm
# plane (degrees from +y towards +x) and mcp->pip, pip->dip, dip->tip lengths.
FINGER_TEMPLATE: Dict[str, Tuple[Tuple[float, float, float], float,
                                 Tuple[float, float, float]]] = {
    "thumb": ((-30.0, 28.0, -8.0), -50.0, (34.0, 30.0, 24.0)),
    "index": ((-22.0, 82.0, 0.0), -8.0, (40.0, 24.0, 20.0)),
    "middle": ((0.0, 85.0, 0.0), 0.0, (44.0, 28.0, 22.0)),
    "ring": ((19.0, 80.0, 0.0), 8.0, (41.0, 27.0, 21.0)),
    "pinky": ((36.0, 72.0, 0.0), 16.0, (32.0, 20.0, 18.0)),
}
MAX_FLEXION_DEG = (60.0, 75.0, 60.0)
MAX_ORIENTATION_DEG = (50.0, 50.0, 180.0)
DEPTH_RANGE_MM = (450.0, 600.0)
SHIFT_RANGE_MM = 20.0

FINGER_COLORS = {
    "thumb": (230, 60, 60),
    "index": (240, 200, 40),
    "middle": (60, 200, 80),
    "ring": (60, 140, 240),
    "pinky": (200, 80, 220),
}


def template_pose(flexion: np.ndarray) -> np.ndarray:
    """Right hand in its local frame (mm), fingers along +y, palm facing +z.

    :param flexion: (5, 3) bend angles in radians per finger and joint
    """
    pose = np.zeros((NUM_JOINTS, 3))
    palm_normal = np.array([0.0, 0.0, 1.0])
    for f, finger in enumerate(FINGERS):
        base, spread, lengths = FINGER_TEMPLATE[finger]
        angle = np.radians(spread)
        direction = np.array([np.sin(angle), np.cos(angle), 0.0])
        axis = np.cross(direction, palm_normal)
        axis /= np.linalg.norm(axis)
        point = np.asarray(base, dtype=np.float64)
        chain = [point]
        for bend, length in zip(flexion[f], lengths):
            direction = Rotation.from_rotvec(axis * bend).apply(direction)
            point = point + direction * length
            chain.append(point)
        tip, dip, pip, mcp = finger_joints(finger)
        pose[[mcp, pip, dip, tip]] = chain
    return pose


def random_hand(rng: np.random.Generator) -> np.ndarray:
    """One random right hand in camera coordinates (mm, z > 0)."""
    flexion = rng.uniform(0.0, 1.0, size=(len(FINGERS), 3)) * np.radians(
        MAX_FLEXION_DEG)
    local = template_pose(flexion)
    angles = rng.uniform(-1.0, 1.0, size=3) * np.asarray(MAX_ORIENTATION_DEG)
    rotated = Rotation.from_euler("xyz", angles, degrees=True).apply(local)
    offset = np.array([
        rng.uniform(-SHIFT_RANGE_MM, SHIFT_RANGE_MM),
        rng.uniform(-SHIFT_RANGE_MM, SHIFT_RANGE_MM),
        rng.uniform(*DEPTH_RANGE_MM),
    ])
    return rotated + offset


def render_stick_figure(pose_2d: np.ndarray, size: int = SYNTH_IMAGE_SIZE
                        ) -> np.ndarray:
    """Draw bones and joints on a plain background (RGB uint8)."""
    image = np.empty((size, size, 3), dtype=np.uint8)
    image[:] = BACKGROUND
    points = np.rint(pose_2d).astype(int)
    finger_of = {j: finger for finger in FINGERS for j in finger_joints(finger)}
    for parent, child in bones():
        color = FINGER_COLORS[finger_of[child]]
        cv2.line(image, tuple(points[parent].tolist()),
                 tuple(points[child].tolist()), color, 3, cv2.LINE_AA)
    for joint, point in enumerate(points):
        color = FINGER_COLORS.get(finger_of.get(joint), (250, 250, 250))
        cv2.circle(image, tuple(point.tolist()), 4, color, -1, cv2.LINE_AA)
    return image


def synth_sample(rng: np.random.Generator, quantizer: QuantizerConfig,
                 index: int = 0) -> Sample:
    pose_3d = random_hand(rng)
    pose_2d = project_3d_to_2d(pose_3d, SYNTH_INTRINSICS)
    image = render_stick_figure(pose_2d)
    meta = {"id": f"synth/{index:06d}", "side": "right",
            "intrinsics": SYNTH_INTRINSICS.to_dict()}
    return preprocess_sample(image, pose_2d, pose_3d, RHD_MARGIN, quantizer, meta)


def synth_dataset(count: int, seed: int = 0,
                  quantizer: QuantizerConfig = QuantizerConfig()
                  ) -> Iterator[Sample]:
    """Yield count samples, identical for identical seeds."""
    if count < 1:
        raise ValueError(f"Sample count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    logger.debug("Generating %d synthetic hands with seed %d", count, seed)
    for index in range(count):
        yield synth_sample(rng, quantizer, index)
