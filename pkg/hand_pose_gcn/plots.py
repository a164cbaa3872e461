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

"""Static PNG figures: relation heatmaps, skeletons and PCK curves."""

from typing import Dict, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from hand_pose_gcn.evalkit import PckCurve  # noqa: E402
from hand_pose_gcn.skeleton import (FINGERS, JOINT_NAMES, bones,  # noqa: E402
                                    finger_joints, validate_pose)
from hand_pose_gcn.synth import FINGER_COLORS  # noqa: E402

DPI = 100


def _finger_color(joint: int) -> tuple:
    for finger in FINGERS:
        if joint in finger_joints(finger):
            return tuple(c / 255.0 for c in FINGER_COLORS[finger])
    return (0.2, 0.2, 0.2)


def save_image(image: np.ndarray, path: str) -> str:
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)
    return path


def plot_relation_heatmap(matrix: np.ndarray, path: str,
                          title: str = "") -> str:
    """21x21 relation matrix with joint names on both axes."""
    matrix = np.asarray(matrix, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(matrix, cmap="viridis", vmin=0.0, vmax=1.0)
    ticks = np.arange(len(JOINT_NAMES))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_xticklabels(JOINT_NAMES, rotation=90, fontsize=6)
    ax.set_yticklabels(JOINT_NAMES, fontsize=6)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def _draw_skeleton_2d(ax, pose: np.ndarray, style: str, alpha: float = 1.0):
    for parent, child in bones():
        ax.plot(pose[[parent, child], 0], pose[[parent, child], 1], style,
                color=_finger_color(child), linewidth=2, alpha=alpha)


def plot_skeleton_2d(image: np.ndarray, pred: np.ndarray, path: str,
                     gt: Optional[np.ndarray] = None, title: str = "") -> str:
    """Predicted (solid) and ground-truth (dashed) 2D poses over the crop."""
    pred = validate_pose(pred, 2)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(image)
    if gt is not None:
        _draw_skeleton_2d(ax, validate_pose(gt, 2), "--", alpha=0.6)
    _draw_skeleton_2d(ax, pred, "-")
    ax.set_title(title)
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_skeleton_3d(pose: np.ndarray, path: str, title: str = "",
                     elev: float = -70.0, azim: float = -90.0) -> str:
    pose = validate_pose(pose, 3)
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="3d")
    ax.view_init(elev=elev, azim=azim)
    for parent, child in bones():
        ax.plot(pose[[parent, child], 0], pose[[parent, child], 1],
                pose[[parent, child], 2], color=_finger_color(child),
                linewidth=2)
    ax.scatter(pose[:, 0], pose[:, 1], pose[:, 2], s=8, c="k")
    center = (pose.max(axis=0) + pose.min(axis=0)) / 2.0
    radius = max(float(np.ptp(pose, axis=0).max()) / 2.0, 1e-6)
    ax.set_xlim(center[0] - radius, center[0] + radius)
    ax.set_ylim(center[1] - radius, center[1] + radius)
    ax.set_zlim(center[2] - radius, center[2] + radius)
    ax.set_xlabel("X")
    ax.set_ylabel("Y")
    ax.set_zlabel("Z")
    ax.set_title(title)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_pck_curves(curves: Dict[str, PckCurve], path: str,
                    xlabel: str = "Error threshold (mm)") -> str:
    """One line per named curve, PCK in [0, 1]."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in curves.items():
        ax.plot(curve.thresholds, curve.values, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("PCK")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
