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

"""Per-pose 21x21 relation matrices.

Three constructions feed the relation branch of the graph layers:
class equality of classifier outputs, thresholded pairwise distances of a
coarse 3D pose (adaptive nearest neighbours) and fixed-k nearest neighbours.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from hand_pose_gcn.errors import ConfigurationError
from hand_pose_gcn.skeleton import NUM_JOINTS

DEFAULT_THETA = 0.05
DEFAULT_TEMPERATURE = 0.01


def _check_logits(logits: torch.Tensor) -> None:
    if logits.dim() != 3 or logits.shape[2] != NUM_JOINTS or logits.shape[1] < 1:
        raise ValueError(
            f"Expected logits of shape (B, C, {NUM_JOINTS}), got {tuple(logits.shape)}"
        )


def _check_poses(poses: torch.Tensor) -> None:
    if poses.dim() != 3 or poses.shape[1] != NUM_JOINTS:
        raise ValueError(
            f"Expected poses of shape (B, {NUM_JOINTS}, D), got {tuple(poses.shape)}"
        )


def relations_function(logits: torch.Tensor) -> torch.Tensor:
    """Relation matrix of joints sharing the same predicted class.

    :param logits: (B, C, 21) classifier scores
    :return: (B, 21, 21) binary matrix, constant for autograd
    """
    _check_logits(logits)
    with torch.no_grad():
        labels = F.softmax(logits, dim=1).argmax(dim=1)
        relation = labels[:, :, None] == labels[:, None, :]
    return relation.to(logits.dtype)


def pairwise_mse(poses: torch.Tensor) -> torch.Tensor:
    """(B, 21, 21) mean over coordinates of squared joint differences."""
    _check_poses(poses)
    diff = poses[:, :, None, :] - poses[:, None, :, :]
    return diff.pow(2).mean(dim=-1)


def ann_adjacency(poses: torch.Tensor, theta: torch.Tensor,
                  temperature: float = DEFAULT_TEMPERATURE,
                  relaxed: bool = False) -> torch.Tensor:
    """Adaptive nearest neighbour relation: D[i][j] <= theta.

    The forward value is always the hard comparison. With relaxed set, the
    gradient w.r.t. theta flows through sigmoid((theta - D) / temperature)
    (straight-through estimator).
    """
    distances = pairwise_mse(poses)
    hard = (distances <= theta).to(poses.dtype)
    if not relaxed:
        return hard
    soft = torch.sigmoid((theta - distances) / temperature)
    return hard + soft - soft.detach()


def knn_adjacency(poses: torch.Tensor, k: int) -> torch.Tensor:
    """Symmetrized k-nearest-neighbour relation, self counted as a neighbour.

    Ties break by joint index (stable sort); every joint ranks itself first.
    """
    directed = knn_rows(poses, k)
    return torch.maximum(directed, directed.transpose(1, 2))


def knn_rows(poses: torch.Tensor, k: int) -> torch.Tensor:
    """Directed k-NN matrix before symmetrization (rows sum to k)."""
    _check_poses(poses)
    if not 1 <= k <= NUM_JOINTS:
        raise ConfigurationError(f"k must be in [1, {NUM_JOINTS}], got {k}")
    with torch.no_grad():
        distances = pairwise_mse(poses)
        eye = torch.eye(NUM_JOINTS, dtype=torch.bool, device=poses.device)
        distances = distances.masked_fill(eye, -1.0)
        order = torch.sort(distances, dim=-1, stable=True).indices[:, :, :k]
        return torch.zeros_like(distances).scatter_(-1, order, 1.0)


def relation_density(relation: torch.Tensor) -> torch.Tensor:
    """Fraction of ones per matrix."""
    return relation.float().mean(dim=(-2, -1))


def relation_degrees(relation: torch.Tensor) -> torch.Tensor:
    """Neighbour count of every joint, self excluded."""
    diagonal = torch.diagonal(relation, dim1=-2, dim2=-1)
    return relation.sum(dim=-1) - diagonal


class AnnThreshold(nn.Module):
    """Learnable global distance threshold of the adaptive neighbourhood."""

    def __init__(self, init: float = DEFAULT_THETA,
                 temperature: float = DEFAULT_TEMPERATURE):
        """Initialize instance attributes."""
        super().__init__()
        if not init > 0:
            raise ConfigurationError(f"Threshold must start positive, got {init}")
        self.theta = nn.Parameter(torch.tensor(float(init)))
        self.temperature = temperature

    def forward(self, poses: torch.Tensor) -> torch.Tensor:
        theta = self.theta.to(poses.dtype)
        return ann_adjacency(poses, theta, self.temperature,
                             relaxed=self.training)

    def extra_repr(self) -> str:
        return f"theta={self.theta.item():.4f}, temperature={self.temperature}"
