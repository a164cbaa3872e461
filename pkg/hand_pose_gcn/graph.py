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

"""Graph convolution numerics over the 21 hand joints."""

import math
from typing import Optional

import torch
import torch.nn as nn

from hand_pose_gcn.skeleton import NUM_JOINTS, bones

DEFAULT_GAIN = math.sqrt(2.0)
DEFAULT_ADJACENCY_NOISE = 0.01


def normalize_adjacency(adjacency: torch.Tensor) -> torch.Tensor:
    """Symmetric renormalization D^-1/2 (A + I) D^-1/2 of a binary graph."""
    if adjacency.dim() != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ValueError(
            f"Adjacency must be a square matrix, got {tuple(adjacency.shape)}"
        )
    if not torch.equal(adjacency, adjacency.transpose(0, 1)):
        raise ValueError("Adjacency must be symmetric")
    if not torch.all((adjacency == 0) | (adjacency == 1)):
        raise ValueError("Adjacency entries must be 0 or 1")
    with_loops = adjacency + torch.eye(
        adjacency.shape[0], dtype=adjacency.dtype, device=adjacency.device
    )
    inv_sqrt_degree = with_loops.sum(dim=1).pow(-0.5)
    return inv_sqrt_degree[:, None] * with_loops * inv_sqrt_degree[None, :]


def skeleton_adjacency(dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Binary bone graph of the hand model (no self loops)."""
    adjacency = torch.zeros(NUM_JOINTS, NUM_JOINTS, dtype=dtype)
    for parent, child in bones():
        adjacency[parent, child] = 1
        adjacency[child, parent] = 1
    return adjacency


def _check_features(features: torch.Tensor, adjacency: torch.Tensor,
                    weight: torch.Tensor) -> None:
    if features.dim() != 3:
        raise ValueError(
            f"Features must be (B, N, F), got {tuple(features.shape)}"
        )
    nodes = features.shape[1]
    if adjacency.shape[-2:] != (nodes, nodes):
        raise ValueError(
            f"Adjacency {tuple(adjacency.shape)} does not match {nodes} nodes"
        )
    if weight.dim() != 2 or weight.shape[0] != features.shape[2]:
        raise ValueError(
            f"Weight {tuple(weight.shape)} does not take {features.shape[2]} features"
        )


def gcn_layer(features: torch.Tensor, adjacency: torch.Tensor,
              weight: torch.Tensor, activate: bool = True) -> torch.Tensor:
    """ReLU(A H W) for every sample of the batch."""
    _check_features(features, adjacency, weight)
    out = adjacency @ features @ weight
    return torch.relu(out) if activate else out


def dual_branch_layer(features: torch.Tensor, adjacency: torch.Tensor,
                      relation: Optional[torch.Tensor],
                      weight_global: torch.Tensor,
                      weight_relation: Optional[torch.Tensor],
                      activate: bool = True) -> torch.Tensor:
    """ReLU([A H W_A, R H W_R]): global and per-pose aggregation side by side.

    Without a relation (classification disabled) only the global branch runs.
    """
    global_branch = gcn_layer(features, adjacency, weight_global, activate=False)
    if relation is None:
        out = global_branch
    else:
        if weight_relation is None or weight_relation.shape != weight_global.shape:
            raise ValueError("W_A and W_R must share input and output widths")
        if relation.dim() != 3 or relation.shape[0] != features.shape[0]:
            raise ValueError(
                f"Relation {tuple(relation.shape)} is not batched to "
                f"{features.shape[0]} samples"
            )
        relation_branch = gcn_layer(features, relation, weight_relation,
                                    activate=False)
        out = torch.cat([global_branch, relation_branch], dim=-1)
    return torch.relu(out) if activate else out


class GlobalAdjacency(nn.Module):
    """Learned (or fixed predefined) 21x21 adjacency shared by all samples."""

    def __init__(self, learned: bool = True,
                 noise: float = DEFAULT_ADJACENCY_NOISE):
        """Initialize instance attributes."""
        super().__init__()
        self.learned = learned
        self.noise = noise
        if learned:
            self.weight = nn.Parameter(torch.eye(NUM_JOINTS))
        else:
            self.register_buffer(
                "weight", normalize_adjacency(skeleton_adjacency())
            )
        self.reset_parameters()

    def reset_parameters(self) -> None:
        if self.learned:
            with torch.no_grad():
                self.weight.copy_(torch.eye(NUM_JOINTS))
                self.weight.add_(torch.randn_like(self.weight) * self.noise)

    def forward(self) -> torch.Tensor:
        return self.weight

    def extra_repr(self) -> str:
        return "learned" if self.learned else "skeleton"


class GraphConvolution(nn.Module):
    """Single-branch layer H' = ReLU(A H W), no bias."""

    def __init__(self, in_features: int, out_features: int,
                 activate: bool = True, gain: float = DEFAULT_GAIN):
        """Initialize instance attributes."""
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.activate = activate
        self.gain = gain
        self.weight = nn.Parameter(torch.empty(in_features, out_features))
        self.reset_parameters()

    def reset_parameters(self) -> None:
        nn.init.xavier_uniform_(self.weight, gain=self.gain)

    def forward(self, features: torch.Tensor,
                adjacency: torch.Tensor) -> torch.Tensor:
        return gcn_layer(features, adjacency, self.weight, self.activate)

    def extra_repr(self) -> str:
        return (f"in_features={self.in_features}, "
                f"out_features={self.out_features}, activate={self.activate}")


class DualBranchGraphConvolution(nn.Module):
    """Layer concatenating global-adjacency and relation aggregation.

    Output width is 2 * out_features, or out_features when the relation
    branch is disabled.
    """

    def __init__(self, in_features: int, out_features: int,
                 activate: bool = True, use_relation: bool = True,
                 gain: float = DEFAULT_GAIN):
        """Initialize instance attributes."""
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.activate = activate
        self.use_relation = use_relation
        self.gain = gain
        self.weight_global = nn.Parameter(torch.empty(in_features, out_features))
        if use_relation:
            self.weight_relation = nn.Parameter(
                torch.empty(in_features, out_features))
        else:
            self.register_parameter("weight_relation", None)
        self.reset_parameters()

    @property
    def output_width(self) -> int:
        return self.out_features * (2 if self.use_relation else 1)

    def reset_parameters(self) -> None:
        nn.init.xavier_uniform_(self.weight_global, gain=self.gain)
        if self.weight_relation is not None:
            nn.init.xavier_uniform_(self.weight_relation, gain=self.gain)

    def zero_parameters(self) -> None:
        """Make the layer output exactly zero (identity residual start)."""
        with torch.no_grad():
            self.weight_global.zero_()
            if self.weight_relation is not None:
                self.weight_relation.zero_()

    def forward(self, features: torch.Tensor, adjacency: torch.Tensor,
                relation: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.use_relation and relation is None:
            raise ValueError("This layer needs a per-pose relation matrix")
        return dual_branch_layer(
            features, adjacency, relation if self.use_relation else None,
            self.weight_global, self.weight_relation, self.activate,
        )

    def extra_repr(self) -> str:
        return (f"in_features={self.in_features}, "
                f"out_features={self.out_features}, "
                f"activate={self.activate}, use_relation={self.use_relation}")
