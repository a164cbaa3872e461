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

"""Training objectives of both stages."""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import torch
import torch.nn.functional as F

from hand_pose_gcn.errors import ConfigurationError, OutOfRangeError
from hand_pose_gcn.posenet import ForwardOutputs


@dataclass(frozen=True)
class LossWeights(object):
    """delta1 scales the regression terms, delta2 the classification terms."""

    delta1: float = 100.0
    delta2: float = 1.0

    def __post_init__(self):
        if self.delta1 < 0 or self.delta2 < 0:
            raise ConfigurationError(
                f"Loss weights must be non-negative, got {self.delta1}/{self.delta2}"
            )


def classification_loss(logits: torch.Tensor,
                        labels: torch.Tensor) -> torch.Tensor:
    """Cross-entropy summed over the joints and averaged over the batch.

    :param logits: (B, C, 21) raw scores
    :param labels: (B, 21) integer block indices
    """
    if logits.dim() != 3 or labels.shape != (logits.shape[0], logits.shape[2]):
        raise ValueError(
            f"Logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}"
        )
    num_classes = logits.shape[1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= num_classes):
        raise OutOfRangeError(f"Labels must lie in [0, {num_classes})")
    per_joint = F.cross_entropy(logits, labels.long(), reduction="none")
    return per_joint.sum(dim=1).mean()


def regression_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean squared error over batch, joints and coordinates."""
    if pred.shape != gt.shape:
        raise ValueError(
            f"Prediction {tuple(pred.shape)} does not match target {tuple(gt.shape)}"
        )
    return F.mse_loss(pred, gt.to(pred.dtype))


def refinement_loss(fine: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    if fine.dim() != 3 or fine.shape[-1] != 3:
        raise ValueError(f"Expected (B, 21, 3) poses, got {tuple(fine.shape)}")
    return regression_loss(fine, gt)


def combine_coarse(reg2d: torch.Tensor, reg3d: torch.Tensor,
                   cls2d: torch.Tensor, cls3d: torch.Tensor,
                   weights: LossWeights = LossWeights()) -> torch.Tensor:
    return (weights.delta1 * (reg2d + reg3d)
            + weights.delta2 * (cls2d + cls3d))


def coarse_loss(outputs: ForwardOutputs, pose_2d: torch.Tensor,
                pose_3d: torch.Tensor,
                labels_2d: Optional[torch.Tensor] = None,
                labels_3d: Optional[torch.Tensor] = None,
                weights: LossWeights = LossWeights()
                ) -> Tuple[torch.Tensor, Dict[str, float]]:
    """Weighted coarse objective and its components.

    Without classifiers (outputs carry no logits) both classification terms
    are zero.
    """
    reg2d = regression_loss(outputs.pose_2d, pose_2d)
    reg3d = regression_loss(outputs.pose_3d_coarse, pose_3d)
    zero = reg2d.new_zeros(())
    cls2d = cls3d = zero
    if outputs.logits_2d is not None:
        if labels_2d is None or labels_3d is None:
            raise ValueError("Class labels are required by a classifying model")
        cls2d = classification_loss(outputs.logits_2d, labels_2d)
        cls3d = classification_loss(outputs.logits_3d, labels_3d)
    total = combine_coarse(reg2d, reg3d, cls2d, cls3d, weights)
    components = {
        "reg2d": float(reg2d.detach()),
        "reg3d": float(reg3d.detach()),
        "cls2d": float(cls2d.detach()),
        "cls3d": float(cls3d.detach()),
    }
    return total, components
