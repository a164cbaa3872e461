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

"""Narrow ResNet-10 mapping an RGB crop to one feature vector per joint.

Layout (defaults):

    conv 7x7/2 3->32, BN, ReLU, max-pool 3/2
    basic block 32->32 /1
    basic block 32->64 /2   (1x1/2 conv + BN projection)
    basic block 64->128 /2  (1x1/2 conv + BN projection)
    basic block 128->256 /2 (1x1/2 conv + BN projection)
    conv 3x3/1 256->21

The (B, 21, H, W) output is flattened to (B, 21, H*W); a 256 input gives
64 features per joint.
"""

from dataclasses import dataclass
from typing import Tuple

import torch
import torch.nn as nn

from hand_pose_gcn.skeleton import NUM_JOINTS

TOTAL_STRIDE = 32
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class BackboneConfig(object):
    """Stage widths: stem, then the four residual stages."""

    widths: Tuple[int, int, int, int, int] = (32, 32, 64, 128, 256)
    out_channels: int = NUM_JOINTS
    init_std: float = 0.02


def feature_length(image_size: int) -> int:
    """Per-joint feature length for a square input of image_size pixels."""
    if image_size % TOTAL_STRIDE:
        raise ValueError(
            f"Image size must be divisible by {TOTAL_STRIDE}, got {image_size}"
        )
    return (image_size // TOTAL_STRIDE) ** 2


class BasicBlock(nn.Module):
    """Two 3x3 conv + BN with an additive skip; first conv carries the stride."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        """Initialize instance attributes."""
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride, 1,
                               bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels, momentum=BN_MOMENTUM)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels, momentum=BN_MOMENTUM)
        self.downsample = None
        if stride != 1 or in_channels != out_channels:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride, 0, bias=False),
                nn.BatchNorm2d(out_channels, momentum=BN_MOMENTUM),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class ResNet10(nn.Module):
    """Feature extractor emitting (B, 21, (size / 32)^2) joint features."""

    def __init__(self, config: BackboneConfig = BackboneConfig()):
        """Initialize instance attributes."""
        super().__init__()
        self.config = config
        stem, w1, w2, w3, w4 = config.widths
        self.stem = nn.Sequential(
            nn.Conv2d(3, stem, 7, 2, 3, bias=False),
            nn.BatchNorm2d(stem, momentum=BN_MOMENTUM),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        self.layer1 = BasicBlock(stem, w1, 1)
        self.layer2 = BasicBlock(w1, w2, 2)
        self.layer3 = BasicBlock(w2, w3, 2)
        self.layer4 = BasicBlock(w3, w4, 2)
        self.head = nn.Conv2d(w4, config.out_channels, 3, 1, 1, bias=True)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.normal_(module.weight, 0.0, self.config.init_std)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
            elif isinstance(module, nn.BatchNorm2d):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.dim() != 4 or images.shape[1] != 3:
            raise ValueError(
                f"Expected images of shape (B, 3, H, W), got {tuple(images.shape)}"
            )
        if images.shape[2] != images.shape[3]:
            raise ValueError(
                f"Expected a square input, got {images.shape[2]}x{images.shape[3]}"
            )
        x = self.stem(images)
        x = self.layer4(self.layer3(self.layer2(self.layer1(x))))
        x = self.head(x)
        return x.flatten(start_dim=2)


def extract_features(backbone: ResNet10, images: torch.Tensor) -> torch.Tensor:
    """Run the backbone and return the flattened (B, 21, W*H) joint features."""
    return backbone(images)
