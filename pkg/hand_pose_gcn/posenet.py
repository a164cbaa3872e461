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

"""Two-stage hybrid classification-regression hand pose network.

Coarse stage: backbone features -> 2D/3D joint classifiers -> 2D regressor
(global + class-relation branches) -> 3D regressor. Refinement stage: a
residual head over the frozen coarse 3D pose whose relation comes from the
adaptive neighbourhood (full model), k nearest neighbours or nothing at all
(a plain dense head).
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from hand_pose_gcn.backbone import BackboneConfig, ResNet10, feature_length
from hand_pose_gcn.errors import ConfigurationError, SchemaError
from hand_pose_gcn.graph import (DualBranchGraphConvolution, GlobalAdjacency,
                                 GraphConvolution)
from hand_pose_gcn.quantizer import QuantizerConfig
from hand_pose_gcn.relations import (AnnThreshold, knn_adjacency,
                                     relations_function)
from hand_pose_gcn.skeleton import NUM_JOINTS

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hand-pose-gcn/checkpoint-v1"


class Refinement(Enum):
    """Enum holding the refinement heads that can follow the coarse stage."""

    NONE = 0
    FULLY_CONNECTED = 1
    KNN = 2
    ANN = 3

    @classmethod
    def _missing_(cls, value):
        if value:
            value_upper = str(value).upper()
            if value_upper == "FC":
                return cls.FULLY_CONNECTED
            for member in cls:
                if member.name == value_upper:
                    return member
        return None


@dataclass(frozen=True)
class ModelVariant(object):
    """Classification switch plus refinement mode.

    The ablation baselines: A has no classifiers and no refinement, B is the
    coarse stage alone, C refines with a dense head, D with a 5-NN graph and
    the full model with the adaptive neighbourhood graph.
    """

    use_classification: bool = True
    refinement: Refinement = Refinement.ANN

    @property
    def name(self) -> str:
        for key, variant in VARIANTS.items():
            if variant == self:
                return key
        return (f"{'cls' if self.use_classification else 'nocls'}-"
                f"{self.refinement.name.lower()}")

    @classmethod
    def from_name(cls, name: str) -> "ModelVariant":
        key = name.strip()
        for variant_name, variant in VARIANTS.items():
            if variant_name.lower() == key.lower():
                return variant
        raise ConfigurationError(
            f"Unknown variant '{name}', expected one of {list(VARIANTS)}"
        )


VARIANTS = {
    "A": ModelVariant(False, Refinement.NONE),
    "B": ModelVariant(True, Refinement.NONE),
    "C": ModelVariant(True, Refinement.FULLY_CONNECTED),
    "D": ModelVariant(True, Refinement.KNN),
    "Full": ModelVariant(True, Refinement.ANN),
}


@dataclass(frozen=True)
class ModelConfig(object):
    """Every hyperparameter needed to rebuild a network."""

    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    variant: ModelVariant = field(default_factory=ModelVariant)
    classifier_hidden: int = 64
    regressor_hidden: int = 64
    regressor_layers: int = 3
    refine_hidden: int = 64
    refine_layers: int = 3
    fc_hidden: int = 256
    knn_k: int = 5
    theta_init: float = 0.05
    ann_temperature: float = 0.01
    learned_adjacency: bool = True
    adjacency_noise: float = 0.01
    graph_gain: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.regressor_layers < 1 or self.refine_layers < 1:
            raise ConfigurationError("Graph stacks need at least one layer")
        if not 1 <= self.knn_k <= NUM_JOINTS:
            raise ConfigurationError(
                f"knn_k must be in [1, {NUM_JOINTS}], got {self.knn_k}"
            )
        feature_length(self.quantizer.image_size)

    @property
    def image_size(self) -> int:
        return self.quantizer.image_size

    @property
    def feature_length(self) -> int:
        return feature_length(self.image_size)

    @property
    def regressor_2d_width(self) -> int:
        width = self.feature_length
        if self.variant.use_classification:
            width += self.quantizer.num_classes_2d
        return width

    @property
    def regressor_3d_width(self) -> int:
        width = 2 + self.feature_length
        if self.variant.use_classification:
            width += (self.quantizer.num_classes_2d
                      + self.quantizer.num_classes_3d)
        return width

    def with_variant(self, variant: ModelVariant) -> "ModelConfig":
        return replace(self, variant=variant)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["backbone"]["widths"] = list(self.backbone.widths)
        data["variant"] = {
            "use_classification": self.variant.use_classification,
            "refinement": self.variant.refinement.name,
        }
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        data = dict(data)
        quantizer = QuantizerConfig(**data.pop("quantizer"))
        backbone = dict(data.pop("backbone"))
        backbone["widths"] = tuple(backbone["widths"])
        variant = data.pop("variant")
        return cls(
            quantizer=quantizer,
            backbone=BackboneConfig(**backbone),
            variant=ModelVariant(variant["use_classification"],
                                 Refinement[variant["refinement"]]),
            **data,
        )


@dataclass
class ForwardOutputs(object):
    """Everything one forward pass produces."""

    pose_2d: torch.Tensor
    pose_3d_coarse: torch.Tensor
    features: torch.Tensor
    logits_2d: Optional[torch.Tensor] = None
    logits_3d: Optional[torch.Tensor] = None
    relation_2d: Optional[torch.Tensor] = None
    relation_3d: Optional[torch.Tensor] = None
    pose_3d_refined: Optional[torch.Tensor] = None
    relation_refine: Optional[torch.Tensor] = None

    @property
    def pose_3d(self) -> torch.Tensor:
        """Best available 3D estimate."""
        if self.pose_3d_refined is not None:
            return self.pose_3d_refined
        return self.pose_3d_coarse


class JointClassifier(nn.Module):
    """Two graph layers over a learned adjacency emitting (B, C, 21) logits."""

    def __init__(self, in_features: int, hidden: int, num_classes: int,
                 config: ModelConfig):
        """Initialize instance attributes."""
        super().__init__()
        self.num_classes = num_classes
        self.adjacency = GlobalAdjacency(config.learned_adjacency,
                                         config.adjacency_noise)
        self.layer1 = GraphConvolution(in_features, hidden, True,
                                       config.graph_gain)
        self.layer2 = GraphConvolution(hidden, num_classes, False,
                                       config.graph_gain)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        adjacency = self.adjacency()
        hidden = self.layer1(features, adjacency)
        return self.layer2(hidden, adjacency).transpose(1, 2)


class GraphRegressor(nn.Module):
    """Stack of dual-branch layers ending in per-joint coordinates.

    The last layer has no activation; its two branch outputs are summed so
    the stack emits exactly out_dims values per joint.
    """

    def __init__(self, in_features: int, hidden: int, num_layers: int,
                 out_dims: int, use_relation: bool, config: ModelConfig):
        """Initialize instance attributes."""
        super().__init__()
        self.out_dims = out_dims
        self.use_relation = use_relation
        self.adjacency = GlobalAdjacency(config.learned_adjacency,
                                         config.adjacency_noise)
        layers = []
        width = in_features
        for _ in range(num_layers - 1):
            layer = DualBranchGraphConvolution(width, hidden, True,
                                               use_relation, config.graph_gain)
            layers.append(layer)
            width = layer.output_width
        layers.append(DualBranchGraphConvolution(width, out_dims, False,
                                                 use_relation,
                                                 config.graph_gain))
        self.layers = nn.ModuleList(layers)

    @property
    def output_layer(self) -> DualBranchGraphConvolution:
        return self.layers[-1]

    def forward(self, features: torch.Tensor,
                relation: Optional[torch.Tensor] = None) -> torch.Tensor:
        adjacency = self.adjacency()
        hidden = features
        for layer in self.layers:
            hidden = layer(hidden, adjacency, relation)
        if self.use_relation:
            hidden = hidden[..., :self.out_dims] + hidden[..., self.out_dims:]
        return hidden


class GraphRefinement(nn.Module):
    """Residual graph head over the coarse pose with a per-pose relation."""

    def __init__(self, config: ModelConfig):
        """Initialize instance attributes."""
        super().__init__()
        self.mode = config.variant.refinement
        self.knn_k = config.knn_k
        self.threshold = None
        if self.mode is Refinement.ANN:
            self.threshold = AnnThreshold(config.theta_init,
                                          config.ann_temperature)
        self.stack = GraphRegressor(3, config.refine_hidden,
                                    config.refine_layers, 3, True, config)
        self.stack.output_layer.zero_parameters()

    def relation(self, coarse: torch.Tensor) -> torch.Tensor:
        if self.mode is Refinement.ANN:
            return self.threshold(coarse)
        return knn_adjacency(coarse, self.knn_k)

    def forward(self, coarse: torch.Tensor
                ) -> Tuple[torch.Tensor, torch.Tensor]:
        relation = self.relation(coarse)
        return coarse + self.stack(coarse, relation), relation


class FullyConnectedRefinement(nn.Module):
    """Residual dense head: 63 -> hidden -> ReLU -> 63."""

    def __init__(self, config: ModelConfig):
        """Initialize instance attributes."""
        super().__init__()
        size = NUM_JOINTS * 3
        self.hidden = nn.Linear(size, config.fc_hidden)
        self.output = nn.Linear(config.fc_hidden, size)
        nn.init.xavier_uniform_(self.hidden.weight, gain=config.graph_gain)
        nn.init.zeros_(self.hidden.bias)
        nn.init.zeros_(self.output.weight)
        nn.init.zeros_(self.output.bias)

    def forward(self, coarse: torch.Tensor
                ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        flat = coarse.flatten(start_dim=1)
        delta = self.output(torch.relu(self.hidden(flat)))
        return coarse + delta.view_as(coarse), None


class HandPoseNet(nn.Module):
    """Full two-stage network."""

    def __init__(self, config: ModelConfig = ModelConfig()):
        """Initialize instance attributes."""
        super().__init__()
        self.config = config
        quantizer = config.quantizer
        variant = config.variant
        features = config.feature_length
        self.backbone = ResNet10(config.backbone)
        self.classifier_2d = None
        self.classifier_3d = None
        if variant.use_classification:
            self.classifier_2d = JointClassifier(
                features, config.classifier_hidden, quantizer.num_classes_2d,
                config)
            self.classifier_3d = JointClassifier(
                features, config.classifier_hidden, quantizer.num_classes_3d,
                config)
        self.regressor_2d = GraphRegressor(
            config.regressor_2d_width, config.regressor_hidden,
            config.regressor_layers, 2, variant.use_classification, config)
        self.regressor_3d = GraphRegressor(
            config.regressor_3d_width, config.regressor_hidden,
            config.regressor_layers, 3, variant.use_classification, config)
        self.refinement = None
        if variant.refinement is Refinement.FULLY_CONNECTED:
            self.refinement = FullyConnectedRefinement(config)
        elif variant.refinement is not Refinement.NONE:
            self.refinement = GraphRefinement(config)
        self.coarse_frozen = False

    @property
    def variant(self) -> ModelVariant:
        return self.config.variant

    def coarse_modules(self) -> List[nn.Module]:
        modules = [self.backbone, self.regressor_2d, self.regressor_3d]
        if self.classifier_2d is not None:
            modules.extend([self.classifier_2d, self.classifier_3d])
        return modules

    def coarse_parameters(self) -> List[nn.Parameter]:
        return [p for m in self.coarse_modules() for p in m.parameters()]

    def refinement_parameters(self) -> List[nn.Parameter]:
        if self.refinement is None:
            return []
        return list(self.refinement.parameters())

    def freeze_coarse(self) -> None:
        """Stop every coarse-stage parameter and BN statistic from changing."""
        for parameter in self.coarse_parameters():
            parameter.requires_grad_(False)
        for module in self.coarse_modules():
            module.eval()
        self.coarse_frozen = True

    def train(self, mode: bool = True):
        super().train(mode)
        if self.coarse_frozen:
            for module in self.coarse_modules():
                module.eval()
        return self

    def classify_joints(self, features: torch.Tensor, space: str
                        ) -> torch.Tensor:
        """Logits of shape (B, C, 21) for space '2d' or '3d'."""
        classifier = {"2d": self.classifier_2d,
                      "3d": self.classifier_3d}.get(space.lower())
        if classifier is None:
            raise ConfigurationError(
                f"No {space} classifier in variant {self.variant.name}"
            )
        return classifier(features)

    def regress_2d(self, features: torch.Tensor,
                   logits_2d: Optional[torch.Tensor] = None
                   ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Normalized 2D pose (B, 21, 2) and the 2D relation used."""
        inputs, relation = features, None
        if self.variant.use_classification:
            if logits_2d is None:
                raise ValueError("2D logits are required with classification")
            probabilities = F.softmax(logits_2d, dim=1).transpose(1, 2)
            inputs = torch.cat([features, probabilities], dim=-1)
            relation = relations_function(logits_2d)
        return self.regressor_2d(inputs, relation), relation

    def regress_3d(self, features: torch.Tensor,
                   logits_2d: Optional[torch.Tensor],
                   logits_3d: Optional[torch.Tensor],
                   pose_2d: torch.Tensor
                   ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Root-relative normalized coarse 3D pose and the 3D relation used."""
        parts, relation = [pose_2d, features], None
        if self.variant.use_classification:
            if logits_2d is None or logits_3d is None:
                raise ValueError("2D and 3D logits are required with classification")
            parts.append(F.softmax(logits_2d, dim=1).transpose(1, 2))
            parts.append(F.softmax(logits_3d, dim=1).transpose(1, 2))
            relation = relations_function(logits_3d)
        return self.regressor_3d(torch.cat(parts, dim=-1), relation), relation

    def refine_3d(self, pose_3d_coarse: torch.Tensor
                  ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Refined 3D pose and the refinement relation (None for the dense head)."""
        if self.refinement is None:
            raise ConfigurationError(
                "refine_3d called on a model without refinement"
            )
        return self.refinement(pose_3d_coarse)

    def _coarse(self, images: torch.Tensor) -> ForwardOutputs:
        features = self.backbone(images)
        logits_2d = logits_3d = None
        if self.variant.use_classification:
            logits_2d = self.classify_joints(features, "2d")
            logits_3d = self.classify_joints(features, "3d")
        pose_2d, relation_2d = self.regress_2d(features, logits_2d)
        pose_3d, relation_3d = self.regress_3d(features, logits_2d, logits_3d,
                                               pose_2d)
        return ForwardOutputs(
            pose_2d=pose_2d, pose_3d_coarse=pose_3d, features=features,
            logits_2d=logits_2d, logits_3d=logits_3d,
            relation_2d=relation_2d, relation_3d=relation_3d,
        )

    def forward(self, images: torch.Tensor) -> ForwardOutputs:
        if self.coarse_frozen:
            with torch.no_grad():
                outputs = self._coarse(images)
        else:
            outputs = self._coarse(images)
        if self.refinement is not None:
            coarse = outputs.pose_3d_coarse
            if not self.coarse_frozen:
                # refinement learns on top of a fixed coarse estimate
                coarse = coarse.detach()
            refined, relation = self.refine_3d(coarse)
            outputs.pose_3d_refined = refined
            outputs.relation_refine = relation
        return outputs

    @property
    def theta(self) -> Optional[float]:
        """Learned adaptive-neighbourhood threshold, if the model has one."""
        refinement = self.refinement
        if (isinstance(refinement, GraphRefinement)
                and refinement.threshold is not None):
            return float(refinement.threshold.theta.detach())
        return None


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def save_checkpoint(path: str, model: HandPoseNet,
                    **extra: Any) -> None:
    """Write a single archive holding parameters, config and extras."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "model_config": model.config.to_dict(),
        "state_dict": model.state_dict(),
    }
    payload.update(extra)
    torch.save(payload, path)
    logger.info("Saved checkpoint %s", path)


def load_checkpoint(path: str, map_location: str = "cpu"
                    ) -> Tuple[HandPoseNet, Dict[str, Any]]:
    """Rebuild the model stored in a checkpoint archive."""
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise SchemaError(f"Cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(
            f"Checkpoint {path} is not in format {CHECKPOINT_FORMAT}"
        )
    try:
        config = ModelConfig.from_dict(payload["model_config"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"Checkpoint {path} has a broken model config: {exc}"
                          ) from exc
    model = HandPoseNet(config)
    model.load_state_dict(payload["state_dict"])
    logger.info("Loaded checkpoint %s (variant %s)", path, config.variant.name)
    return model, payload


def check_compatible(stored: ModelConfig, requested: ModelConfig) -> None:
    """Raise SchemaError when a checkpoint cannot serve the requested config."""
    mismatches = []
    if stored.quantizer != requested.quantizer:
        mismatches.append(
            f"quantizer {asdict(stored.quantizer)} != {asdict(requested.quantizer)}"
        )
    if stored.backbone != requested.backbone:
        mismatches.append("backbone widths differ")
    if mismatches:
        raise SchemaError("Checkpoint does not match configuration: "
                          + "; ".join(mismatches))
