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

"""Pose and classification metrics plus the model evaluation driver."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import torch
from sklearn import metrics
from torch.utils.data import DataLoader

from hand_pose_gcn.errors import ConfigurationError
from hand_pose_gcn.relations import relation_density

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, torch.Tensor, List]

THRESHOLDS_3D_MM = np.linspace(20.0, 50.0, 31)
THRESHOLDS_2D_PX = np.linspace(0.0, 30.0, 31)


def _as_array(values: ArrayLike) -> np.ndarray:
    if isinstance(values, torch.Tensor):
        values = values.detach().cpu().numpy()
    return np.asarray(values, dtype=np.float64)


def joint_errors(pred: ArrayLike, gt: ArrayLike) -> np.ndarray:
    """Euclidean distance of every predicted keypoint to its ground truth."""
    pred, gt = _as_array(pred), _as_array(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"Shapes differ: {pred.shape} vs {gt.shape}")
    return np.linalg.norm(pred - gt, axis=-1).reshape(-1)


def epe(pred: ArrayLike, gt: ArrayLike, pred_frame: Optional[str] = None,
        gt_frame: Optional[str] = None) -> float:
    """Mean end-point error over joints (and samples).

    pred_frame/gt_frame name the units ('mm', 'px', 'norm'); differing tags
    are rejected.
    """
    if pred_frame and gt_frame and pred_frame != gt_frame:
        raise ConfigurationError(
            f"Cannot compare poses in '{pred_frame}' with poses in '{gt_frame}'"
        )
    return float(joint_errors(pred, gt).mean())


@dataclass(frozen=True)
class PckCurve(object):
    """Fraction of keypoints within each threshold."""

    thresholds: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.values):
            raise ValueError("Thresholds and values must have equal length")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("PCK values must be non-decreasing")

    def to_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.thresholds, self.values))


def pck_auc(errors: ArrayLike, thresholds: ArrayLike = THRESHOLDS_3D_MM
            ) -> Tuple[PckCurve, float]:
    """PCK curve (error <= t counts as correct) and its normalized area."""
    errors = _as_array(errors).reshape(-1)
    thresholds = _as_array(thresholds).reshape(-1)
    if errors.size == 0:
        raise ValueError("Cannot compute PCK of an empty error list")
    if thresholds.size < 2 or np.any(np.diff(thresholds) <= 0):
        raise ValueError("Thresholds must be ascending with at least 2 entries")
    values = (errors[None, :] <= thresholds[:, None]).mean(axis=1)
    span = thresholds[-1] - thresholds[0]
    auc = metrics.auc((thresholds - thresholds[0]) / span, values)
    curve = PckCurve(tuple(float(t) for t in thresholds),
                     tuple(float(v) for v in values))
    return curve, float(auc)


@dataclass(frozen=True)
class ClassificationReport(object):
    accuracy: float
    precision: float
    recall: float


def classification_report(pred_labels: ArrayLike, gt_labels: ArrayLike,
                          num_classes: int) -> ClassificationReport:
    """Accuracy plus precision/recall macro-averaged over classes in gt."""
    pred = _as_array(pred_labels).astype(np.int64).reshape(-1)
    gt = _as_array(gt_labels).astype(np.int64).reshape(-1)
    if pred.shape != gt.shape:
        raise ValueError(f"Label shapes differ: {pred.shape} vs {gt.shape}")
    for labels in (pred, gt):
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError(f"Labels must lie in [0, {num_classes})")
    present = np.unique(gt)
    return ClassificationReport(
        accuracy=float(metrics.accuracy_score(gt, pred)),
        precision=float(metrics.precision_score(
            gt, pred, labels=present, average="macro", zero_division=0)),
        recall=float(metrics.recall_score(
            gt, pred, labels=present, average="macro", zero_division=0)),
    )


@dataclass
class EvaluationResult(object):
    """Metrics of one model on one dataset."""

    variant: str
    samples: int
    epe_2d_px: float
    epe_3d_mm: float
    epe_3d_norm: float
    auc_3d: float
    auc_2d: float
    pck_3d: PckCurve
    pck_2d: PckCurve
    epe_3d_coarse_mm: float
    classification_2d: Optional[ClassificationReport] = None
    classification_3d: Optional[ClassificationReport] = None
    theta: Optional[float] = None
    relation_density: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["pck_3d"] = [list(row) for row in self.pck_3d.to_rows()]
        data["pck_2d"] = [list(row) for row in self.pck_2d.to_rows()]
        return data


@torch.no_grad()
def evaluate(model, loader: DataLoader, device: str = "cpu") -> EvaluationResult:
    """Run model over loader and compute every reported metric."""
    model.eval()
    model.to(device)
    size = model.config.image_size
    quantizer = model.config.quantizer
    errors_2d, errors_3d, errors_3d_norm, errors_coarse = [], [], [], []
    labels = {"pred_2d": [], "gt_2d": [], "pred_3d": [], "gt_3d": []}
    density: Dict[str, List[float]] = {}
    count = 0
    for batch in loader:
        images = batch["image"].to(device)
        outputs = model(images)
        bone = batch["bone_length"].to(device)[:, None, None]
        gt_3d_norm = batch["pose_3d"].to(device)
        errors_2d.append(joint_errors(outputs.pose_2d * size,
                                      batch["pose_2d_px"].to(device)))
        errors_3d.append(joint_errors(outputs.pose_3d * bone, gt_3d_norm * bone))
        errors_3d_norm.append(joint_errors(outputs.pose_3d, gt_3d_norm))
        errors_coarse.append(joint_errors(outputs.pose_3d_coarse * bone,
                                          gt_3d_norm * bone))
        if outputs.logits_2d is not None:
            labels["pred_2d"].append(outputs.logits_2d.argmax(dim=1).cpu())
            labels["pred_3d"].append(outputs.logits_3d.argmax(dim=1).cpu())
            labels["gt_2d"].append(batch["labels_2d"])
            labels["gt_3d"].append(batch["labels_3d"])
        for name in ("relation_2d", "relation_3d", "relation_refine"):
            relation = getattr(outputs, name)
            if relation is not None:
                density.setdefault(name, []).extend(
                    relation_density(relation).cpu().tolist())
        count += images.shape[0]

    errors_2d = np.concatenate(errors_2d)
    errors_3d = np.concatenate(errors_3d)
    pck_3d, auc_3d = pck_auc(errors_3d, THRESHOLDS_3D_MM)
    pck_2d, auc_2d = pck_auc(errors_2d, THRESHOLDS_2D_PX)
    result = EvaluationResult(
        variant=model.variant.name,
        samples=count,
        epe_2d_px=float(errors_2d.mean()),
        epe_3d_mm=float(errors_3d.mean()),
        epe_3d_norm=float(np.concatenate(errors_3d_norm).mean()),
        auc_3d=auc_3d,
        auc_2d=auc_2d,
        pck_3d=pck_3d,
        pck_2d=pck_2d,
        epe_3d_coarse_mm=float(np.concatenate(errors_coarse).mean()),
        theta=model.theta,
        relation_density={k: float(np.mean(v)) for k, v in density.items()},
    )
    if labels["pred_2d"]:
        result.classification_2d = classification_report(
            torch.cat(labels["pred_2d"]), torch.cat(labels["gt_2d"]),
            quantizer.num_classes_2d)
        result.classification_3d = classification_report(
            torch.cat(labels["pred_3d"]), torch.cat(labels["gt_3d"]),
            quantizer.num_classes_3d)
    logger.info("Evaluated %s on %d samples: EPE 3D %.3f mm, AUC %.3f",
                result.variant, count, result.epe_3d_mm, result.auc_3d)
    return result
