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

"""Dataset ingestion: projection, cropping, RHD/STB readers and caching.

Every source ends up as a stream of :class:`Sample` objects holding a square
RGB crop, the 2D pose in crop pixels and crop-relative units, the 3D pose in
millimetres and in root-relative bone-normalized units, plus the block class
labels of both quantized spaces.
"""

import json
import logging
import os
import pickle
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence

import cv2
import numpy as np
import torch
from scipy.io import loadmat
from torch.utils.data import Dataset
from tqdm import tqdm

from hand_pose_gcn.errors import DatasetError, ProjectionError, SchemaError
from hand_pose_gcn.quantizer import QuantizerConfig, quantize_pose
from hand_pose_gcn.skeleton import (NUM_JOINTS, CropBox, PoseLike,
                                    crop_box_from_joints, mirror_pose_3d,
                                    normalize_pose_3d, validate_pose)
from hand_pose_gcn.utils import LockFile

logger = logging.getLogger(__name__)

RHD_MARGIN = 10
STB_MARGIN = 20
RHD_SPLITS = ("training", "evaluation")
RHD_KEYPOINTS = 42

STB_INTRINSICS = (822.79041, 822.79041, 318.47345, 250.31296)
STB_BASELINE_MM = 120.054
STB_TRAIN_SEQUENCES = ("B2", "B3", "B4", "B5", "B6")
STB_TEST_SEQUENCES = ("B1",)
STB_KINDS = ("Counting", "Random")
STB_VIEWS = ("left", "right")
# STB stores palm, then each finger mcp -> tip from little finger to thumb
STB_TO_HAND = [0, 20, 19, 18, 17, 16, 15, 14, 13, 12, 11, 10, 9,
               8, 7, 6, 5, 4, 3, 2, 1]

CACHE_FORMAT = "hand-pose-gcn/cache-v1"
CACHE_LOCK_TIMEOUT = 600.0
CACHE_ENV = "HAND_POSE_GCN_CACHE"


@dataclass(frozen=True)
class CameraIntrinsics(object):
    """Pinhole camera parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ProjectionError(
                f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )

    @classmethod
    def from_matrix(cls, matrix: Any) -> "CameraIntrinsics":
        k = np.asarray(matrix, dtype=np.float64)
        if k.shape != (3, 3):
            raise ProjectionError(f"Intrinsic matrix must be 3x3, got {k.shape}")
        return cls(float(k[0, 0]), float(k[1, 1]), float(k[0, 2]),
                   float(k[1, 2]))

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def to_dict(self) -> Dict[str, float]:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}


def project_3d_to_2d(pose: PoseLike, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection u = fx x / z + cx, v = fy y / z + cy, no distortion."""
    arr = validate_pose(pose, 3)
    depth = arr[:, 2]
    if np.any(depth <= 0):
        behind = np.flatnonzero(depth <= 0).tolist()
        raise ProjectionError(f"Joints {behind} have non-positive depth")
    u = intrinsics.fx * arr[:, 0] / depth + intrinsics.cx
    v = intrinsics.fy * arr[:, 1] / depth + intrinsics.cy
    return np.stack([u, v], axis=1)


class CropTransform(object):
    """Similarity mapping a square box of the original image onto an S x S crop."""

    def __init__(self, box: CropBox, output_size: int):
        """Initialize instance attributes."""
        if abs(box.width - box.height) > 1e-6 * max(box.width, 1.0):
            raise ValueError(
                f"Crop box must be square, got {box.width}x{box.height}"
            )
        self.box = box
        self.output_size = output_size
        self.scale = output_size / box.width

    @property
    def matrix(self) -> np.ndarray:
        """2x3 affine matrix for cv2.warpAffine."""
        return np.array([
            [self.scale, 0.0, -self.scale * self.box.min_x],
            [0.0, self.scale, -self.scale * self.box.min_y],
        ])

    def forward(self, points: PoseLike) -> np.ndarray:
        """Original image pixels -> crop pixels, clipped to [0, S]."""
        arr = validate_pose(points, 2)
        origin = np.array([self.box.min_x, self.box.min_y])
        return np.clip((arr - origin) * self.scale, 0.0, float(self.output_size))

    def inverse(self, points: PoseLike) -> np.ndarray:
        """Crop pixels -> original image pixels."""
        arr = validate_pose(points, 2)
        origin = np.array([self.box.min_x, self.box.min_y])
        return arr / self.scale + origin

    def apply(self, image: np.ndarray) -> np.ndarray:
        """Resample the box; pixels outside the source image are zero."""
        size = self.output_size
        return cv2.warpAffine(image, self.matrix, (size, size),
                              flags=cv2.INTER_LINEAR,
                              borderMode=cv2.BORDER_CONSTANT, borderValue=0)

    def to_dict(self) -> Dict[str, float]:
        return {"min_x": self.box.min_x, "min_y": self.box.min_y,
                "max_x": self.box.max_x, "max_y": self.box.max_y,
                "output_size": self.output_size}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "CropTransform":
        box = CropBox(data["min_x"], data["min_y"], data["max_x"], data["max_y"])
        return cls(box, int(data["output_size"]))


@dataclass
class Sample(object):
    """One preprocessed training or evaluation example."""

    image: np.ndarray
    pose_2d_px: np.ndarray
    pose_2d_norm: np.ndarray
    pose_3d_mm: np.ndarray
    pose_3d_norm: np.ndarray
    bone_length_mm: float
    labels_2d: np.ndarray
    labels_3d: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def image_size(self) -> int:
        return int(self.image.shape[0])

    def check_labels(self, quantizer: QuantizerConfig) -> None:
        """Raise SchemaError when stored labels disagree with the poses."""
        labels_2d, labels_3d = quantize_pose(self.pose_2d_px, self.pose_3d_norm,
                                             quantizer)
        if not (np.array_equal(labels_2d.labels, self.labels_2d)
                and np.array_equal(labels_3d.labels, self.labels_3d)):
            raise SchemaError(
                f"Stored labels of sample {self.meta.get('id')} do not match "
                "its poses"
            )


def preprocess_sample(image: np.ndarray, pose_2d: PoseLike, pose_3d_mm: PoseLike,
                      margin: float, quantizer: QuantizerConfig,
                      meta: Optional[Dict[str, Any]] = None,
                      mirror: bool = False) -> Sample:
    """Crop, resize, optionally mirror, normalize and label one example.

    :param image:      (H, W, 3) uint8 RGB image
    :param pose_2d:    (21, 2) joints in image pixels
    :param pose_3d_mm: (21, 3) joints in millimetres (camera frame)
    :param margin:     crop margin in pixels
    :param mirror:     flip a left hand into right-hand canonical form
    """
    pose_2d = validate_pose(pose_2d, 2)
    pose_3d_mm = validate_pose(pose_3d_mm, 3)
    height, width = image.shape[:2]
    box = crop_box_from_joints(pose_2d, margin, (width, height)).to_square()
    transform = CropTransform(box, quantizer.image_size)
    crop = transform.apply(image)
    crop_2d = transform.forward(pose_2d)
    if mirror:
        crop = np.ascontiguousarray(crop[:, ::-1])
        crop_2d = crop_2d.copy()
        crop_2d[:, 0] = quantizer.image_size - crop_2d[:, 0]
        pose_3d_mm = mirror_pose_3d(pose_3d_mm)
    pose_3d_norm, bone_length = normalize_pose_3d(pose_3d_mm)
    labels_2d, labels_3d = quantize_pose(crop_2d, pose_3d_norm, quantizer)
    meta = dict(meta or {})
    meta["crop"] = transform.to_dict()
    meta["mirrored"] = bool(mirror)
    return Sample(
        image=crop,
        pose_2d_px=crop_2d,
        pose_2d_norm=crop_2d / quantizer.image_size,
        pose_3d_mm=pose_3d_mm,
        pose_3d_norm=pose_3d_norm,
        bone_length_mm=bone_length,
        labels_2d=labels_2d.labels,
        labels_3d=labels_3d.labels,
        meta=meta,
    )


def _read_rgb(path: str) -> np.ndarray:
    image = cv2.imread(path, cv2.IMREAD_COLOR)
    if image is None:
        raise DatasetError("Cannot read image", path)
    return cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def rhd_dominant_side(mask: np.ndarray) -> str:
    """'left' or 'right' from RHD hand part segmentation pixel counts.

    Mask values 2..17 are left hand parts, 18 and above right hand parts;
    ties go to the right hand.
    """
    left = int(np.count_nonzero((mask > 1) & (mask < 18)))
    right = int(np.count_nonzero(mask > 17))
    return "left" if left > right else "right"


def load_rhd(root: str, split: str = "training",
             quantizer: QuantizerConfig = QuantizerConfig(),
             limit: Optional[int] = None) -> Iterator[Sample]:
    """Yield RHD samples of the more prominent hand, in annotation order."""
    if split not in RHD_SPLITS:
        raise DatasetError(f"Unknown RHD split '{split}'", root)
    split_dir = os.path.join(root, split)
    anno_path = os.path.join(split_dir, f"anno_{split}.pickle")
    try:
        with open(anno_path, "rb") as handle:
            annotations = pickle.load(handle)
    except FileNotFoundError as exc:
        raise DatasetError("Missing RHD annotation archive", anno_path) from exc
    except (pickle.UnpicklingError, EOFError) as exc:
        raise DatasetError(f"Malformed RHD annotations: {exc}", anno_path) from exc

    indices = sorted(annotations)
    if limit is not None:
        indices = indices[:limit]
    logger.info("Loading %d RHD %s samples from %s", len(indices), split, root)
    for index in indices:
        anno = annotations[index]
        try:
            uv = np.asarray(anno["uv_vis"], dtype=np.float64)[:, :2]
            xyz = np.asarray(anno["xyz"], dtype=np.float64)
            intrinsics = CameraIntrinsics.from_matrix(anno["K"])
        except (KeyError, TypeError, IndexError, ProjectionError) as exc:
            raise DatasetError(f"Malformed annotation {index}: {exc}",
                               anno_path) from exc
        if uv.shape != (RHD_KEYPOINTS, 2) or xyz.shape != (RHD_KEYPOINTS, 3):
            raise DatasetError(
                f"Annotation {index} must hold {RHD_KEYPOINTS} keypoints",
                anno_path,
            )
        mask_path = os.path.join(split_dir, "mask", f"{index:05d}.png")
        mask = cv2.imread(mask_path, cv2.IMREAD_GRAYSCALE)
        if mask is None:
            raise DatasetError("Cannot read mask", mask_path)
        side = rhd_dominant_side(mask)
        chosen = slice(0, NUM_JOINTS) if side == "left" else slice(NUM_JOINTS, None)
        image = _read_rgb(os.path.join(split_dir, "color", f"{index:05d}.png"))
        meta = {"id": f"rhd/{split}/{index:05d}", "side": side,
                "intrinsics": intrinsics.to_dict()}
        yield preprocess_sample(image, uv[chosen], xyz[chosen] * 1000.0,
                                RHD_MARGIN, quantizer, meta,
                                mirror=side == "left")


def stb_sequences(split: str) -> List[str]:
    """STB BB sequence names of a split ('train' or 'test')."""
    if split not in ("train", "test"):
        raise DatasetError(f"Unknown STB split '{split}'", "")
    prefixes = STB_TRAIN_SEQUENCES if split == "train" else STB_TEST_SEQUENCES
    return [f"{prefix}{kind}" for prefix in prefixes for kind in STB_KINDS]


def _read_stb_labels(path: str) -> np.ndarray:
    try:
        hand_para = loadmat(path)["handPara"]
    except FileNotFoundError as exc:
        raise DatasetError("Missing STB label file", path) from exc
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"Malformed STB labels: {exc}", path) from exc
    hand_para = np.asarray(hand_para, dtype=np.float64)
    if hand_para.ndim != 3 or hand_para.shape[:2] != (3, NUM_JOINTS):
        raise DatasetError(
            f"handPara must be (3, {NUM_JOINTS}, frames), got {hand_para.shape}",
            path,
        )
    # (frames, 21, 3) in hand model joint order
    return hand_para.transpose(2, 1, 0)[:, STB_TO_HAND, :]


def load_stb(root: str, split: str = "train",
             quantizer: QuantizerConfig = QuantizerConfig(),
             limit: Optional[int] = None) -> Iterator[Sample]:
    """Yield STB stereo samples; 2D comes from projecting the 3D labels."""
    intrinsics = CameraIntrinsics(*STB_INTRINSICS)
    produced = 0
    for sequence in stb_sequences(split):
        poses = _read_stb_labels(os.path.join(root, "labels", f"{sequence}_BB.mat"))
        logger.info("Loading STB sequence %s (%d frames)", sequence, len(poses))
        for frame, pose_left in enumerate(poses):
            for view in STB_VIEWS:
                if limit is not None and produced >= limit:
                    return
                pose = pose_left.copy()
                if view == "right":
                    pose[:, 0] -= STB_BASELINE_MM
                image = _read_rgb(os.path.join(root, "images", sequence,
                                               f"BB_{view}_{frame}.png"))
                pose_2d = project_3d_to_2d(pose, intrinsics)
                meta = {"id": f"stb/{sequence}/{view}/{frame}", "side": "right",
                        "intrinsics": intrinsics.to_dict()}
                produced += 1
                yield preprocess_sample(image, pose_2d, pose, STB_MARGIN,
                                        quantizer, meta)


def default_cache_dir() -> str:
    return os.environ.get(
        CACHE_ENV, os.path.join(os.path.expanduser("~"), ".cache", "hand_pose_gcn")
    )


def _sample_arrays(sample: Sample) -> Dict[str, np.ndarray]:
    return {
        "image": sample.image,
        "pose_2d_px": sample.pose_2d_px,
        "pose_2d_norm": sample.pose_2d_norm,
        "pose_3d_mm": sample.pose_3d_mm,
        "pose_3d_norm": sample.pose_3d_norm,
        "bone_length_mm": np.float64(sample.bone_length_mm),
        "labels_2d": sample.labels_2d,
        "labels_3d": sample.labels_3d,
        "meta": np.array(json.dumps(sample.meta)),
    }


def read_cached_sample(path: str) -> Sample:
    try:
        with np.load(path, allow_pickle=False) as blob:
            return Sample(
                image=blob["image"],
                pose_2d_px=blob["pose_2d_px"],
                pose_2d_norm=blob["pose_2d_norm"],
                pose_3d_mm=blob["pose_3d_mm"],
                pose_3d_norm=blob["pose_3d_norm"],
                bone_length_mm=float(blob["bone_length_mm"]),
                labels_2d=blob["labels_2d"],
                labels_3d=blob["labels_3d"],
                meta=json.loads(str(blob["meta"])),
            )
    except (OSError, KeyError, ValueError) as exc:
        raise DatasetError(f"Broken cached sample: {exc}", path) from exc


def build_cache(samples: Iterable[Sample], cache_dir: str, key: str,
                quantizer: QuantizerConfig,
                lock_timeout: float = CACHE_LOCK_TIMEOUT) -> str:
    """Write samples under cache_dir/key once; later calls reuse the manifest.

    A concurrent builder of the same key is waited for up to lock_timeout
    seconds, after which its manifest is reused.

    :return: directory holding manifest.json and samples/
    """
    directory = os.path.join(cache_dir, key)
    manifest_path = os.path.join(directory, "manifest.json")
    os.makedirs(os.path.join(directory, "samples"), exist_ok=True)
    with LockFile(os.path.join(directory, "manifest.lock"), lock_timeout):
        if os.path.exists(manifest_path):
            logger.info("Reusing sample cache %s", directory)
            return directory
        count = 0
        for count, sample in enumerate(samples, start=1):
            sample.check_labels(quantizer)
            path = os.path.join(directory, "samples", f"{count - 1:06d}.npz")
            np.savez(path, **_sample_arrays(sample))
        manifest = {"format": CACHE_FORMAT, "key": key, "count": count,
                    "quantizer": {"splits_2d": quantizer.splits_2d,
                                  "splits_3d": quantizer.splits_3d,
                                  "image_size": quantizer.image_size}}
        with open(manifest_path, "w") as handle:
            json.dump(manifest, handle, indent=2)
        logger.info("Cached %d samples in %s", count, directory)
    return directory


def sample_to_tensors(sample: Sample) -> Dict[str, torch.Tensor]:
    """Network-ready tensors: CHW float image in [0, 1] and normalized poses."""
    image = torch.from_numpy(np.ascontiguousarray(sample.image))
    return {
        "image": image.permute(2, 0, 1).float().div(255.0),
        "pose_2d": torch.from_numpy(sample.pose_2d_norm).float(),
        "pose_3d": torch.from_numpy(sample.pose_3d_norm).float(),
        "pose_2d_px": torch.from_numpy(sample.pose_2d_px).float(),
        "pose_3d_mm": torch.from_numpy(sample.pose_3d_mm).float(),
        "bone_length": torch.tensor(sample.bone_length_mm, dtype=torch.float32),
        "labels_2d": torch.from_numpy(sample.labels_2d).long(),
        "labels_3d": torch.from_numpy(sample.labels_3d).long(),
    }


class SampleDataset(Dataset):
    """In-memory samples exposed as tensor dictionaries."""

    def __init__(self, samples: Sequence[Sample]):
        """Initialize instance attributes."""
        self.samples = list(samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> Dict[str, torch.Tensor]:
        return sample_to_tensors(self.samples[index])


class CachedDataset(Dataset):
    """Samples read lazily from a cache directory written by build_cache."""

    def __init__(self, directory: str, quantizer: QuantizerConfig):
        """Initialize instance attributes."""
        manifest_path = os.path.join(directory, "manifest.json")
        try:
            with open(manifest_path) as handle:
                manifest = json.load(handle)
        except FileNotFoundError as exc:
            raise DatasetError("Missing cache manifest", manifest_path) from exc
        if manifest.get("format") != CACHE_FORMAT:
            raise SchemaError(f"Cache {directory} is not in format {CACHE_FORMAT}")
        stored = manifest.get("quantizer", {})
        if (stored.get("splits_2d"), stored.get("splits_3d"),
                stored.get("image_size")) != (quantizer.splits_2d,
                                              quantizer.splits_3d,
                                              quantizer.image_size):
            raise SchemaError(f"Cache {directory} was built for {stored}")
        self.directory = directory
        self.count = int(manifest["count"])

    def __len__(self) -> int:
        return self.count

    def sample(self, index: int) -> Sample:
        if not 0 <= index < self.count:
            raise IndexError(index)
        return read_cached_sample(
            os.path.join(self.directory, "samples", f"{index:06d}.npz"))

    def __getitem__(self, index: int) -> Dict[str, torch.Tensor]:
        return sample_to_tensors(self.sample(index))


def load_samples(dataset: str, quantizer: QuantizerConfig,
                 data_root: Optional[str] = None, split: str = "train",
                 count: int = 32, seed: int = 0,
                 limit: Optional[int] = None) -> Iterator[Sample]:
    """Dispatch to the synthetic, RHD or STB sample stream.

    split is 'train' or 'test' for every dataset.
    """
    name = dataset.lower()
    if name == "synth":
        from hand_pose_gcn.synth import synth_dataset
        offset = 0 if split == "train" else 1_000_003
        return synth_dataset(count, seed + offset, quantizer)
    if not data_root:
        raise DatasetError(f"Dataset '{dataset}' needs a data root", "")
    if name == "rhd":
        rhd_split = "training" if split == "train" else "evaluation"
        return load_rhd(data_root, rhd_split, quantizer, limit)
    if name == "stb":
        return load_stb(data_root, split, quantizer, limit)
    raise DatasetError(f"Unknown dataset '{dataset}'", data_root)


def open_dataset(dataset: str, quantizer: QuantizerConfig,
                 data_root: Optional[str] = None, split: str = "train",
                 count: int = 32, seed: int = 0, cache_dir: Optional[str] = None,
                 cache_key: Optional[str] = None,
                 limit: Optional[int] = None) -> Dataset:
    """Build a torch Dataset; real datasets go through the on-disk cache."""
    stream = load_samples(dataset, quantizer, data_root, split, count, seed, limit)
    if dataset.lower() == "synth" or cache_key is None:
        return SampleDataset(tqdm(stream, desc=f"{dataset}/{split}",
                                  total=count if dataset.lower() == "synth" else None,
                                  disable=None))
    directory = build_cache(
        tqdm(stream, desc=f"{dataset}/{split}", disable=None),
        cache_dir or default_cache_dir(), f"{dataset.lower()}-{split}-{cache_key}",
        quantizer,
    )
    return CachedDataset(directory, quantizer)


def crop_round_trip_error(sample: Sample, original_2d: PoseLike) -> float:
    """Largest pixel error of mapping the crop-frame pose back to the image."""
    transform = CropTransform.from_dict(sample.meta["crop"])
    crop_2d = np.asarray(sample.pose_2d_px, dtype=np.float64).copy()
    if sample.meta.get("mirrored"):
        crop_2d[:, 0] = transform.output_size - crop_2d[:, 0]
    restored = transform.inverse(crop_2d)
    return float(np.abs(restored - validate_pose(original_2d, 2)).max())

