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

"""Two-stage training loop.

The coarse stage optimizes backbone, classifiers and regressors against the
weighted coarse objective. The refinement stage restores a coarse checkpoint,
freezes it and optimizes only the refinement head (including the learned
threshold). Both stages use AdaDelta with its default parameters.
"""

import csv
import logging
import math
import os
import random
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset, Sampler

from hand_pose_gcn.errors import (ConfigurationError, NonFiniteLossError,
                                  SchemaError)
from hand_pose_gcn.losses import (LossWeights, coarse_loss, refinement_loss,
                                  regression_loss)
from hand_pose_gcn.posenet import (HandPoseNet, ModelConfig,
                                   check_compatible, load_checkpoint,
                                   save_checkpoint)

logger = logging.getLogger(__name__)

LOSS_COLUMNS = {
    "coarse": ["step", "epoch", "reg2d", "reg3d", "cls2d", "cls3d", "total"],
    "refinement": ["step", "epoch", "coarse3d", "refine", "theta", "total"],
}


class Stage(Enum):
    """Enum holding the training stages."""

    COARSE = 1
    REFINEMENT = 2

    @classmethod
    def _missing_(cls, value):
        if value:
            value_upper = str(value).upper()
            for member in cls:
                if member.name == value_upper:
                    return member
        return None


@dataclass(frozen=True)
class TrainConfig(object):
    """Optimization schedule of one stage."""

    stage: Stage = Stage.COARSE
    epochs: int = 400
    batch_size: int = 64
    steps: Optional[int] = None
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_every: int = 1000
    log_every: int = 10
    num_workers: int = 0
    coarse_checkpoint: Optional[str] = None
    resume: Optional[str] = None
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.steps is not None and self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["stage"] = self.stage.name.lower()
        return data


@dataclass
class TrainResult(object):
    model: HandPoseNet
    checkpoint_path: str
    loss_csv: str
    steps: int
    last_losses: Dict[str, float]


class EpochSampler(Sampler):
    """Random permutation derived from (seed, epoch) only."""

    def __init__(self, size: int, seed: int):
        """Initialize instance attributes."""
        self.size = size
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __iter__(self) -> Iterator[int]:
        generator = torch.Generator()
        generator.manual_seed(self.seed * 1_000_003 + self.epoch)
        return iter(torch.randperm(self.size, generator=generator).tolist())

    def __len__(self) -> int:
        return self.size


def load_coarse_weights(model: HandPoseNet, path: str) -> Dict[str, Any]:
    """Copy coarse-stage parameters of a checkpoint into model."""
    coarse, payload = load_checkpoint(path)
    check_compatible(coarse.config, model.config)
    if (coarse.config.variant.use_classification
            != model.config.variant.use_classification):
        raise SchemaError(
            "Coarse checkpoint and model disagree on classification"
        )
    state = {key: value for key, value in coarse.state_dict().items()
             if not key.startswith("refinement.")}
    missing, unexpected = model.load_state_dict(state, strict=False)
    missing = [key for key in missing if not key.startswith("refinement.")]
    if missing or unexpected:
        raise SchemaError(
            f"Coarse checkpoint {path} does not fit: missing={missing} "
            f"unexpected={unexpected}"
        )
    logger.info("Restored coarse stage from %s (step %s)", path,
                payload.get("step"))
    return payload


def capture_rng_state() -> Dict[str, Any]:
    """Global torch, numpy and python RNG state in checkpoint-safe types."""
    name, keys, position, has_gauss, cached = np.random.get_state()
    version, internal, gauss = random.getstate()
    return {
        "torch": torch.get_rng_state(),
        "numpy": [name, keys.tolist(), int(position), int(has_gauss),
                  float(cached)],
        "python": [version, list(internal), gauss],
    }


def restore_rng_state(state: Dict[str, Any]) -> None:
    torch.set_rng_state(state["torch"])
    name, keys, position, has_gauss, cached = state["numpy"]
    np.random.set_state((name, np.asarray(keys, dtype=np.uint32), position,
                         has_gauss, cached))
    version, internal, gauss = state["python"]
    random.setstate((version, tuple(internal), gauss))


class Trainer(object):
    """Runs one stage of training and writes checkpoints and a loss CSV."""

    def __init__(self, model: HandPoseNet, config: TrainConfig,
                 dataset: Dataset, output_dir: str, run_name: str,
                 reporter: Any = None):
        """Initialize instance attributes."""
        self.model = model
        self.config = config
        self.dataset = dataset
        self.output_dir = output_dir
        self.run_name = run_name
        self.reporter = reporter
        self.device = torch.device(config.device)
        self.step = 0
        stage = config.stage.name.lower()
        self.checkpoint_path = os.path.join(output_dir, f"{run_name}-{stage}.pt")
        self.loss_csv = os.path.join(output_dir, f"{run_name}-{stage}-loss.csv")

        if config.stage is Stage.REFINEMENT:
            if model.refinement is None:
                raise ConfigurationError(
                    "Refinement stage needs a variant with refinement"
                )
            if config.resume is None:
                if not config.coarse_checkpoint:
                    raise ConfigurationError(
                        "Refinement stage requires a coarse checkpoint"
                    )
                if not os.path.exists(config.coarse_checkpoint):
                    raise ConfigurationError(
                        f"Coarse checkpoint {config.coarse_checkpoint} not found"
                    )
                load_coarse_weights(model, config.coarse_checkpoint)
            model.freeze_coarse()
            parameters = model.refinement_parameters()
        else:
            parameters = model.coarse_parameters()
        self.model.to(self.device)
        self.optimizer = torch.optim.Adadelta(parameters)
        self.sampler = EpochSampler(len(dataset), config.seed)
        self.loader = DataLoader(dataset, batch_size=config.batch_size,
                                 sampler=self.sampler,
                                 num_workers=config.num_workers)
        if config.resume:
            self.resume(config.resume)

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(len(self.dataset) / self.config.batch_size)

    @property
    def total_steps(self) -> int:
        if self.config.steps is not None:
            return self.config.steps
        return self.config.epochs * self.batches_per_epoch

    def resume(self, path: str) -> None:
        model, payload = load_checkpoint(path)
        if payload.get("stage") != self.config.stage.name.lower():
            raise SchemaError(
                f"Checkpoint {path} belongs to stage {payload.get('stage')}"
            )
        check_compatible(model.config, self.model.config)
        self.model.load_state_dict(model.state_dict())
        self.optimizer.load_state_dict(payload["optimizer"])
        self.step = int(payload["step"])
        if "rng" in payload:
            restore_rng_state(payload["rng"])
        logger.info("Resuming %s stage at step %d", self.config.stage.name,
                    self.step)

    def save(self) -> None:
        save_checkpoint(
            self.checkpoint_path, self.model,
            stage=self.config.stage.name.lower(),
            train_config=self.config.to_dict(),
            optimizer=self.optimizer.state_dict(),
            step=self.step,
            epoch=self.step // self.batches_per_epoch,
            rng=capture_rng_state(),
        )

    def compute_loss(self, batch: Dict[str, torch.Tensor]):
        batch = {key: value.to(self.device) for key, value in batch.items()}
        outputs = self.model(batch["image"])
        if self.config.stage is Stage.COARSE:
            total, components = coarse_loss(
                outputs, batch["pose_2d"], batch["pose_3d"],
                batch["labels_2d"], batch["labels_3d"], self.config.weights,
            )
        else:
            total = refinement_loss(outputs.pose_3d_refined, batch["pose_3d"])
            with torch.no_grad():
                coarse = regression_loss(outputs.pose_3d_coarse, batch["pose_3d"])
            theta = self.model.theta
            components = {"coarse3d": float(coarse), "refine": float(total.detach()),
                          "theta": float("nan") if theta is None else theta}
        components["total"] = float(total.detach())
        return total, components

    def batches(self) -> Iterator[Dict[str, torch.Tensor]]:
        """Batches from the current step on, replaying the epoch order."""
        epoch, skip = divmod(self.step, self.batches_per_epoch)
        while True:
            self.sampler.set_epoch(epoch)
            for index, batch in enumerate(self.loader):
                if index < skip:
                    continue
                yield batch
            skip = 0
            epoch += 1

    def train(self) -> TrainResult:
        os.makedirs(self.output_dir, exist_ok=True)
        stage = self.config.stage.name.lower()
        columns = LOSS_COLUMNS[stage]
        mode = "a" if self.config.resume and os.path.exists(self.loss_csv) else "w"
        self.model.train()
        last: Dict[str, float] = {}
        logger.info("Training %s stage of %s for %d steps", stage,
                    self.model.variant.name, self.total_steps)
        with open(self.loss_csv, mode, newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns,
                                    extrasaction="ignore")
            if mode == "w":
                writer.writeheader()
            batches = self.batches()
            while self.step < self.total_steps:
                batch = next(batches)
                self.optimizer.zero_grad()
                total, components = self.compute_loss(batch)
                if not torch.isfinite(total):
                    logger.error("Non-finite loss at step %d: %s", self.step,
                                 components)
                    raise NonFiniteLossError(self.step, components)
                total.backward()
                self.optimizer.step()
                self.step += 1
                last = components
                writer.writerow(dict(components, step=self.step,
                                     epoch=(self.step - 1) // self.batches_per_epoch))
                if self.step % self.config.log_every == 0:
                    message = f"step {self.step}/{self.total_steps} " + " ".join(
                        f"{key}={value:.6g}" for key, value in components.items())
                    logger.info(message)
                    if self.reporter is not None:
                        self.reporter.log(message)
                if self.step % self.config.checkpoint_every == 0:
                    handle.flush()
                    self.save()
        self.save()
        return TrainResult(self.model, self.checkpoint_path, self.loss_csv,
                           self.step, last)


def parameter_snapshot(parameters: List[torch.Tensor]) -> List[torch.Tensor]:
    """Detached copies for freeze checks."""
    return [p.detach().clone() for p in parameters]


def train(model_config: ModelConfig, train_config: TrainConfig,
          dataset: Dataset, output_dir: str, run_name: str,
          reporter: Any = None) -> TrainResult:
    """Build a fresh network and run one stage on dataset."""
    torch.manual_seed(train_config.seed)
    model = HandPoseNet(model_config)
    trainer = Trainer(model, train_config, dataset, output_dir, run_name,
                      reporter)
    return trainer.train()
