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

"""Config is structure for configuration of hand pose runs."""

import math
import os
from configparser import ConfigParser
from typing import Any, Dict, List, Optional, Tuple, Union
from warnings import warn

from reportportal_client import ClientType, OutputType
from reportportal_client.logs import MAX_LOG_BATCH_PAYLOAD_SIZE

from hand_pose_gcn.backbone import BackboneConfig
from hand_pose_gcn.data import default_cache_dir
from hand_pose_gcn.errors import ConfigurationError
from hand_pose_gcn.losses import LossWeights
from hand_pose_gcn.posenet import ModelConfig, ModelVariant, Refinement
from hand_pose_gcn.quantizer import QuantizerConfig
from hand_pose_gcn.training import Stage, TrainConfig
from hand_pose_gcn.utils import config_hash, strtobool

CFG_SECTION = "hand_pose_gcn"
RP_CFG_SECTION = "report_portal"
DEFAULT_CFG_FILE = "hand_pose_gcn.ini"
DEFAULT_LAUNCH_NAME = "Hand Pose GCN Run"
DATASETS = ("synth", "rhd", "stb")
MAX_CLASSES = 27


def _int(value: Optional[Union[str, int]], default: int) -> int:
    return int(value) if value not in (None, "") else default


def _float(value: Optional[Union[str, float]], default: float) -> float:
    return float(value) if value not in (None, "") else default


def _bool(value: Optional[Union[str, bool]], default: bool) -> bool:
    return strtobool(value) if value not in (None, "") else default


class ReportingConfig(object):
    """Optional ReportPortal reporting of CLI runs."""

    endpoint: Optional[str]
    project: Optional[str]
    api_key: Optional[str]
    enabled: bool
    launch_name: str
    launch_description: Optional[str]
    launch_attributes: Optional[List[str]]
    debug_mode: bool
    log_batch_size: int
    log_batch_payload_size: int
    launch_uuid_print: bool
    launch_uuid_print_output: Optional[OutputType]
    client_type: ClientType
    http_timeout: Optional[Union[Tuple[float, float], float]]

    def __init__(
            self,
            endpoint: Optional[str] = None,
            project: Optional[str] = None,
            api_key: Optional[str] = None,
            launch_name: Optional[str] = None,
            launch_description: Optional[str] = None,
            launch_attributes: Optional[str] = None,
            debug_mode: Optional[Union[str, bool]] = None,
            log_batch_size: Optional[str] = None,
            log_batch_payload_size: Optional[str] = None,
            launch_uuid_print: Optional[str] = None,
            launch_uuid_print_output: Optional[str] = None,
            client_type: Optional[str] = None,
            connect_timeout: Optional[Union[str, float]] = None,
            read_timeout: Optional[Union[str, float]] = None,
            **kwargs
    ):
        """Initialize instance attributes."""
        self.endpoint = endpoint
        self.project = project
        self.api_key = api_key
        self.launch_name = launch_name or DEFAULT_LAUNCH_NAME
        self.launch_description = launch_description
        self.launch_attributes = launch_attributes and launch_attributes.split(
            " "
        )
        self.debug_mode = _bool(debug_mode, False)
        self.log_batch_size = _int(log_batch_size, 20)
        self.log_batch_payload_size = _int(log_batch_payload_size,
                                           MAX_LOG_BATCH_PAYLOAD_SIZE)
        if self.endpoint and self.project and not self.api_key:
            warn(
                message="Argument `api_key` is `None` or empty string, "
                        "reporting to ReportPortal stays disabled. "
                        "Please check your configuration.",
                category=RuntimeWarning,
                stacklevel=2
            )
        self.enabled = all([self.endpoint, self.project, self.api_key])
        self.launch_uuid_print = _bool(launch_uuid_print, False)
        self.launch_uuid_print_output = OutputType[launch_uuid_print_output.upper()] \
            if launch_uuid_print_output else None
        self.client_type = ClientType[client_type.upper()] if client_type else ClientType.SYNC

        connect_timeout = float(connect_timeout) if connect_timeout else None
        read_timeout = float(read_timeout) if read_timeout else None

        if connect_timeout is None and read_timeout is None:
            self.http_timeout = None
        elif connect_timeout is not None and read_timeout is not None:
            self.http_timeout = (connect_timeout, read_timeout)
        else:
            self.http_timeout = connect_timeout or read_timeout


class Config(object):
    """Dataset, model and training settings of one run."""

    dataset: str
    data_root: Optional[str]
    cache_dir: str
    output_dir: str
    seed: int
    synth_count: int
    quantizer: QuantizerConfig
    variant: ModelVariant
    learned_adjacency: bool
    stage: Stage
    reporting: ReportingConfig

    def __init__(
            self,
            dataset: Optional[str] = None,
            data_root: Optional[str] = None,
            cache_dir: Optional[str] = None,
            output_dir: Optional[str] = None,
            seed: Optional[str] = None,
            synth_count: Optional[str] = None,
            limit: Optional[str] = None,
            image_size: Optional[str] = None,
            splits_2d: Optional[str] = None,
            splits_3d: Optional[str] = None,
            variant: Optional[str] = None,
            use_classification: Optional[Union[str, bool]] = None,
            refinement: Optional[Union[str, Refinement]] = None,
            global_adjacency: Optional[str] = None,
            knn_k: Optional[str] = None,
            theta_init: Optional[str] = None,
            ann_temperature: Optional[str] = None,
            classifier_hidden: Optional[str] = None,
            regressor_hidden: Optional[str] = None,
            regressor_layers: Optional[str] = None,
            refine_hidden: Optional[str] = None,
            refine_layers: Optional[str] = None,
            fc_hidden: Optional[str] = None,
            backbone_widths: Optional[str] = None,
            backbone_std: Optional[str] = None,
            graph_gain: Optional[str] = None,
            adjacency_noise: Optional[str] = None,
            stage: Optional[Union[str, Stage]] = None,
            epochs: Optional[str] = None,
            batch_size: Optional[str] = None,
            steps: Optional[str] = None,
            delta1: Optional[str] = None,
            delta2: Optional[str] = None,
            checkpoint_every: Optional[str] = None,
            log_every: Optional[str] = None,
            num_workers: Optional[str] = None,
            coarse_checkpoint: Optional[str] = None,
            resume: Optional[str] = None,
            device: Optional[str] = None,
            reporting: Optional[ReportingConfig] = None,
            **kwargs
    ):
        """Initialize instance attributes."""
        self.dataset = (dataset or "synth").lower()
        if self.dataset not in DATASETS:
            raise ConfigurationError(
                f"Unknown dataset '{dataset}', expected one of {DATASETS}"
            )
        self.data_root = data_root or None
        self.cache_dir = cache_dir or default_cache_dir()
        self.output_dir = output_dir or "out"
        self.seed = _int(seed, 0)
        self.synth_count = _int(synth_count, 32)
        self.limit = _int(limit, 0) or None
        self.quantizer = QuantizerConfig(
            splits_2d=_int(splits_2d, 4),
            splits_3d=_int(splits_3d, 3),
            image_size=_int(image_size, 256),
        )

        if variant:
            self.variant = ModelVariant.from_name(str(variant))
        else:
            try:
                mode = Refinement(refinement) if refinement else Refinement.ANN
            except ValueError:
                raise ConfigurationError(
                    f"Unknown refinement '{refinement}'") from None
            self.variant = ModelVariant(_bool(use_classification, True), mode)
        if (not self.variant.use_classification
                and self.variant.refinement is not Refinement.NONE):
            warn(
                message="Refinement is enabled while classification is off; "
                        "the refinement head then starts from a coarse stage "
                        "without class relations.",
                category=RuntimeWarning,
                stacklevel=2
            )
        for space, classes in (("2D", self.quantizer.num_classes_2d),
                               ("3D", self.quantizer.num_classes_3d)):
            if classes > MAX_CLASSES:
                warn(
                    message=f"{classes} {space} classes make class relation "
                            "matrices close to the identity.",
                    category=RuntimeWarning,
                    stacklevel=2
                )

        adjacency = (global_adjacency or "learned").lower()
        if adjacency not in ("learned", "skeleton"):
            raise ConfigurationError(
                f"global_adjacency must be 'learned' or 'skeleton', got {adjacency}"
            )
        self.learned_adjacency = adjacency == "learned"
        self.knn_k = _int(knn_k, 5)
        self.theta_init = _float(theta_init, 0.05)
        self.ann_temperature = _float(ann_temperature, 0.01)
        self.classifier_hidden = _int(classifier_hidden, 64)
        self.regressor_hidden = _int(regressor_hidden, 64)
        self.regressor_layers = _int(regressor_layers, 3)
        self.refine_hidden = _int(refine_hidden, 64)
        self.refine_layers = _int(refine_layers, 3)
        self.fc_hidden = _int(fc_hidden, 256)
        self.backbone_widths = tuple(
            int(w) for w in backbone_widths.replace(",", " ").split()
        ) if backbone_widths else BackboneConfig().widths
        if len(self.backbone_widths) != 5:
            raise ConfigurationError(
                f"backbone_widths needs 5 entries, got {self.backbone_widths}"
            )
        self.backbone_std = _float(backbone_std, 0.02)
        self.graph_gain = _float(graph_gain, math.sqrt(2.0))
        self.adjacency_noise = _float(adjacency_noise, 0.01)

        try:
            self.stage = Stage(stage) if stage else Stage.COARSE
        except ValueError:
            raise ConfigurationError(f"Unknown stage '{stage}'") from None
        self.epochs = _int(epochs, 400)
        self.batch_size = _int(batch_size, 64)
        self.steps = _int(steps, 0) or None
        self.weights = LossWeights(_float(delta1, 100.0), _float(delta2, 1.0))
        self.checkpoint_every = _int(checkpoint_every, 1000)
        self.log_every = _int(log_every, 10)
        self.num_workers = _int(num_workers, 0)
        self.coarse_checkpoint = coarse_checkpoint or None
        self.resume = resume or None
        self.device = device or "cpu"
        self.reporting = reporting or ReportingConfig()

    def model_config(self, variant: Optional[ModelVariant] = None,
                     quantizer: Optional[QuantizerConfig] = None) -> ModelConfig:
        return ModelConfig(
            quantizer=quantizer or self.quantizer,
            backbone=BackboneConfig(widths=self.backbone_widths,
                                    init_std=self.backbone_std),
            variant=variant or self.variant,
            classifier_hidden=self.classifier_hidden,
            regressor_hidden=self.regressor_hidden,
            regressor_layers=self.regressor_layers,
            refine_hidden=self.refine_hidden,
            refine_layers=self.refine_layers,
            fc_hidden=self.fc_hidden,
            knn_k=self.knn_k,
            theta_init=self.theta_init,
            ann_temperature=self.ann_temperature,
            learned_adjacency=self.learned_adjacency,
            adjacency_noise=self.adjacency_noise,
            graph_gain=self.graph_gain,
        )

    def train_config(self, stage: Optional[Stage] = None,
                     coarse_checkpoint: Optional[str] = None) -> TrainConfig:
        return TrainConfig(
            stage=stage or self.stage,
            epochs=self.epochs,
            batch_size=self.batch_size,
            steps=self.steps,
            seed=self.seed,
            weights=self.weights,
            checkpoint_every=self.checkpoint_every,
            log_every=self.log_every,
            num_workers=self.num_workers,
            coarse_checkpoint=coarse_checkpoint or self.coarse_checkpoint,
            resume=self.resume,
            device=self.device,
        )

    def data_settings(self) -> Dict[str, Any]:
        """Settings that change preprocessed samples."""
        settings = {"dataset": self.dataset,
                    "image_size": self.quantizer.image_size,
                    "splits_2d": self.quantizer.splits_2d,
                    "splits_3d": self.quantizer.splits_3d}
        if self.dataset == "synth":
            settings.update(seed=self.seed, synth_count=self.synth_count)
        else:
            settings.update(
                data_root=os.path.abspath(self.data_root) if self.data_root else None,
                limit=self.limit,
            )
        return settings

    def cache_key(self, split: str,
                  quantizer: Optional[QuantizerConfig] = None) -> str:
        """Hash naming the preprocessed sample cache of one split."""
        quantizer = quantizer or self.quantizer
        return config_hash(dict(self.data_settings(),
                                splits_2d=quantizer.splits_2d,
                                image_size=quantizer.image_size,
                                splits_3d=quantizer.splits_3d, split=split))

    def settings_hash(self, variant: Optional[ModelVariant] = None) -> str:
        """Short hash of everything that shapes a trained model."""
        train = self.train_config().to_dict()
        for volatile in ("coarse_checkpoint", "resume", "num_workers",
                         "log_every", "checkpoint_every", "device", "stage"):
            train.pop(volatile)
        return config_hash({
            "data": self.data_settings(),
            "model": self.model_config(variant).to_dict(),
            "train": train,
        })

    def run_name(self, variant: Optional[ModelVariant] = None) -> str:
        variant = variant or self.variant
        return f"{self.dataset}-{variant.name}-{self.settings_hash(variant)}"


def read_config(path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> Config:
    """Read config from file, apply command line overrides, return Config."""
    cp = ConfigParser()
    cp.read(path or DEFAULT_CFG_FILE)
    cfg = {}
    if cp.has_section(CFG_SECTION):
        cfg.update(cp[CFG_SECTION])
    cfg.update({key: value for key, value in (overrides or {}).items()
                if value is not None})
    rp_cfg = {}
    if cp.has_section(RP_CFG_SECTION):
        rp_cfg.update(cp[RP_CFG_SECTION])

    return Config(reporting=ReportingConfig(**rp_cfg), **cfg)

