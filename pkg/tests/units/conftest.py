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

# noinspection PyPackageRequirements
import pytest

from hand_pose_gcn.backbone import BackboneConfig
from hand_pose_gcn.posenet import ModelConfig
from hand_pose_gcn.quantizer import QuantizerConfig
from hand_pose_gcn.utils import Singleton

TINY_SIZE = 64


@pytest.fixture(autouse=True)
def clean_instances():
    yield
    Singleton._instances = {}


@pytest.fixture()
def tiny_quantizer():
    return QuantizerConfig(splits_2d=4, splits_3d=3, image_size=TINY_SIZE)


@pytest.fixture()
def tiny_model_config(tiny_quantizer):
    return ModelConfig(
        quantizer=tiny_quantizer,
        backbone=BackboneConfig(widths=(4, 4, 8, 8, 8)),
        classifier_hidden=8,
        regressor_hidden=8,
        refine_hidden=8,
        fc_hidden=16,
    )
