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

import csv
import os
import random
from unittest import mock

import numpy as np
# noinspection PyPackageRequirements
import pytest
import torch
from delayed_assert import assert_expectations, expect

from hand_pose_gcn.data import SampleDataset, load_samples
from hand_pose_gcn.errors import (ConfigurationError, NonFiniteLossError,
                                  SchemaError)
from hand_pose_gcn.posenet import VARIANTS, HandPoseNet
from hand_pose_gcn.training import (EpochSampler, Stage, TrainConfig, Trainer,
                                    load_coarse_weights, parameter_snapshot,
                                    train)


@pytest.fixture()
def dataset(tiny_quantizer):
    return SampleDataset(load_samples("synth", tiny_quantizer, count=4, seed=3))


@pytest.fixture()
def coarse_config():
    return TrainConfig(stage=Stage.COARSE, batch_size=2, steps=3, log_every=1)


@pytest.fixture()
def coarse_result(tmp_path, tiny_model_config, dataset, coarse_config):
    return train(tiny_model_config.with_variant(VARIANTS["B"]), coarse_config,
                 dataset, str(tmp_path), "run")


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


@pytest.mark.parametrize(
    "value,expected",
    [("coarse", Stage.COARSE), ("Refinement", Stage.REFINEMENT), (1, Stage.COARSE)],
)
def test_stage_lookup(value, expected):
    assert Stage(value) is expected


def test_train_config():
    config = TrainConfig(stage=Stage.REFINEMENT, steps=5)
    expect(config.to_dict()["stage"] == "refinement")
    expect(config.to_dict()["weights"] == {"delta1": 100.0, "delta2": 1.0})
    assert_expectations()
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(steps=0)


def test_epoch_sampler():
    sampler = EpochSampler(10, seed=4)
    first = list(sampler)
    expect(sorted(first) == list(range(10)))
    expect(list(sampler) == first)
    sampler.set_epoch(1)
    expect(list(sampler) != first)
    expect(len(sampler) == 10)
    assert_expectations()


def test_coarse_training_outputs(coarse_result):
    rows = read_rows(coarse_result.loss_csv)
    expect(coarse_result.steps == 3)
    expect(os.path.basename(coarse_result.checkpoint_path) == "run-coarse.pt")
    expect(os.path.exists(coarse_result.checkpoint_path))
    expect([row["step"] for row in rows] == ["1", "2", "3"])
    expect([row["epoch"] for row in rows] == ["0", "0", "1"])
    expect(set(rows[0]) == {"step", "epoch", "reg2d", "reg3d", "cls2d",
                            "cls3d", "total"})
    expect(coarse_result.last_losses["total"] == pytest.approx(
        float(rows[-1]["total"])))
    assert_expectations()


def test_total_steps_from_epochs(tiny_model_config, dataset, tmp_path):
    trainer = Trainer(HandPoseNet(tiny_model_config),
                      TrainConfig(epochs=3, batch_size=3), dataset,
                      str(tmp_path), "run")
    expect(trainer.batches_per_epoch == 2)
    expect(trainer.total_steps == 6)
    assert_expectations()


def test_same_seed_same_losses(tmp_path, tiny_model_config, dataset,
                               coarse_config):
    config = tiny_model_config.with_variant(VARIANTS["B"])
    first = train(config, coarse_config, dataset, os.path.join(tmp_path, "a"), "run")
    second = train(config, coarse_config, dataset, os.path.join(tmp_path, "b"), "run")
    assert first.last_losses == second.last_losses


def test_reporter_receives_progress(tmp_path, tiny_model_config, dataset,
                                    coarse_config):
    reporter = mock.Mock()
    train(tiny_model_config.with_variant(VARIANTS["B"]), coarse_config,
          dataset, str(tmp_path), "run", reporter)
    assert reporter.log.call_count == 3


def test_resume_matches_uninterrupted(tmp_path, tiny_model_config, dataset):
    config = tiny_model_config.with_variant(VARIANTS["B"])
    straight = train(config, TrainConfig(batch_size=2, steps=4),
                     dataset, os.path.join(tmp_path, "straight"), "run")
    interrupted_dir = os.path.join(tmp_path, "interrupted")
    half = train(config, TrainConfig(batch_size=2, steps=2), dataset,
                 interrupted_dir, "run")
    resumed = train(config, TrainConfig(batch_size=2, steps=4,
                                        resume=half.checkpoint_path),
                    dataset, interrupted_dir, "run")
    expect(resumed.steps == 4)
    expect(len(read_rows(resumed.loss_csv)) == 4)
    for key, value in straight.model.state_dict().items():
        expect(torch.allclose(value.float(),
                              resumed.model.state_dict()[key].float(),
                              atol=1e-6), key)
    assert_expectations()


def test_resume_restores_global_rng(tmp_path, tiny_model_config, dataset):
    config = tiny_model_config.with_variant(VARIANTS["B"])
    first = train(config, TrainConfig(batch_size=2, steps=2), dataset,
                  str(tmp_path), "run")
    expected = (torch.rand(4), np.random.rand(4), random.random())
    torch.manual_seed(99)
    np.random.seed(99)
    random.seed(99)
    Trainer(HandPoseNet(config),
            TrainConfig(batch_size=2, steps=4, resume=first.checkpoint_path),
            dataset, str(tmp_path), "run")
    expect(torch.equal(torch.rand(4), expected[0]))
    expect(np.array_equal(np.random.rand(4), expected[1]))
    expect(random.random() == expected[2])
    assert_expectations()

def test_resume_wrong_stage(tmp_path, tiny_model_config, dataset,
                            coarse_result):
    config = TrainConfig(stage=Stage.REFINEMENT, batch_size=2, steps=1,
                         resume=coarse_result.checkpoint_path)
    with pytest.raises(SchemaError):
        Trainer(HandPoseNet(tiny_model_config), config, dataset,
                str(tmp_path), "run")


def test_refinement_needs_checkpoint(tmp_path, tiny_model_config, dataset):
    with pytest.raises(ConfigurationError):
        Trainer(HandPoseNet(tiny_model_config),
                TrainConfig(stage=Stage.REFINEMENT), dataset, str(tmp_path), "run")
    with pytest.raises(ConfigurationError):
        Trainer(HandPoseNet(tiny_model_config),
                TrainConfig(stage=Stage.REFINEMENT,
                            coarse_checkpoint=os.path.join(tmp_path, "none.pt")),
                dataset, str(tmp_path), "run")


def test_refinement_needs_refinement_variant(tmp_path, tiny_model_config,
                                             dataset, coarse_result):
    config = TrainConfig(stage=Stage.REFINEMENT,
                         coarse_checkpoint=coarse_result.checkpoint_path)
    with pytest.raises(ConfigurationError):
        Trainer(HandPoseNet(tiny_model_config.with_variant(VARIANTS["B"])),
                config, dataset, str(tmp_path), "run")


@pytest.mark.parametrize("name", ["C", "D", "Full"])
def test_refinement_keeps_coarse_stage_fixed(tmp_path, tiny_model_config,
                                             dataset, coarse_result, name):
    model = HandPoseNet(tiny_model_config.with_variant(VARIANTS[name]))
    config = TrainConfig(stage=Stage.REFINEMENT, batch_size=2, steps=3,
                         coarse_checkpoint=coarse_result.checkpoint_path)
    trainer = Trainer(model, config, dataset, str(tmp_path), name)
    coarse_before = parameter_snapshot(model.coarse_parameters())
    buffers_before = {k: v.clone() for k, v in model.backbone.state_dict().items()}
    refine_before = parameter_snapshot(model.refinement_parameters())
    result = trainer.train()
    expect(all(torch.equal(a, b) for a, b in
               zip(coarse_before, model.coarse_parameters())))
    expect(all(torch.equal(v, model.backbone.state_dict()[k])
               for k, v in buffers_before.items()))
    expect(any(not torch.equal(a, b) for a, b in
               zip(refine_before, model.refinement_parameters())))
    expect(all(torch.equal(a, b) for a, b in zip(
        coarse_result.model.coarse_parameters(), model.coarse_parameters())))
    rows = read_rows(result.loss_csv)
    expect(len(rows) == 3)
    expect(set(rows[0]) == {"step", "epoch", "coarse3d", "refine", "theta",
                            "total"})
    assert_expectations()


def test_theta_trains_only_in_refinement(tmp_path, tiny_model_config, dataset,
                                         coarse_result):
    expect(coarse_result.model.theta is None)
    model = HandPoseNet(tiny_model_config)
    expect(all(p is not model.refinement.threshold.theta
               for p in model.coarse_parameters()))
    expect(any(p is model.refinement.threshold.theta
               for p in model.refinement_parameters()))
    assert_expectations()


def test_load_coarse_weights_classification_mismatch(tiny_model_config,
                                                     coarse_result):
    model = HandPoseNet(tiny_model_config.with_variant(VARIANTS["A"]))
    with pytest.raises(SchemaError):
        load_coarse_weights(model, coarse_result.checkpoint_path)


def test_non_finite_loss(tmp_path, tiny_model_config, dataset, coarse_config):
    trainer = Trainer(HandPoseNet(tiny_model_config), coarse_config, dataset,
                      str(tmp_path), "run")
    nan = torch.tensor(float("nan"), requires_grad=True)
    with mock.patch.object(trainer, "compute_loss",
                           return_value=(nan, {"total": float("nan")})):
        with pytest.raises(NonFiniteLossError) as error:
            trainer.train()
    assert error.value.step == 0
