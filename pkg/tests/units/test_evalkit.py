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

import numpy as np
# noinspection PyPackageRequirements
import pytest
import torch
from delayed_assert import assert_expectations, expect
from torch.utils.data import DataLoader

from hand_pose_gcn.data import SampleDataset, load_samples
from hand_pose_gcn.errors import ConfigurationError
from hand_pose_gcn.evalkit import (THRESHOLDS_2D_PX, THRESHOLDS_3D_MM,
                                   PckCurve, classification_report, epe,
                                   evaluate, joint_errors, pck_auc)
from hand_pose_gcn.posenet import VARIANTS, HandPoseNet
from hand_pose_gcn.skeleton import NUM_JOINTS


def test_epe():
    gt = np.random.default_rng(0).normal(size=(4, NUM_JOINTS, 3))
    half = gt.copy()
    half[:, :10, 0] += 2.0
    half[:, 10:20, 1] -= 2.0
    half[:, 20, 2] += 1.0
    expect(epe(gt, gt) == 0.0)
    expect(epe(gt + [3.0, 4.0, 0.0], gt) == pytest.approx(5.0))
    expect(epe(half[:, :20], gt[:, :20]) == pytest.approx(2.0))
    assert_expectations()


def test_epe_half_offset():
    gt = np.zeros((2, 3))
    pred = np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert epe(pred, gt) == pytest.approx(1.0)


def test_epe_units_must_match():
    pose = np.zeros((NUM_JOINTS, 3))
    expect(epe(pose, pose, "mm", "mm") == 0.0)
    assert_expectations()
    with pytest.raises(ConfigurationError):
        epe(pose, pose, "mm", "norm")


def test_joint_errors():
    errors = joint_errors(torch.ones(2, NUM_JOINTS, 2), torch.ones(2, NUM_JOINTS, 2))
    expect(errors.shape == (2 * NUM_JOINTS,))
    expect(np.all(errors == 0))
    assert_expectations()
    with pytest.raises(ValueError):
        joint_errors(np.zeros((NUM_JOINTS, 3)), np.zeros((NUM_JOINTS, 2)))


@pytest.mark.parametrize("error,expected", [(5.0, 1.0), (100.0, 0.0)])
def test_pck_degenerate(error, expected):
    curve, auc = pck_auc(np.full(100, error), THRESHOLDS_3D_MM)
    expect(all(v == expected for v in curve.values))
    expect(auc == pytest.approx(expected, abs=1e-12))
    expect(len(curve.thresholds) == 31)
    assert_expectations()


def test_auc_uniform_errors():
    errors = np.random.default_rng(0).uniform(20.0, 50.0, size=10000)
    _, auc = pck_auc(errors, THRESHOLDS_3D_MM)
    assert auc == pytest.approx(0.5, abs=0.02)


def test_pck_threshold_is_inclusive():
    curve, _ = pck_auc(np.array([20.0, 35.0]), THRESHOLDS_3D_MM)
    expect(curve.values[0] == 0.5)
    expect(curve.values[15] == 1.0)
    assert_expectations()


def test_pck_2d_thresholds():
    curve, auc = pck_auc(np.zeros(10), THRESHOLDS_2D_PX)
    expect(curve.thresholds[0] == 0.0 and curve.thresholds[-1] == 30.0)
    expect(auc == pytest.approx(1.0, abs=1e-12))
    assert_expectations()


def test_pck_bad_input():
    with pytest.raises(ValueError):
        pck_auc(np.array([]))
    with pytest.raises(ValueError):
        pck_auc(np.ones(3), [20.0])
    with pytest.raises(ValueError):
        pck_auc(np.ones(3), [30.0, 20.0])


def test_pck_curve_monotonic():
    with pytest.raises(ValueError):
        PckCurve((1.0, 2.0), (0.5, 0.4))
    assert PckCurve((1.0, 2.0), (0.5, 0.6)).to_rows() == [(1.0, 0.5), (2.0, 0.6)]


def test_classification_report_perfect():
    labels = np.random.default_rng(0).integers(0, 16, size=(8, NUM_JOINTS))
    report = classification_report(labels, labels, 16)
    expect((report.accuracy, report.precision, report.recall) == (1.0, 1.0, 1.0))
    assert_expectations()


def test_classification_report_constant_prediction():
    gt = np.array([0, 1] * 50)
    report = classification_report(np.zeros(100), gt, 2)
    expect(report.accuracy == 0.5)
    expect(report.recall == pytest.approx(0.5))
    expect(report.precision == pytest.approx(0.25))
    assert_expectations()


def test_classification_report_bad_labels():
    with pytest.raises(ValueError):
        classification_report(np.array([0, 5]), np.array([0, 1]), 2)


@pytest.mark.parametrize("name", ["A", "Full"])
def test_evaluate(tiny_model_config, tiny_quantizer, name):
    torch.manual_seed(0)
    model = HandPoseNet(tiny_model_config.with_variant(VARIANTS[name]))
    dataset = SampleDataset(load_samples("synth", tiny_quantizer, count=3))
    result = evaluate(model, DataLoader(dataset, batch_size=2))
    expect(result.samples == 3)
    expect(result.variant == name)
    expect(result.epe_3d_mm > 0 and result.epe_2d_px > 0)
    expect(0.0 <= result.auc_3d <= 1.0)
    if name == "A":
        expect(result.classification_2d is None)
        expect(result.theta is None)
        expect(result.relation_density == {})
    else:
        expect(result.classification_3d is not None)
        expect(result.theta == pytest.approx(0.05))
        expect(set(result.relation_density)
               == {"relation_2d", "relation_3d", "relation_refine"})
        # the refinement head starts as the identity
        expect(result.epe_3d_mm == pytest.approx(result.epe_3d_coarse_mm))
    data = result.to_dict()
    expect(len(data["pck_3d"]) == 31)
    expect(not model.training)
    assert_expectations()
