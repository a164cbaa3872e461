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
import torch
from delayed_assert import assert_expectations, expect

from hand_pose_gcn.graph import (DualBranchGraphConvolution, GlobalAdjacency,
                                 GraphConvolution, dual_branch_layer,
                                 gcn_layer, normalize_adjacency,
                                 skeleton_adjacency)
from hand_pose_gcn.skeleton import NUM_JOINTS

EYE = torch.eye(NUM_JOINTS, dtype=torch.float64)


def random_graph(generator, nodes):
    upper = torch.rand(nodes, nodes, generator=generator,
                       dtype=torch.float64).triu(diagonal=1) < 0.3
    adjacency = upper.to(torch.float64)
    return adjacency + adjacency.T


@pytest.mark.parametrize(
    "adjacency,expected",
    [
        (torch.zeros(1, 1, dtype=torch.float64), [[1.0]]),
        (torch.tensor([[0.0, 1.0], [1.0, 0.0]], dtype=torch.float64),
         [[0.5, 0.5], [0.5, 0.5]]),
        (torch.ones(5, 5, dtype=torch.float64) - torch.eye(5, dtype=torch.float64),
         [[0.2] * 5] * 5),
    ],
)
def test_normalize_adjacency_closed_forms(adjacency, expected):
    normalized = normalize_adjacency(adjacency)
    expected = torch.tensor(expected, dtype=torch.float64)
    assert torch.allclose(normalized, expected, atol=1e-12)


def test_normalize_adjacency_spectrum():
    generator = torch.Generator().manual_seed(0)
    for _ in range(200):
        normalized = normalize_adjacency(random_graph(generator, 21))
        eigenvalues = torch.linalg.eigvalsh(normalized)
        assert eigenvalues.min() >= -1 - 1e-9
        assert eigenvalues.max() <= 1 + 1e-9


@pytest.mark.parametrize(
    "adjacency",
    [
        torch.tensor([[0.0, 1.0], [0.0, 0.0]]),
        torch.tensor([[0.0, 0.5], [0.5, 0.0]]),
        torch.zeros(2, 3),
    ],
)
def test_normalize_adjacency_rejects(adjacency):
    with pytest.raises(ValueError):
        normalize_adjacency(adjacency)


def test_skeleton_adjacency():
    adjacency = skeleton_adjacency()
    expect(torch.equal(adjacency, adjacency.T))
    expect(int(adjacency.sum()) == 2 * (NUM_JOINTS - 1))
    expect(int(adjacency[0].sum()) == 5)
    expect(torch.all(torch.diagonal(adjacency) == 0))
    assert_expectations()


def test_gcn_layer_identity():
    features = torch.randn(2, NUM_JOINTS, NUM_JOINTS, dtype=torch.float64)
    expect(torch.equal(gcn_layer(features.abs(), EYE, EYE), features.abs()))
    expect(torch.equal(gcn_layer(features, EYE, EYE), features.clamp(min=0)))
    assert_expectations()


def test_gcn_layer_mean_aggregation():
    features = torch.randn(1, NUM_JOINTS, 4, dtype=torch.float64)
    mean = torch.full((NUM_JOINTS, NUM_JOINTS), 1.0 / NUM_JOINTS,
                      dtype=torch.float64)
    out = gcn_layer(features, mean, torch.eye(4, dtype=torch.float64))
    expected = features.mean(dim=1).clamp(min=0)
    assert torch.allclose(out, expected.expand(1, NUM_JOINTS, 4))


def test_gcn_layer_shape_mismatch():
    with pytest.raises(ValueError):
        gcn_layer(torch.zeros(1, NUM_JOINTS, 4), torch.eye(20), torch.eye(4))
    with pytest.raises(ValueError):
        gcn_layer(torch.zeros(1, NUM_JOINTS, 4), torch.eye(NUM_JOINTS),
                  torch.eye(3))


def test_dual_branch_identity():
    features = torch.rand(2, NUM_JOINTS, NUM_JOINTS, dtype=torch.float64)
    relation = EYE.expand(2, -1, -1)
    out = dual_branch_layer(features, EYE, relation, EYE, EYE)
    assert torch.equal(out, torch.cat([features, features], dim=-1))


def test_dual_branch_dead_relation():
    features = torch.rand(1, NUM_JOINTS, NUM_JOINTS, dtype=torch.float64)
    relation = torch.zeros(1, NUM_JOINTS, NUM_JOINTS, dtype=torch.float64)
    out = dual_branch_layer(features, EYE, relation, EYE, EYE)
    expect(torch.equal(out[..., :NUM_JOINTS], features))
    expect(torch.all(out[..., NUM_JOINTS:] == 0))
    assert_expectations()


def test_dual_branch_without_relation():
    features = torch.rand(1, NUM_JOINTS, NUM_JOINTS, dtype=torch.float64)
    out = dual_branch_layer(features, EYE, None, EYE, None)
    assert out.shape == (1, NUM_JOINTS, NUM_JOINTS)


def test_dual_branch_mismatched_weights():
    features = torch.rand(1, NUM_JOINTS, 4)
    with pytest.raises(ValueError):
        dual_branch_layer(features, torch.eye(NUM_JOINTS),
                          torch.eye(NUM_JOINTS)[None], torch.zeros(4, 3),
                          torch.zeros(4, 5))


def test_dual_branch_gradcheck():
    generator = torch.Generator().manual_seed(1)
    features = torch.randn(2, NUM_JOINTS, 3, dtype=torch.float64,
                           generator=generator, requires_grad=True)
    adjacency = normalize_adjacency(skeleton_adjacency(torch.float64))
    adjacency = (adjacency + 0.1 * torch.randn(
        NUM_JOINTS, NUM_JOINTS, dtype=torch.float64, generator=generator)
    ).requires_grad_()
    relation = (torch.rand(2, NUM_JOINTS, NUM_JOINTS, generator=generator,
                           dtype=torch.float64) < 0.3).to(torch.float64)
    weight_global = torch.randn(3, 4, dtype=torch.float64, generator=generator,
                                requires_grad=True)
    weight_relation = torch.randn(3, 4, dtype=torch.float64,
                                  generator=generator, requires_grad=True)
    assert torch.autograd.gradcheck(
        lambda h, a, wg, wr: dual_branch_layer(h, a, relation, wg, wr,
                                               activate=False),
        (features, adjacency, weight_global, weight_relation),
    )


def test_graph_convolution_gradcheck():
    layer = GraphConvolution(3, 4, activate=False).double()
    features = torch.randn(2, NUM_JOINTS, 3, dtype=torch.float64,
                           requires_grad=True)
    adjacency = torch.rand(NUM_JOINTS, NUM_JOINTS, dtype=torch.float64,
                           requires_grad=True)
    assert torch.autograd.gradcheck(layer, (features, adjacency))


def test_dual_branch_module():
    layer = DualBranchGraphConvolution(3, 4)
    features = torch.randn(2, NUM_JOINTS, 3)
    relation = torch.ones(2, NUM_JOINTS, NUM_JOINTS)
    out = layer(features, torch.eye(NUM_JOINTS), relation)
    expect(layer.output_width == 8)
    expect(out.shape == (2, NUM_JOINTS, 8))
    expect(torch.all(out >= 0))
    layer.zero_parameters()
    expect(torch.all(layer(features, torch.eye(NUM_JOINTS), relation) == 0))
    assert_expectations()
    with pytest.raises(ValueError):
        layer(features, torch.eye(NUM_JOINTS))


def test_dual_branch_module_without_relation():
    layer = DualBranchGraphConvolution(3, 4, use_relation=False)
    expect(layer.weight_relation is None)
    expect(layer.output_width == 4)
    expect(layer(torch.randn(1, NUM_JOINTS, 3),
                 torch.eye(NUM_JOINTS)).shape == (1, NUM_JOINTS, 4))
    assert_expectations()


def test_global_adjacency():
    torch.manual_seed(0)
    learned = GlobalAdjacency(learned=True, noise=0.01)
    skeleton = GlobalAdjacency(learned=False)
    expect(learned.weight.requires_grad)
    expect(torch.allclose(learned(), torch.eye(NUM_JOINTS), atol=0.1))
    expect(not torch.equal(learned(), torch.eye(NUM_JOINTS)))
    expect(len(list(skeleton.parameters())) == 0)
    expect(torch.allclose(skeleton(),
                          normalize_adjacency(skeleton_adjacency())))
    assert_expectations()
