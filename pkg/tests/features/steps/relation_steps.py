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
import torch
from behave import given, then, when

from hand_pose_gcn.relations import (ann_adjacency, knn_adjacency,
                                     relation_density, relations_function)
from hand_pose_gcn.skeleton import NUM_JOINTS


@given("a random 3D pose with seed {seed:d}")
def random_pose(context, seed):
    pose = np.random.default_rng(seed).normal(size=(1, NUM_JOINTS, 3))
    context.pose = torch.from_numpy(pose).float()


@given("class logits whose argmax labels are 0, 0, 1 and 2 for the remaining "
       "joints")
def class_logits(context):
    labels = [0, 0, 1] + [2] * (NUM_JOINTS - 3)
    context.logits = torch.zeros(1, 3, NUM_JOINTS)
    context.logits[0, labels, range(NUM_JOINTS)] = 1.0


@when("I build the {k:d}-nearest neighbour relation")
def build_knn(context, k):
    context.relation = knn_adjacency(context.pose, k)[0]


@when("I build the adaptive relation with threshold {theta:g}")
def build_ann(context, theta):
    context.relation = ann_adjacency(context.pose, torch.tensor(theta))[0]


@when("I build the class relation")
def build_class_relation(context):
    context.relation = relations_function(context.logits)[0]


@then("the relation is the identity")
def relation_is_identity(context):
    assert torch.equal(context.relation, torch.eye(NUM_JOINTS)), (
        f"Unexpected relation:\n{context.relation}"
    )


@then("the relation density is {density:g}")
def relation_density_is(context, density):
    actual = float(relation_density(context.relation))
    assert abs(actual - density) < 1e-6, (
        f"Incorrect density:\nActual: {actual}\nExpected: {density}"
    )


@then("joints {first:d} and {second:d} are related")
def joints_related(context, first, second):
    assert context.relation[first, second] == 1
    assert context.relation[second, first] == 1


@then("joints {first:d} and {second:d} are not related")
def joints_not_related(context, first, second):
    assert context.relation[first, second] == 0
