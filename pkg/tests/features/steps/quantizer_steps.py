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
from behave import given, then, when

from hand_pose_gcn.errors import OutOfRangeError
from hand_pose_gcn.quantizer import create_classes_2d, create_classes_3d
from hand_pose_gcn.skeleton import NUM_JOINTS


@given("a 2D pose with joint 0 at {x:g}, {y:g}")
def pose_2d_with_joint(context, x, y):
    context.pose = np.full((NUM_JOINTS, 2), 10.0)
    context.pose[0] = [x, y]


@given("a 3D pose spanning the cube from 0 to {side:g}")
def pose_3d_cube(context, side):
    context.pose = np.full((NUM_JOINTS, 3), side / 2.0)
    context.pose[0] = 0.0
    context.pose[1] = side


@when("I quantize it into {splits:d} splits of a {size:d} px crop")
def quantize_2d(context, splits, size):
    context.error = None
    try:
        context.labels = create_classes_2d(context.pose, splits, size)
    except OutOfRangeError as exc:
        context.error = exc


@when("I quantize it into {splits:d} splits per axis")
def quantize_3d(context, splits):
    context.labels = create_classes_3d(context.pose, splits)


@then("joint {joint:d} has class {label:d} of {classes:d}")
def joint_has_class(context, joint, label, classes):
    assert context.error is None, f"Quantization failed: {context.error}"
    actual = context.labels.labels[joint]
    assert actual == label, (
        f"Incorrect class:\nActual: {actual}\nExpected: {label}"
    )
    assert context.labels.num_classes == classes


@then("the corner joint has class {label:d} of {classes:d}")
def corner_has_class(context, label, classes):
    joint_has_class(context, 0, label, classes)


@then("the opposite corner joint has class {label:d} of {classes:d}")
def opposite_corner_has_class(context, label, classes):
    joint_has_class(context, 1, label, classes)


@then("quantization fails with an out of range error")
def quantization_fails(context):
    assert isinstance(context.error, OutOfRangeError), (
        f"Expected OutOfRangeError, got {context.error!r}"
    )
