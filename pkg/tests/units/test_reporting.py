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

import logging
import os
from unittest import mock

# noinspection PyPackageRequirements
import pytest
from delayed_assert import assert_expectations, expect
from prettytable import MARKDOWN, PrettyTable
from reportportal_client import (BatchedRPClient, RPClient, RPLogHandler,
                                 ThreadedRPClient)
from reportportal_client.logs import MAX_LOG_BATCH_PAYLOAD_SIZE

from hand_pose_gcn.config import ReportingConfig
from hand_pose_gcn.reporting import (RunReporter, create_rp_service,
                                     markdown_table)


@pytest.fixture()
def config():
    return ReportingConfig(
        endpoint="endpoint",
        api_key="api_key",
        project="project",
        launch_name="launch_name",
        launch_description="launch_description",
    )


@pytest.fixture()
def mock_rps():
    rps = mock.create_autospec(RPClient)
    rps.start_test_item.side_effect = ["suite", "step"]
    return rps


def package_handlers():
    return [h for h in logging.getLogger("hand_pose_gcn").handlers
            if isinstance(h, RPLogHandler)]


def test_create_rp_service_disabled_rp():
    assert create_rp_service(ReportingConfig()) is None


def test_create_rp_service_enabled_rp(config):
    assert isinstance(create_rp_service(config), RPClient)


@mock.patch("hand_pose_gcn.reporting.create_client")
def test_create_rp_service_init(mock_create):
    create_rp_service(ReportingConfig(endpoint="A", api_key="B", project="C"))
    mock_create.assert_called_once_with(
        client_type=mock.ANY,
        endpoint="A",
        project="C",
        api_key="B",
        mode="DEFAULT",
        log_batch_size=20,
        log_batch_payload_size=MAX_LOG_BATCH_PAYLOAD_SIZE,
        launch_uuid_print=False,
        print_output=None,
        http_timeout=None,
    )


@pytest.mark.parametrize(
    "client_type,client_class",
    [("SYNC", RPClient), ("ASYNC_BATCHED", BatchedRPClient),
     ("ASYNC_THREAD", ThreadedRPClient), (None, RPClient)],
)
def test_create_rp_service_init_type(client_type, client_class):
    client = create_rp_service(ReportingConfig(
        endpoint="A", api_key="B", project="C", client_type=client_type))
    assert isinstance(client, client_class)


def test_disabled_reporter_is_silent():
    reporter = RunReporter(ReportingConfig())
    expect(reporter.start_launch("train") is None)
    expect(reporter.start_item("coarse") is None)
    expect(reporter.log("message") is None)
    expect(package_handlers() == [])
    assert_expectations()


def test_reporter_is_singleton(config, mock_rps):
    assert RunReporter(config, mock_rps) is RunReporter(ReportingConfig())


@mock.patch("hand_pose_gcn.reporting.timestamp")
def test_start_launch(mock_timestamp, config, mock_rps):
    mock_timestamp.return_value = 123
    reporter = RunReporter(config, mock_rps)
    reporter.start_launch("train", some_key="some_value")
    try:
        mock_rps.start_launch.assert_called_once_with(
            name="launch_name",
            start_time=123,
            attributes=reporter._get_launch_attributes("train"),
            description="launch_description",
            some_key="some_value",
        )
        assert len(package_handlers()) == 1
    finally:
        reporter.finish_launch()
    assert package_handlers() == []


def test_launch_attributes(config, mock_rps):
    config.launch_attributes = ["one", "key:value"]
    reporter = RunReporter(config, mock_rps)
    attributes = reporter._get_launch_attributes("eval")
    visible = [(a.get("key"), a.get("value")) for a in attributes
               if not a.get("system", False)]
    system = {a.get("key"): a.get("value") for a in attributes
              if a.get("system", False)}
    expect(sorted(visible, key=str) == sorted([(None, "one"), ("key", "value")],
                                              key=str))
    expect(system["command"] == "eval")
    expect(system["agent"].startswith("hand-pose-gcn|"))
    assert_expectations()


@mock.patch("hand_pose_gcn.reporting.timestamp")
def test_items_nest(mock_timestamp, config, mock_rps):
    mock_timestamp.return_value = 123
    reporter = RunReporter(config, mock_rps)
    reporter.start_item("Full refinement", attributes={"stage": "refinement"})
    reporter.start_item("inner")
    first, second = mock_rps.start_test_item.call_args_list
    expect(first[1]["item_type"] == "SUITE")
    expect(first[1]["parent_item_id"] is None)
    expect(first[1]["attributes"][0]["key"] == "stage")
    expect(first[1]["attributes"][0]["value"] == "refinement")
    expect(second[1]["item_type"] == "STEP")
    expect(second[1]["parent_item_id"] == "suite")
    reporter.finish_item()
    mock_rps.finish_test_item.assert_called_once_with(
        item_id="step", end_time=123, status="PASSED")
    assert_expectations()


@mock.patch("hand_pose_gcn.reporting.timestamp")
def test_finish_launch_closes_items(mock_timestamp, config, mock_rps):
    mock_timestamp.return_value = 123
    reporter = RunReporter(config, mock_rps)
    reporter.start_item("coarse")
    reporter.finish_launch("FAILED")
    mock_rps.finish_test_item.assert_called_once_with(
        item_id="suite", end_time=123, status="FAILED")
    mock_rps.finish_launch.assert_called_once_with(end_time=123,
                                                   status="FAILED")
    mock_rps.close.assert_called_once()


@mock.patch("hand_pose_gcn.reporting.timestamp")
def test_log_with_attachment(mock_timestamp, tmp_path, config, mock_rps):
    mock_timestamp.return_value = 123
    path = os.path.join(tmp_path, "loss.csv")
    with open(path, "w") as handle:
        handle.write("step,total\n1,2.0\n")
    reporter = RunReporter(config, mock_rps)
    reporter.start_item("coarse")
    reporter.attach_files([path])
    mock_rps.log.assert_called_once_with(
        time=123,
        message="Output loss.csv",
        level="INFO",
        attachment={"name": "loss.csv", "data": b"step,total\n1,2.0\n",
                    "mime": "text/csv"},
        item_id="suite",
    )


def test_log_table(config, mock_rps):
    reporter = RunReporter(config, mock_rps)
    reporter.log_table("Evaluation", ["metric", "value"], [["EPE", 1.5]])
    message = mock_rps.log.call_args[1]["message"]
    expect(message.startswith("Evaluation\n"))
    expect("1.5000" in message)
    assert_expectations()
    mock_rps.update_test_item.assert_not_called()


def test_log_table_describes_open_item(config, mock_rps):
    reporter = RunReporter(config, mock_rps)
    reporter.start_item("ablation")
    reporter.log_table("Ablation", ["variant", "epe"], [["Full", 0.25]])
    kwargs = mock_rps.update_test_item.call_args[1]
    expect(kwargs["item_uuid"] == "suite")
    expect(kwargs["description"].startswith("Ablation\n\n"))
    expect("| Full" in kwargs["description"])
    assert_expectations()


def test_markdown_table():
    pt = PrettyTable(field_names=["variant", "epe"])
    pt.add_row(["Full", "0.1235"])
    pt.set_style(MARKDOWN)
    assert markdown_table(["variant", "epe"], [["Full", 0.123456]]) == \
        pt.get_string()
