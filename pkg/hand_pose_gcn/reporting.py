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

"""Optional ReportPortal reporting of training and evaluation runs."""

import logging
import mimetypes
import os
from functools import wraps
from typing import Dict, List, Optional, Sequence

from prettytable import MARKDOWN, PrettyTable
from reportportal_client import RPLogHandler, create_client
from reportportal_client.helpers import (
    dict_to_payload,
    gen_attributes,
    get_launch_sys_attrs,
    get_package_version,
    timestamp,
)

from hand_pose_gcn.config import ReportingConfig
from hand_pose_gcn.utils import Singleton

logger = logging.getLogger(__name__)


def check_rp_enabled(func):
    """Verify is RP is enabled in config."""

    @wraps(func)
    def wrap(*args, **kwargs):
        if args and isinstance(args[0], RunReporter):
            # noinspection PyProtectedMember
            if not args[0]._rp:
                return

        return func(*args, **kwargs)

    return wrap


def create_rp_service(cfg: ReportingConfig):
    """Create instance of ReportPortalService."""
    if cfg.enabled:
        return create_client(
            client_type=cfg.client_type,
            endpoint=cfg.endpoint,
            project=cfg.project,
            api_key=cfg.api_key,
            mode="DEBUG" if cfg.debug_mode else "DEFAULT",
            log_batch_size=cfg.log_batch_size,
            log_batch_payload_size=cfg.log_batch_payload_size,
            launch_uuid_print=cfg.launch_uuid_print,
            print_output=cfg.launch_uuid_print_output,
            http_timeout=cfg.http_timeout
        )


def markdown_table(field_names: Sequence[str],
                   rows: Sequence[Sequence[object]]) -> str:
    """Render rows as a markdown table (floats with 4 decimals)."""
    pt = PrettyTable(field_names=list(field_names))
    for row in rows:
        pt.add_row([f"{v:.4f}" if isinstance(v, float) else v for v in row])
    pt.set_style(MARKDOWN)
    return pt.get_string()


class RunReporter(metaclass=Singleton):
    """One ReportPortal launch per CLI run, one SUITE item per stage."""

    def __init__(self, cfg: ReportingConfig, rp_service=None):
        """Initialize instance attributes."""
        self._rp = rp_service
        self._cfg = cfg
        self._launch_id = None
        self._item_ids: List[str] = []
        self._handler: Optional[RPLogHandler] = None
        self.agent_name = "hand-pose-gcn"
        self.agent_version = get_package_version(self.agent_name)

    @check_rp_enabled
    def start_launch(self, command: str, **kwargs):
        """Start launch in ReportPortal and forward package log records."""
        self._launch_id = self._rp.start_launch(
            name=self._cfg.launch_name,
            start_time=timestamp(),
            attributes=self._get_launch_attributes(command),
            description=self._cfg.launch_description,
            **kwargs,
        )
        self._handler = RPLogHandler(level=logging.INFO, rp_client=self._rp)
        logging.getLogger("hand_pose_gcn").addHandler(self._handler)

    @check_rp_enabled
    def finish_launch(self, status: Optional[str] = None, **kwargs):
        """Finish launch in ReportPortal."""
        while self._item_ids:
            self.finish_item(status)
        if self._handler is not None:
            logging.getLogger("hand_pose_gcn").removeHandler(self._handler)
            self._handler = None
        self._rp.finish_launch(end_time=timestamp(), status=status, **kwargs)
        self._rp.close()

    @check_rp_enabled
    def start_item(self, name: str, description: Optional[str] = None,
                   attributes: Optional[Dict[str, str]] = None, **kwargs):
        """Start a SUITE item (nested under the current one, if any)."""
        item_id = self._rp.start_test_item(
            name=name,
            start_time=timestamp(),
            item_type="SUITE" if not self._item_ids else "STEP",
            description=description,
            attributes=dict_to_payload(attributes) if attributes else None,
            parent_item_id=self._item_ids[-1] if self._item_ids else None,
            **kwargs,
        )
        self._item_ids.append(item_id)
        return item_id

    @check_rp_enabled
    def finish_item(self, status: Optional[str] = None, **kwargs):
        """Finish the innermost open item."""
        if not self._item_ids:
            return
        item_id = self._item_ids.pop()
        self._rp.finish_test_item(
            item_id=item_id,
            end_time=timestamp(),
            status=status or "PASSED",
            **kwargs,
        )

    @check_rp_enabled
    def log(self, message: str, level: str = "INFO",
            file_to_attach: Optional[str] = None):
        """Send a log line (optionally with a file) to the current item."""
        attachment = None
        if file_to_attach:
            with open(file_to_attach, "rb") as f:
                attachment = {
                    "name": os.path.basename(file_to_attach),
                    "data": f.read(),
                    "mime": mimetypes.guess_type(file_to_attach)[0]
                    or "application/octet-stream",
                }
        self._rp.log(
            time=timestamp(),
            message=message,
            level=level,
            attachment=attachment,
            item_id=self._item_ids[-1] if self._item_ids else None,
        )

    @check_rp_enabled
    def log_table(self, title: str, field_names: Sequence[str],
                  rows: Sequence[Sequence[object]]):
        """Log a markdown table and make it the description of the open item."""
        table = markdown_table(field_names, rows)
        self.log(f"{title}\n{table}")
        if self._item_ids:
            self._rp.update_test_item(item_uuid=self._item_ids[-1],
                                      description=f"{title}\n\n{table}")

    @check_rp_enabled
    def attach_files(self, paths: Sequence[str]):
        for path in paths:
            self.log(f"Output {os.path.basename(path)}", file_to_attach=path)

    def _get_launch_attributes(self, command: str):
        """Return launch attributes in the format supported by the rp."""
        launch_attributes = self._cfg.launch_attributes
        attributes = gen_attributes(
            launch_attributes) if launch_attributes else []
        system_attributes = get_launch_sys_attrs()
        system_attributes["agent"] = f"{self.agent_name}|{self.agent_version}"
        system_attributes["command"] = command
        return attributes + dict_to_payload(system_attributes)
