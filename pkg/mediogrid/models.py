#  models.py
#
#  Copyright 2024 The mediogrid authors
#
#  MIT License
#
#  Permission is hereby granted, free of charge, to any person obtaining a copy
#  of this software and associated documentation files (the "Software"), to deal
#  in the Software without restriction, including without limitation the rights
#  to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
#  copies of the Software, and to permit persons to whom the Software is
#  furnished to do so, subject to the following conditions:
#
#  The above copyright notice and this permission notice shall be included in all
#  copies or substantial portions of the Software.
#
#  THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
#  IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
#  FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
#  AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
#  LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
#  OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
#  SOFTWARE.
#
#

__all__ = ["SUPPORT_PYDANTIC", "MetaConfig", "DefaultModel", "SimulationSummary"]

import typing

from .utils import yaml_dump
from .vars import YAML

try:
    from pydantic import BaseModel, ConfigDict
    SUPPORT_PYDANTIC = True #: True if pydantic is installed, report models are validated

    class DefaultModel(BaseModel):
        """
        Intended for use as a base class for report models.
        Any models that inherit from this class will:
        * be immutable once built
        * reject unknown fields
        """
        model_config = ConfigDict(frozen=True, extra="forbid")

        def to_dict(self) -> dict:
            return self.model_dump(mode="json")

    def report_model(cls):
        return cls
except ImportError:
    from dataclasses import dataclass, asdict
    SUPPORT_PYDANTIC = False #: True if pydantic is installed, report models are validated

    class DefaultModel:
        """
        Intended for use as a base class for report models.
        Any models that inherit from this class will:
        * be immutable once built
        * reject unknown fields
        """

        def to_dict(self) -> dict:
            return asdict(self)

    def report_model(cls):
        return dataclass(frozen=True)(cls)


class MetaConfig(type):
    def __str__(cls) -> YAML:
        return yaml_dump({
                        attr: value for attr, value in cls
                    })

    def __iter__(cls):
        for attr, value in cls.__dict__.items():
            if attr.isupper():
                yield attr, value


@report_model
class SimulationSummary(DefaultModel):
    """what one simulate run did, written next to its logs as summary.yaml"""
    days: int = 0
    seed: int = 0
    granules_generated: int = 0
    granules_ingested: int = 0
    granules_dropped: int = 0
    channel_files_registered: int = 0
    replication_transfers: int = 0
    replicas_skipped: int = 0
    bytes_replicated: int = 0
    bytes_fanned_out: int = 0
    predicted_bytes_per_cluster: typing.Optional[typing.Dict[str, int]] = None
    requests: int = 0
    local_hits: int = 0
    coalesced: int = 0
    fetches: int = 0
    unsatisfiable: int = 0
    bytes_fetched: int = 0
    samples_delivered: int = 0
    samples_lost: int = 0
    decode_errors: int = 0
    events_executed: int = 0
    events_cancelled: int = 0
    events_pending: int = 0
    event_log_sha256: str = ""
    metric_log_sha256: str = ""
    catalog_sha256: str = ""

    def __str__(self) -> YAML:
        return yaml_dump(self.to_dict())
