#  __init__.py
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

__all__ = [
        "GridTopology", "NetworkLink", "load_topology", "dump_topology", "resolve_link", "aggregate_throughput",
        "ReplicaCatalog", "PhysicalLocation",
        "TransferSpec", "FileSlice", "TransferOptions", "TransferEngine", "estimate_time",
        "GranuleSpec", "ReplicationPolicy", "IngestSchedule", "generate_granules", "predicted_daily_traffic",
        "BandwidthPredictor", "DataRequest", "DataScheduler", "select_source", "schedule",
        "MetricSample", "MetricRepository", "Collector", "MonitoringPlane", "AccountingQuery", "accounting",
        "EventLoop", "SimConfig", "load_sim_config", "run",
        "SUPPORT_PYDANTIC",
        "quick_load_simulation",
        "get_config"
        ]

from ._version import (
            __version_info__,
            __version__,
            )

from . import (
            models,
            vars,
            config,
            topology,
            catalog,
            transfer,
            replication,
            sched,
            monitor,
            simcore,
            extra,
            )
from .extra import convenience as convenience

quick_load_simulation = convenience.quick_load_simulation

GridTopology = topology.GridTopology
NetworkLink = topology.NetworkLink
load_topology = topology.load_topology
dump_topology = topology.dump_topology
resolve_link = topology.resolve_link
aggregate_throughput = topology.aggregate_throughput

ReplicaCatalog = catalog.ReplicaCatalog
PhysicalLocation = catalog.PhysicalLocation

TransferSpec = transfer.TransferSpec
FileSlice = transfer.FileSlice
TransferOptions = transfer.TransferOptions
TransferEngine = transfer.TransferEngine
estimate_time = transfer.estimate_time

GranuleSpec = replication.GranuleSpec
ReplicationPolicy = replication.ReplicationPolicy
IngestSchedule = replication.IngestSchedule
generate_granules = replication.generate_granules
predicted_daily_traffic = replication.predicted_daily_traffic

BandwidthPredictor = sched.BandwidthPredictor
DataRequest = sched.DataRequest
DataScheduler = sched.DataScheduler
select_source = sched.select_source
schedule = sched.schedule

MetricSample = monitor.MetricSample
MetricRepository = monitor.MetricRepository
Collector = monitor.Collector
MonitoringPlane = monitor.MonitoringPlane
AccountingQuery = monitor.AccountingQuery
accounting = monitor.accounting

EventLoop = simcore.EventLoop
SimConfig = simcore.SimConfig
load_sim_config = simcore.load_sim_config
run = simcore.run

SUPPORT_PYDANTIC = models.SUPPORT_PYDANTIC

config = config.Config

def get_config() -> config:
    """returns the Config class to set mediogrid settings"""
    return config
