#  replication.py
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

"""
Granule ingest and static replication.

The acquisition node receives MODIS granules of 36 channel files, registers
every channel in the catalog under the granule's collection, and the
replication daemon pushes each granule with one third-party session per
target cluster to that cluster's designated node.
"""
__all__ = [
        "ChannelFile", "GranuleSpec", "ReplicationPolicy", "IngestSchedule", "StorageLedger",
        "ReplicationDaemon", "size_table", "area_ids", "build_granule", "generate_granules",
        "location_path", "ingest", "replicate", "fan_out", "predicted_daily_traffic",
        ]

import typing
from dataclasses import dataclass, field

from .catalog import PhysicalLocation, ReplicaCatalog
from .config import Config
from .errors import CapacityError, ConfigError
from .monitor import MetricSample, METRICS, JobRecord, JobTree
from .topology import GridTopology
from .transfer import FileSlice, TransferEngine, TransferOptions, TransferReport, TransferSpec
from .utils import logger, substream
from .vars import (
                LFN,
                NODE_ID,
                CLUSTER_ID,
                VO_ID,
                JOB_ID,
                MEGABYTE,
                SECONDS_PER_DAY,
                CHANNEL_COUNT,
                CHANNEL_RESOLUTIONS,
                DEFAULT_CHANNEL_SIZES,
                EventKind,
                Resolution,
                TransferMode,
                )

if typing.TYPE_CHECKING:
    from .simcore import EventLoop


def size_table(size_250m_mb:float=150, size_500m_mb:float=60, size_1km_mb:float=25) -> typing.Dict[Resolution, int]:
    """channel size per resolution class, in bytes"""
    table = {
        Resolution.R250M: int(round(size_250m_mb * MEGABYTE)),
        Resolution.R500M: int(round(size_500m_mb * MEGABYTE)),
        Resolution.R1KM: int(round(size_1km_mb * MEGABYTE)),
        }
    for resolution, size in table.items():
        if size <= 0:
            raise ValueError("channel size for {} must be positive".format(resolution))
    return table


@dataclass(frozen=True)
class ChannelFile:
    index: int
    resolution: Resolution
    size: int #: bytes


@dataclass(frozen=True)
class GranuleSpec:
    area: str
    acquired_at: float #: simulation seconds
    channels: typing.Tuple[ChannelFile, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) != CHANNEL_COUNT:
            raise ValueError("a granule has exactly {} channels, got {}".format(CHANNEL_COUNT, len(self.channels)))
        for position, channel in enumerate(self.channels, start=1):
            if channel.index != position:
                raise ValueError("channel {} found at position {}".format(channel.index, position))
            if channel.resolution is not CHANNEL_RESOLUTIONS[position]:
                raise ValueError("channel {} is a {} channel".format(position, CHANNEL_RESOLUTIONS[position]))
            if channel.size <= 0:
                raise ValueError("channel {} must have a positive size".format(position))

    @property
    def stamp(self) -> str:
        return "{:.3f}".format(self.acquired_at)

    @property
    def id(self) -> str:
        return "{}/{}".format(self.area, self.stamp)

    @property
    def collection(self) -> str:
        return "granule/{}/{}".format(self.area, self.stamp)

    @property
    def directory(self) -> str:
        return "modis/{}/{}".format(self.area, self.stamp)

    def lfn(self, index:int) -> LFN:
        return "{}/ch{:02d}".format(self.directory, index)

    @property
    def lfns(self) -> typing.List[LFN]:
        return [self.lfn(channel.index) for channel in self.channels]

    @property
    def total_size(self) -> int:
        return sum(channel.size for channel in self.channels)


def build_granule(area:str, acquired_at:float, sizes:typing.Optional[typing.Mapping[Resolution, int]]=None) -> GranuleSpec:
    sizes = sizes or DEFAULT_CHANNEL_SIZES
    return GranuleSpec(area, acquired_at, tuple(
                ChannelFile(index, CHANNEL_RESOLUTIONS[index], sizes[CHANNEL_RESOLUTIONS[index]])
                for index in range(1, CHANNEL_COUNT + 1)
                ))


@dataclass(frozen=True)
class ReplicationPolicy:
    acquisition_node: NODE_ID
    targets: typing.Mapping[CLUSTER_ID, NODE_ID] = field(default_factory=dict)
    parallelism: int = 10
    controller: typing.Optional[NODE_ID] = None #: defaults to the acquisition node
    fanout: bool = False
    vo: VO_ID = field(default_factory=lambda: Config.MEDIOGRID_DEFAULT_VO)

    def __post_init__(self):
        assert self.parallelism >= 1, "replication parallelism must be >= 1"

    def validate(self, topology:GridTopology) -> "ReplicationPolicy":
        if not topology.has_node(self.acquisition_node):
            raise ConfigError("acquisition node '{}' is not in the topology".format(self.acquisition_node))
        if self.controller is not None and not topology.has_node(self.controller):
            raise ConfigError("controller node '{}' is not in the topology".format(self.controller))
        for cluster, node in self.targets.items():
            topology.cluster(cluster)
            if node not in topology.nodes_in(cluster):
                raise ConfigError("target node '{}' is not in cluster '{}'".format(node, cluster))
        return self

    @property
    def ordering_node(self) -> NODE_ID:
        return self.controller or self.acquisition_node


def area_ids(count:int) -> typing.List[str]:
    """A01, A02, ...; zero padded so that ids sort in numeric order"""
    assert count >= 0, "area count must not be negative"
    width = max(2, len(str(count)))
    return ["A{:0{}d}".format(index, width) for index in range(1, count + 1)]


@dataclass(frozen=True)
class IngestSchedule:
    areas: typing.Tuple[str, ...]
    granules_per_area_per_day: int = 20
    jitter_seed: typing.Optional[int] = None #: overrides the run seed for arrival jitter

    def __post_init__(self):
        object.__setattr__(self, "areas", tuple(self.areas))
        if self.granules_per_area_per_day < 1:
            raise ValueError("granules per area per day must be >= 1")

    @property
    def interval(self) -> float:
        return SECONDS_PER_DAY / self.granules_per_area_per_day


def generate_granules(schedule:IngestSchedule, days:int, seed:int=0,
                      sizes:typing.Optional[typing.Mapping[Resolution, int]]=None) -> typing.List[GranuleSpec]:
    """
        granule k of an area on day d arrives at d*86400 + (k + 0.5)*interval,
        jittered uniformly within 10% of the interval; the result is ordered by
        arrival time, then area
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    if not schedule.areas:
        raise ValueError("ingest schedule has no areas")
    rng = substream(schedule.jitter_seed if schedule.jitter_seed is not None else seed, "ingest-jitter")
    interval = schedule.interval
    granules = []
    for day in range(days):
        for area in schedule.areas:
            for k in range(schedule.granules_per_area_per_day):
                jitter = rng.uniform(-0.1, 0.1) * interval
                granules.append(build_granule(area, day * SECONDS_PER_DAY + (k + 0.5) * interval + jitter, sizes))
    granules.sort(key=lambda granule: (granule.acquired_at, granule.area))
    return granules


def location_path(lfn:LFN, root:typing.Optional[str]=None) -> str:
    root = Config.MEDIOGRID_STORAGE_ROOT if root is None else root
    return "{}/{}".format(root.rstrip("/"), lfn)


class StorageLedger:
    """bytes held per node, checked against the node's storage capacity"""

    def __init__(self, topology:GridTopology):
        self.topology = topology
        self._used:typing.Dict[str, int] = {}

    def used(self, node:NODE_ID) -> int:
        return self._used.get(node, 0)

    def free(self, node:NODE_ID) -> int:
        return self.topology.node(node).storage_capacity - self.used(node)

    def reserve(self, node:NODE_ID, size:int) -> bool:
        if size > self.free(node):
            return False
        self._used[node] = self.used(node) + size
        return True

    def release(self, node:NODE_ID, size:int) -> None:
        assert size <= self.used(node), "cannot release more than is held"
        self._used[node] = self.used(node) - size


def ingest(granule:GranuleSpec, catalog:ReplicaCatalog, policy:ReplicationPolicy,
           ledger:StorageLedger, storage_root:typing.Optional[str]=None) -> typing.List[LFN]:
    """
        registers the 36 channel files of a granule with one replica on the
        acquisition node; raises CapacityError, registering nothing, when the
        node cannot hold the granule
    """
    node = policy.acquisition_node
    if not ledger.reserve(node, granule.total_size):
        raise CapacityError("acquisition node '{}' cannot hold granule {} ({} bytes free)".format(
                                node, granule.id, ledger.free(node)))
    lfns = []
    for channel in granule.channels:
        lfn = granule.lfn(channel.index)
        catalog.register(lfn, granule.collection, channel.size)
        catalog.add_replica(lfn, PhysicalLocation(node, location_path(lfn, storage_root)))
        lfns.append(lfn)
    return lfns


def _granule_spec(granule:GranuleSpec, policy:ReplicationPolicy, source:NODE_ID, dest:NODE_ID,
                  job:typing.Optional[JOB_ID], storage_root:typing.Optional[str]) -> TransferSpec:
    return TransferSpec(
                source=PhysicalLocation(source, location_path(granule.directory, storage_root)),
                dest_node=dest,
                files=tuple(FileSlice(granule.lfn(channel.index), channel.size) for channel in granule.channels),
                parallelism=policy.parallelism,
                options=TransferOptions(channel_reuse=True, pipelining=True),
                mode=TransferMode.THIRD_PARTY,
                vo=policy.vo,
                job=job,
                controller=policy.ordering_node,
                )


def _holds(catalog:ReplicaCatalog, granule:GranuleSpec, node:NODE_ID) -> bool:
    return all(catalog.has_replica_on(lfn, node) for lfn in granule.lfns)


def _register_copies(catalog:ReplicaCatalog, report:TransferReport, storage_root:typing.Optional[str]) -> None:
    for item in report.spec.files:
        location = PhysicalLocation(report.spec.dest_node, location_path(item.lfn, storage_root))
        # NOTE: a workload fetch may have cached the file there first
        if location not in catalog.record(item.lfn).replicas:
            catalog.add_replica(item.lfn, location)


def replicate(granule:GranuleSpec, policy:ReplicationPolicy, engine:TransferEngine, catalog:ReplicaCatalog,
              ledger:StorageLedger, job:typing.Optional[JOB_ID]=None, storage_root:typing.Optional[str]=None,
              on_complete:typing.Optional[typing.Callable[[TransferReport], None]]=None,
              on_skip:typing.Optional[typing.Callable[[CLUSTER_ID, NODE_ID], None]]=None) -> typing.List[TransferSpec]:
    """
        starts one third-party session per target cluster, in cluster order,
        moving all 36 channels; every channel gets a replica on the target
        node once its session completes. Targets that already hold the granule
        or have no room for it are skipped.
    """
    specs = []
    for cluster in sorted(policy.targets):
        node = policy.targets[cluster]
        if _holds(catalog, granule, node):
            logger.debug("{} already holds {}, no session needed".format(node, granule.id))
            continue
        if not ledger.reserve(node, granule.total_size):
            logger.warning("skipping replica of {} on '{}': {} bytes free".format(granule.id, node, ledger.free(node)))
            if on_skip is not None:
                on_skip(cluster, node)
            continue
        spec = _granule_spec(granule, policy, policy.acquisition_node, node, job, storage_root)

        def done(report:TransferReport) -> None:
            _register_copies(catalog, report, storage_root)
            if on_complete is not None:
                on_complete(report)

        engine.execute(spec, done)
        specs.append(spec)
    return specs


def fan_out(granule:GranuleSpec, policy:ReplicationPolicy, cluster:CLUSTER_ID, engine:TransferEngine,
            catalog:ReplicaCatalog, ledger:StorageLedger, job:typing.Optional[JOB_ID]=None,
            storage_root:typing.Optional[str]=None,
            on_complete:typing.Optional[typing.Callable[[TransferReport], None]]=None,
            on_skip:typing.Optional[typing.Callable[[CLUSTER_ID, NODE_ID], None]]=None) -> typing.List[TransferSpec]:
    """copies a granule from the cluster's designated node to every node of the cluster still without it"""
    designated = policy.targets[cluster]
    specs = []
    for node in sorted(engine.topology.nodes_in(cluster)):
        if node == designated or _holds(catalog, granule, node):
            continue
        if not ledger.reserve(node, granule.total_size):
            logger.warning("skipping fan-out of {} to '{}': {} bytes free".format(granule.id, node, ledger.free(node)))
            if on_skip is not None:
                on_skip(cluster, node)
            continue
        spec = _granule_spec(granule, policy, designated, node, job, storage_root)

        def done(report:TransferReport) -> None:
            _register_copies(catalog, report, storage_root)
            if on_complete is not None:
                on_complete(report)

        engine.execute(spec, done)
        specs.append(spec)
    return specs


def predicted_daily_traffic(schedule:IngestSchedule, policy:ReplicationPolicy,
                            sizes:typing.Optional[typing.Mapping[Resolution, int]]=None) -> typing.Dict[CLUSTER_ID, int]:
    """
        bytes per day each target cluster receives: areas * rate * granule size;
        a cluster whose target is the acquisition node receives nothing
    """
    granule_total = build_granule("A", 0.0, sizes).total_size
    daily = len(schedule.areas) * schedule.granules_per_area_per_day * granule_total
    return {cluster: daily for cluster in sorted(policy.targets)
            if policy.targets[cluster] != policy.acquisition_node}


class ReplicationDaemon:
    """
        Binds ingest and replication to the event loop.

        Registers a root job for the daemon and one child job per granule, so
        a rollup over the root covers all replication traffic.
    """

    def __init__(self, loop:"EventLoop", engine:TransferEngine, catalog:ReplicaCatalog, ledger:StorageLedger,
                 policy:ReplicationPolicy, jobs:JobTree,
                 emit:typing.Optional[typing.Callable[[MetricSample], typing.Any]]=None,
                 sizes:typing.Optional[typing.Mapping[Resolution, int]]=None,
                 storage_root:typing.Optional[str]=None):
        self.loop = loop
        self.engine = engine
        self.catalog = catalog
        self.ledger = ledger
        self.policy = policy.validate(engine.topology)
        self.jobs = jobs
        self.sizes = sizes
        self.storage_root = storage_root
        self._emit = emit
        self.job = "replication"
        jobs.register(JobRecord(self.job, None, policy.vo, policy.acquisition_node))
        self.granules_ingested = 0
        self.granules_dropped = 0
        self.files_registered = 0
        self.transfers = 0
        self.replicas_skipped = 0
        self.bytes_replicated = 0
        self.bytes_fanned_out = 0
        self.bytes_per_cluster:typing.Dict[CLUSTER_ID, int] = {cluster: 0 for cluster in policy.targets}

    def __repr__(self):
        return "<mediogrid.ReplicationDaemon ingested={} dropped={}>".format(self.granules_ingested, self.granules_dropped)

    def schedule(self, granules:typing.Iterable[GranuleSpec]) -> int:
        """queues a granule-arrival event per granule; returns how many were queued"""
        count = 0
        for granule in granules:
            self.loop.schedule_at(granule.acquired_at, EventKind.GRANULE_ARRIVAL,
                                  lambda granule=granule: self.arrive(granule), granule.id)
            count += 1
        return count

    def _sample(self, node:NODE_ID, job:typing.Optional[JOB_ID], name:str) -> None:
        if self._emit is not None:
            self._emit(MetricSample(self.loop.now(), node, self.policy.vo, job, name, 1.0, METRICS[name]))

    def arrive(self, granule:GranuleSpec) -> typing.List[TransferSpec]:
        try:
            ingest(granule, self.catalog, self.policy, self.ledger, self.storage_root)
        except CapacityError as error:
            self.granules_dropped += 1
            logger.warning("dropping granule {}: {}".format(granule.id, error))
            self._sample(self.policy.acquisition_node, None, "dropped_granules")
            return []
        self.granules_ingested += 1
        self.files_registered += len(granule.channels)
        job = "{}/{}".format(self.job, granule.id)
        self.jobs.register(JobRecord(job, self.job, self.policy.vo, self.policy.acquisition_node))

        def skipped(cluster:CLUSTER_ID, node:NODE_ID) -> None:
            self.replicas_skipped += 1
            self._sample(node, job, "skipped_replicas")

        def replicated(report:TransferReport) -> None:
            self.bytes_replicated += report.bytes_moved
            cluster = self.engine.topology.cluster_of(report.spec.dest_node)
            self.bytes_per_cluster[cluster] += report.bytes_moved
            if self.policy.fanout:
                self.transfers += len(fan_out(granule, self.policy, cluster, self.engine, self.catalog, self.ledger,
                                              job, self.storage_root, fanned, skipped))

        def fanned(report:TransferReport) -> None:
            self.bytes_fanned_out += report.bytes_moved

        specs = replicate(granule, self.policy, self.engine, self.catalog, self.ledger,
                          job, self.storage_root, replicated, skipped)
        self.transfers += len(specs)
        return specs
