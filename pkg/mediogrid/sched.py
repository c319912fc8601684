#  sched.py
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
Greedy data scheduling.

A request is served, in order of preference, from a replica already on the
destination node, by riding on a fetch of the same file to the same node that
is already in flight, or by fetching from the replica with the smallest
predicted completion time. Link bandwidth is predicted with an EWMA of
achieved throughput, falling back to the network model for links never
observed.
"""
__all__ = [
        "BandwidthPredictor", "observe", "predict", "DataRequest", "SchedulePlan",
        "fetch_time", "select_source", "schedule", "DataScheduler", "WorkloadSpec", "WorkloadGenerator",
        ]

import typing
from dataclasses import dataclass, field, replace

from .catalog import PhysicalLocation, ReplicaCatalog
from .config import Config
from .errors import UnknownEntryError, UnsatisfiableRequestError
from .monitor import JobRecord, JobTree
from .replication import location_path
from .topology import GridTopology, NetworkLink, aggregate_throughput, resolve_link
from .transfer import FileSlice, TransferEngine, TransferOptions, TransferReport, TransferSpec, setup_delays
from .utils import logger, substream
from .vars import (
                LFN,
                NODE_ID,
                VO_ID,
                JOB_ID,
                SECONDS_PER_DAY,
                Decision,
                EventKind,
                Role,
                SelectionPolicy,
                TransferMode,
                megabits,
                )

if typing.TYPE_CHECKING:
    from .simcore import EventLoop


class BandwidthPredictor:
    """EWMA of achieved megabits/second, one per link name"""

    def __init__(self, topology:GridTopology, alpha:float=0.25, p_default:int=10):
        if not 0 < alpha <= 1:
            raise ValueError("smoothing alpha must lie in (0, 1]")
        if p_default < 1:
            raise ValueError("default parallelism must be >= 1")
        self.topology = topology
        self.alpha = alpha
        self.p_default = p_default
        self._ewma:typing.Dict[str, float] = {}
        self._count:typing.Dict[str, int] = {}

    def __repr__(self):
        return "<mediogrid.BandwidthPredictor links={}>".format(len(self._ewma))

    def observations(self, link:NetworkLink) -> int:
        return self._count.get(link.name, 0)

    def observe(self, link:NetworkLink, throughput:float) -> float:
        if not throughput > 0:
            raise ValueError("observed throughput must be positive, got {}".format(throughput))
        if link.name in self._ewma:
            self._ewma[link.name] = self.alpha * throughput + (1 - self.alpha) * self._ewma[link.name]
        else:
            self._ewma[link.name] = float(throughput)
        self._count[link.name] = self._count.get(link.name, 0) + 1
        return self._ewma[link.name]

    def predict(self, link:NetworkLink) -> float:
        if link.name in self._ewma:
            return self._ewma[link.name]
        return aggregate_throughput(link, self.p_default)


def observe(predictor:BandwidthPredictor, link:NetworkLink, throughput:float) -> float:
    return predictor.observe(link, throughput)


def predict(predictor:BandwidthPredictor, link:NetworkLink) -> float:
    return predictor.predict(link)


@dataclass(frozen=True)
class DataRequest:
    id: str
    lfn: LFN
    dest_node: NODE_ID
    vo: VO_ID = field(default_factory=lambda: Config.MEDIOGRID_DEFAULT_VO)
    job: typing.Optional[JOB_ID] = None
    issued_at: float = 0.0


@dataclass(frozen=True)
class SchedulePlan:
    request: DataRequest
    decision: Decision
    source: typing.Optional[PhysicalLocation] = None
    parallelism: typing.Optional[int] = None
    predicted_seconds: float = 0.0
    transfer_id: typing.Optional[str] = None #: fetch carrying the data, once started
    leader: typing.Optional[str] = None #: request whose fetch a coalesced plan rides on


def fetch_time(size:int, link:NetworkLink, predictor:BandwidthPredictor, parallelism:int,
               options:TransferOptions=TransferOptions()) -> float:
    """predicted seconds for a single-file session over link"""
    setup = (link.handshake_rounds + link.per_file_rounds) * link.rtt
    if not options.pipelining:
        setup += link.command_round * link.rtt
    return setup + megabits(size) / predictor.predict(link)


def _cluster_load(in_flight:typing.Mapping[tuple, str], topology:GridTopology, cluster:str) -> int:
    return sum(1 for (_, dest) in in_flight if topology.cluster_of(dest) == cluster)


def select_source(request:DataRequest, catalog:ReplicaCatalog, predictor:BandwidthPredictor,
                  topology:GridTopology, in_flight:typing.Optional[typing.Mapping[tuple, str]]=None,
                  parallelism:typing.Optional[int]=None, options:TransferOptions=TransferOptions(),
                  policy:SelectionPolicy=SelectionPolicy.GREEDY,
                  io_limit:typing.Optional[int]=None) -> SchedulePlan:
    """
        plans one request; in_flight maps (lfn, dest_node) to the fetch already
        bringing that file there. Raises UnsatisfiableRequestError when there
        is neither a replica nor such a fetch.
    """
    in_flight = in_flight or {}
    parallelism = parallelism or predictor.p_default
    topology.node(request.dest_node)
    try:
        record = catalog.record(request.lfn)
    except UnknownEntryError:
        record = None

    if record is not None and any(location.node == request.dest_node for location in record.replicas):
        return SchedulePlan(request, Decision.LOCAL_HIT)
    key = (request.lfn, request.dest_node)
    if key in in_flight:
        return SchedulePlan(request, Decision.COALESCED, transfer_id=in_flight[key])
    if record is None or not record.replicas:
        raise UnsatisfiableRequestError("no replica of '{}' for request '{}'".format(request.lfn, request.id))

    candidates = record.locations
    if SelectionPolicy(policy) is SelectionPolicy.CLUSTER_LOCAL:
        cluster = topology.cluster_of(request.dest_node)
        local = [location for location in candidates if topology.cluster_of(location.node) == cluster]
        if local and (io_limit is None or _cluster_load(in_flight, topology, cluster) < io_limit):
            candidates = local

    ranked = sorted(
        (fetch_time(record.size, resolve_link(topology, location.node, request.dest_node), predictor, parallelism, options),
         location.node, location.path, location)
        for location in candidates
        )
    seconds, _, _, source = ranked[0]
    return SchedulePlan(request, Decision.FETCH, source, parallelism, seconds)


def schedule(batch:typing.Iterable[DataRequest], catalog:ReplicaCatalog, predictor:BandwidthPredictor,
             topology:GridTopology, in_flight:typing.Optional[typing.Mapping[tuple, str]]=None,
             parallelism:typing.Optional[int]=None, options:TransferOptions=TransferOptions(),
             policy:SelectionPolicy=SelectionPolicy.GREEDY,
             io_limit:typing.Optional[int]=None) -> typing.List[SchedulePlan]:
    """
        plans a batch first come first served (issued_at, then request id);
        a later request for a file already being fetched to the same node
        coalesces with that fetch. Plans come back in the order the requests
        were served, one per request.
    """
    pending = dict(in_flight or {})
    leaders:typing.Dict[tuple, str] = {}
    plans = []
    for request in sorted(batch, key=lambda request: (request.issued_at, request.id)):
        try:
            plan = select_source(request, catalog, predictor, topology, pending, parallelism, options, policy, io_limit)
        except UnsatisfiableRequestError as error:
            logger.warning(str(error))
            plan = SchedulePlan(request, Decision.UNSATISFIABLE)
        key = (request.lfn, request.dest_node)
        if plan.decision is Decision.FETCH:
            pending[key] = None
            leaders[key] = request.id
        elif plan.decision is Decision.COALESCED and key in leaders:
            plan = replace(plan, leader=leaders[key])
        plans.append(plan)
    return plans


class DataScheduler:
    """
        Starts the fetches a schedule decides on and keeps the in-flight map
        used for coalescing. When a fetch completes the file is cached on the
        destination node, the achieved data rate is fed to the predictor and
        every request waiting on it is released.
    """

    def __init__(self, engine:TransferEngine, catalog:ReplicaCatalog, predictor:BandwidthPredictor,
                 parallelism:typing.Optional[int]=None, options:TransferOptions=TransferOptions(),
                 policy:SelectionPolicy=SelectionPolicy.GREEDY, io_limit:typing.Optional[int]=None,
                 storage_root:typing.Optional[str]=None):
        self.engine = engine
        self.catalog = catalog
        self.predictor = predictor
        self.parallelism = parallelism or predictor.p_default
        self.options = options
        self.policy = SelectionPolicy(policy)
        self.io_limit = io_limit
        self.storage_root = storage_root
        self.in_flight:typing.Dict[tuple, str] = {}
        self._waiters:typing.Dict[str, typing.List[tuple]] = {}
        self.local_hits = 0
        self.coalesced = 0
        self.fetches = 0
        self.unsatisfiable = 0
        self.bytes_fetched = 0

    def __repr__(self):
        return "<mediogrid.DataScheduler in_flight={}>".format(len(self.in_flight))

    @property
    def topology(self) -> GridTopology:
        return self.engine.topology

    @property
    def requests(self) -> int:
        return self.local_hits + self.coalesced + self.fetches + self.unsatisfiable

    def submit(self, batch:typing.Iterable[DataRequest],
               on_ready:typing.Optional[typing.Callable[[DataRequest], None]]=None) -> typing.List[SchedulePlan]:
        """
            schedules and starts a batch; on_ready fires for each request once its
            file is on the destination node (immediately for a local hit)
        """
        plans = schedule(batch, self.catalog, self.predictor, self.topology, self.in_flight,
                         self.parallelism, self.options, self.policy, self.io_limit)
        started:typing.Dict[str, str] = {}
        result = []
        for plan in plans:
            request = plan.request
            if plan.decision is Decision.LOCAL_HIT:
                self.local_hits += 1
                if on_ready is not None:
                    on_ready(request)
            elif plan.decision is Decision.UNSATISFIABLE:
                self.unsatisfiable += 1
            elif plan.decision is Decision.FETCH:
                self.fetches += 1
                plan = replace(plan, transfer_id=self._fetch(plan))
                started[request.id] = plan.transfer_id
                self._waiters[plan.transfer_id].append((request, on_ready))
            else:
                self.coalesced += 1
                if plan.leader is not None:
                    plan = replace(plan, transfer_id=started[plan.leader])
                self._waiters[plan.transfer_id].append((request, on_ready))
            result.append(plan)
        return result

    def _fetch(self, plan:SchedulePlan) -> str:
        request = plan.request
        size = self.catalog.record(request.lfn).size
        spec = TransferSpec(
                    source=plan.source,
                    dest_node=request.dest_node,
                    files=(FileSlice(request.lfn, size),),
                    parallelism=plan.parallelism,
                    options=self.options,
                    mode=TransferMode.TWO_PARTY,
                    vo=request.vo,
                    job=request.job,
                    )
        transfer = self.engine.execute(spec, self._fetched)
        self.in_flight[(request.lfn, request.dest_node)] = transfer.id
        self._waiters[transfer.id] = []
        return transfer.id

    def _fetched(self, report:TransferReport) -> None:
        item = report.spec.files[0]
        self.bytes_fetched += report.bytes_moved
        link = resolve_link(self.topology, report.spec.source.node, report.spec.dest_node)
        streaming = report.duration - sum(setup_delays(report.spec, link))
        if streaming > 0:
            self.predictor.observe(link, megabits(report.bytes_moved) / streaming)
        location = PhysicalLocation(report.spec.dest_node, location_path(item.lfn, self.storage_root))
        if location not in self.catalog.record(item.lfn).replicas:
            self.catalog.add_replica(item.lfn, location)
        self.complete(item.lfn, report.spec.dest_node)

    def complete(self, lfn:LFN, dest_node:NODE_ID) -> None:
        """releases the coalescing entry of a finished fetch and its waiting requests"""
        transfer_id = self.in_flight.pop((lfn, dest_node), None)
        for request, on_ready in self._waiters.pop(transfer_id, []):
            if on_ready is not None:
                on_ready(request)


@dataclass(frozen=True)
class WorkloadSpec:
    requests_per_day: int = 0
    vos: typing.Tuple[VO_ID, ...] = ()
    chain: int = 0 #: pipe stages forked after each root request
    intermediate_ratio: float = 0.5 #: stage output size relative to its input

    def __post_init__(self):
        object.__setattr__(self, "vos", tuple(self.vos))
        if self.requests_per_day < 0 or self.chain < 0:
            raise ValueError("workload counts must not be negative")
        if not self.intermediate_ratio > 0:
            raise ValueError("intermediate ratio must be positive")


class WorkloadGenerator:
    """
        Synthetic application requests against the files ingested so far.

        Each root request is a job on a compute node. With chain > 0, once the
        input is local, the job writes an intermediate file on its node and
        forks a child job on another compute node that reads it, stage after
        stage.
    """

    def __init__(self, loop:"EventLoop", scheduler:DataScheduler, jobs:JobTree, spec:WorkloadSpec,
                 seed:int=0, storage_root:typing.Optional[str]=None):
        self.loop = loop
        self.scheduler = scheduler
        self.jobs = jobs
        self.spec = spec
        self.storage_root = storage_root
        self.rng = substream(seed, "workload")
        self.vos = spec.vos or (Config.MEDIOGRID_DEFAULT_VO,)
        topology = scheduler.topology
        self.nodes = [name for name in topology.node_names if topology.node(name).role is Role.COMPUTE] \
                     or [name for name in topology.node_names if topology.node(name).role is not Role.ACQUISITION] \
                     or topology.node_names
        self._ids = 0
        self.skipped = 0

    def _next_id(self, prefix:str) -> str:
        self._ids += 1
        return "{}{:06d}".format(prefix, self._ids)

    def schedule(self, days:int, horizon:float) -> int:
        """queues request-arrival events, uniformly spread over each day and kept before the horizon"""
        times = []
        for day in range(days):
            times.extend(day * SECONDS_PER_DAY + self.rng.uniform(0, SECONDS_PER_DAY)
                         for _ in range(self.spec.requests_per_day))
        times = sorted(t for t in times if t < horizon)
        for t in times:
            self.loop.schedule_at(t, EventKind.REQUEST_ARRIVAL, self.arrive, "root")
        return len(times)

    def arrive(self) -> None:
        lfns = [record.lfn for record in self.scheduler.catalog if ".stage" not in record.lfn]
        if not lfns:
            self.skipped += 1
            logger.debug("no files ingested yet, skipping request")
            return
        lfn = self.rng.choice(lfns)
        node = self.rng.choice(self.nodes)
        vo = self.rng.choice(self.vos)
        job = self._next_id("job")
        self.jobs.register(JobRecord(job, None, vo, node))
        request = DataRequest(self._next_id("req"), lfn, node, vo, job, self.loop.now())
        self.scheduler.submit([request], lambda request: self._stage(request, lfn, job, 1))

    def _stage(self, request:DataRequest, base:LFN, root:JOB_ID, stage:int) -> None:
        if stage > self.spec.chain:
            return
        catalog = self.scheduler.catalog
        size = max(1, int(catalog.record(request.lfn).size * self.spec.intermediate_ratio))
        lfn = "{}.{}.stage{}".format(base, root, stage)
        catalog.register(lfn, "intermediate/{}".format(root), size)
        catalog.add_replica(lfn, PhysicalLocation(request.dest_node, location_path(lfn, self.storage_root)))
        others = [node for node in self.nodes if node != request.dest_node] or self.nodes
        node = self.rng.choice(others)
        job = "{}.{}".format(root, stage)
        self.jobs.register(JobRecord(job, request.job, request.vo, node))
        child = DataRequest(self._next_id("req"), lfn, node, request.vo, job, self.loop.now())
        self.scheduler.submit([child], lambda child: self._stage(child, base, root, stage + 1))
