#  simcore.py
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
Deterministic discrete-event core.

Events are ordered by (time, insertion sequence), all randomness comes from
labeled substreams of one run seed, and every executed event is written to
a ``time,seq,kind,detail`` CSV log, so a run is a pure function of its
SimConfig.
"""
__all__ = [
        "Event", "RunStats", "EventLoop", "MetricTicker", "SimConfig", "RunResult",
        "load_sim_config", "run", "EVENT_LOG_HEADER", "DRAIN_KINDS",
        ]

import csv
import heapq
import io
import itertools
import math
import typing
from dataclasses import dataclass, field

from .catalog import ReplicaCatalog
from .config import Config, ConfigDocument, parse_document
from .errors import ConfigError, SchedulingError, TopologyError
from .models import SimulationSummary
from .monitor import JobTree, MetricRepository, MonitoringPlane, node_stats_sample
from .replication import (
                IngestSchedule,
                ReplicationDaemon,
                ReplicationPolicy,
                StorageLedger,
                area_ids,
                generate_granules,
                predicted_daily_traffic,
                size_table,
                )
from .sched import BandwidthPredictor, DataScheduler, WorkloadGenerator, WorkloadSpec
from .topology import GridTopology, load_topology
from .transfer import TransferEngine, TransferOptions, TransferReport
from .utils import fmt_time, logger, sha256_text
from .vars import QUANTUM, SECONDS_PER_DAY, EventKind, Resolution, SelectionPolicy

EVENT_LOG_HEADER = ("time", "seq", "kind", "detail")

# INFO: kinds that keep running past the horizon in drain mode
DRAIN_KINDS = frozenset((EventKind.TRANSFER_PROGRESS, EventKind.RESHARE, EventKind.TRANSFER_COMPLETE))


class Event:
    __slots__ = ("time", "seq", "kind", "detail", "handler", "cancelled")

    def __init__(self, time:float, seq:int, kind:EventKind, detail:str, handler:typing.Callable[[], typing.Any]):
        self.time = time
        self.seq = seq
        self.kind = EventKind(kind)
        self.detail = detail
        self.handler = handler
        self.cancelled = False

    def __lt__(self, other:"Event") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)

    def __repr__(self):
        return "<mediogrid.Event {} {} @{}>".format(self.seq, self.kind, fmt_time(self.time))


class RunStats(typing.NamedTuple):
    executed: int
    cancelled: int
    pending: int


class EventLoop:
    """
        Virtual clock plus event queue.

        Events up to the horizon run in (time, seq) order. Past the horizon,
        in drain mode, transfer events keep running until every session has
        completed; anything else stays queued and is reported as pending.
    """

    def __init__(self, horizon:float=math.inf, drain:bool=True):
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        self.horizon = horizon
        self.drain = drain
        self._now = 0.0
        self._queue:typing.List[Event] = []
        self._seq = itertools.count()
        self._deferred:typing.List[Event] = []
        self.executed = 0
        self.cancelled = 0
        self._log = io.StringIO()
        self._writer = csv.writer(self._log, lineterminator="\n")
        self._writer.writerow(EVENT_LOG_HEADER)

    def __repr__(self):
        return "<mediogrid.EventLoop now={} queued={}>".format(fmt_time(self._now), len(self._queue))

    def now(self) -> float:
        return self._now

    def schedule_at(self, time:float, kind:EventKind, handler:typing.Callable[[], typing.Any], detail:str="") -> Event:
        """
            enqueues an event; a time within one quantum before now is taken as
            now, anything earlier raises SchedulingError
        """
        if not time >= self._now - QUANTUM:
            raise SchedulingError("event {} at {} is before the current time {}".format(
                                    kind, fmt_time(time), fmt_time(self._now)))
        event = Event(max(time, self._now), next(self._seq), kind, detail, handler)
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay:float, kind:EventKind, handler:typing.Callable[[], typing.Any], detail:str="") -> Event:
        return self.schedule_at(self._now + delay, kind, handler, detail)

    def cancel(self, event:Event) -> None:
        """a cancelled event is never executed nor logged"""
        if not event.cancelled:
            event.cancelled = True
            self.cancelled += 1

    @property
    def pending(self) -> int:
        return sum(1 for event in self._queue if not event.cancelled) + len(self._deferred)

    def step(self) -> bool:
        """runs the next runnable event; False once there is none"""
        while self._queue:
            event = heapq.heappop(self._queue)
            if event.cancelled:
                continue
            if event.time > self.horizon + QUANTUM and (not self.drain or event.kind not in DRAIN_KINDS):
                self._deferred.append(event)
                continue
            self._now = event.time
            self._writer.writerow((fmt_time(event.time), event.seq, event.kind.value, event.detail))
            self.executed += 1
            event.handler()
            return True
        return False

    def run(self) -> RunStats:
        while self.step():
            pass
        logger.debug("event loop stopped at {}: {} executed, {} cancelled, {} pending".format(
                        fmt_time(self._now), self.executed, self.cancelled, self.pending))
        return RunStats(self.executed, self.cancelled, self.pending)

    def event_log(self) -> str:
        return self._log.getvalue()


class MetricTicker:
    """every period before the horizon: flushes transfer progress, then samples node statistics"""

    def __init__(self, loop:EventLoop, engine:TransferEngine, plane:MonitoringPlane, period:float, vo:str):
        assert period > 0, "metric period must be positive"
        self.loop = loop
        self.engine = engine
        self.plane = plane
        self.period = period
        self.vo = vo
        self.ticks = 0

    def start(self) -> None:
        self._next()

    def _next(self) -> None:
        t = self.ticks * self.period
        if t < self.loop.horizon:
            self.loop.schedule_at(t, EventKind.METRIC_PERIOD, self.tick, str(self.ticks))

    def tick(self) -> None:
        self.ticks += 1
        self.engine.flush()
        now = self.loop.now()
        for node in self.engine.topology.node_names:
            for sample in node_stats_sample(node, self.engine.active_sessions(node), now, self.vo):
                self.plane.emit(sample)
        self._next()


@dataclass(frozen=True)
class SimConfig:
    topology: GridTopology
    policy: typing.Optional[ReplicationPolicy] = None
    schedule: typing.Optional[IngestSchedule] = None
    sizes: typing.Mapping[Resolution, int] = field(default_factory=size_table)
    alpha: float = 0.25
    p_default: int = 10
    selection: SelectionPolicy = SelectionPolicy.GREEDY
    io_limit: typing.Optional[int] = None
    options: TransferOptions = TransferOptions()
    workload: WorkloadSpec = WorkloadSpec()
    days: int = 1
    seed: int = field(default_factory=lambda: Config.MEDIOGRID_SEED)
    loss_probability: float = field(default_factory=lambda: Config.MEDIOGRID_LOSS_PROBABILITY)
    metric_period: float = field(default_factory=lambda: Config.MEDIOGRID_METRIC_PERIOD)
    vo: str = field(default_factory=lambda: Config.MEDIOGRID_DEFAULT_VO)
    storage_root: typing.Optional[str] = None
    drain: bool = True

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss probability must lie in [0, 1]")
        if not self.metric_period > 0:
            raise ValueError("metric period must be positive")
        if self.schedule is not None and self.policy is None:
            raise ValueError("ingest needs a replication policy naming the acquisition node")

    @property
    def horizon(self) -> float:
        return self.days * SECONDS_PER_DAY


def load_sim_config(text:typing.Union[str, ConfigDocument], days:int=1, seed:typing.Optional[int]=None,
                    drain:bool=True) -> SimConfig:
    """builds a SimConfig from main config text; raises ConfigError with the line at fault"""
    document = parse_document(text) if isinstance(text, str) else text
    topology = load_topology(document)

    replication = document.section("replication")
    policy = None
    if "replication" in document.data:
        if "acquisition" not in replication:
            raise ConfigError("replication section needs acquisition=<node>", document.line_of("replication"))
        try:
            policy = ReplicationPolicy(
                        acquisition_node=replication["acquisition"],
                        targets=dict(replication["targets"]),
                        parallelism=replication.get("parallelism", 10),
                        controller=replication.get("controller"),
                        fanout=replication.get("fanout", False),
                        vo=replication.get("vo", Config.MEDIOGRID_DEFAULT_VO),
                        ).validate(topology)
        except (ConfigError, TopologyError) as error:
            raise ConfigError(str(error), document.line_of("replication"))

    raw_ingest = document.section("ingest")
    schedule = None
    sizes = size_table(
                raw_ingest.get("size_250m_mb", 150),
                raw_ingest.get("size_500m_mb", 60),
                raw_ingest.get("size_1km_mb", 25),
                )
    if "ingest" in document.data:
        if policy is None:
            raise ConfigError("ingest needs a [replication] section naming the acquisition node",
                              document.line_of("ingest"))
        schedule = IngestSchedule(
                        area_ids(raw_ingest.get("areas", 1)),
                        raw_ingest.get("rate_per_day", 20),
                        raw_ingest.get("jitter_seed"),
                        )

    raw_sched = document.section("sched")
    raw_monitor = document.section("monitor")
    raw_workload = document.section("workload")
    return SimConfig(
                topology=topology,
                policy=policy,
                schedule=schedule,
                sizes=sizes,
                alpha=raw_sched.get("alpha", 0.25),
                p_default=raw_sched.get("p_default", 10),
                selection=SelectionPolicy(raw_sched.get("policy", SelectionPolicy.GREEDY.value)),
                io_limit=raw_sched.get("io_limit"),
                options=TransferOptions(raw_sched.get("reuse", True), raw_sched.get("pipeline", True)),
                workload=WorkloadSpec(
                            raw_workload.get("requests_per_day", 0),
                            tuple(raw_workload.get("vos", ())),
                            raw_workload.get("chain", 0),
                            raw_workload.get("intermediate_ratio", 0.5),
                            ),
                days=days,
                seed=Config.MEDIOGRID_SEED if seed is None else seed,
                loss_probability=raw_monitor.get("loss", Config.MEDIOGRID_LOSS_PROBABILITY),
                metric_period=raw_monitor.get("period", Config.MEDIOGRID_METRIC_PERIOD),
                vo=raw_monitor.get("vo", Config.MEDIOGRID_DEFAULT_VO),
                drain=drain,
                )


@dataclass
class RunResult:
    event_log: str
    metric_log: str
    catalog_snapshot: str
    reports: typing.List[TransferReport]
    summary: SimulationSummary
    catalog: ReplicaCatalog
    repository: MetricRepository
    jobs: JobTree


def run(config:SimConfig) -> RunResult:
    """
        runs one simulation: ingest and replication of the scheduled granules,
        the synthetic request workload, and periodic node statistics
    """
    loop = EventLoop(config.horizon, config.drain)
    catalog = ReplicaCatalog()
    plane = MonitoringPlane(loss_probability=config.loss_probability, seed=config.seed)
    engine = TransferEngine(loop, config.topology, plane.emit, catalog)
    jobs = JobTree()

    granules = []
    daemon = None
    if config.policy is not None:
        daemon = ReplicationDaemon(loop, engine, catalog, StorageLedger(config.topology), config.policy, jobs,
                                   plane.emit, config.sizes, config.storage_root)
        if config.schedule is not None:
            granules = generate_granules(config.schedule, config.days, config.seed, config.sizes)
            daemon.schedule(granule for granule in granules if granule.acquired_at < config.horizon)

    predictor = BandwidthPredictor(config.topology, config.alpha, config.p_default)
    scheduler = DataScheduler(engine, catalog, predictor, config.p_default, config.options,
                              config.selection, config.io_limit, config.storage_root)
    requests = 0
    if config.workload.requests_per_day:
        workload = WorkloadGenerator(loop, scheduler, jobs, config.workload, config.seed, config.storage_root)
        requests = workload.schedule(config.days, config.horizon)

    # NOTE: an idle grid produces no events at all
    if granules or requests:
        MetricTicker(loop, engine, plane, config.metric_period, config.vo).start()

    stats = loop.run()

    event_log = loop.event_log()
    metric_log = plane.repository.text()
    snapshot = catalog.snapshot()
    predicted = None
    if config.policy is not None and config.schedule is not None:
        predicted = predicted_daily_traffic(config.schedule, config.policy, config.sizes)
    summary = SimulationSummary(
                days=config.days,
                seed=config.seed,
                granules_generated=len(granules),
                granules_ingested=daemon.granules_ingested if daemon else 0,
                granules_dropped=daemon.granules_dropped if daemon else 0,
                channel_files_registered=daemon.files_registered if daemon else 0,
                replication_transfers=daemon.transfers if daemon else 0,
                replicas_skipped=daemon.replicas_skipped if daemon else 0,
                bytes_replicated=daemon.bytes_replicated if daemon else 0,
                bytes_fanned_out=daemon.bytes_fanned_out if daemon else 0,
                predicted_bytes_per_cluster=predicted,
                requests=scheduler.requests,
                local_hits=scheduler.local_hits,
                coalesced=scheduler.coalesced,
                fetches=scheduler.fetches,
                unsatisfiable=scheduler.unsatisfiable,
                bytes_fetched=scheduler.bytes_fetched,
                samples_delivered=plane.sent - plane.lost,
                samples_lost=plane.lost,
                decode_errors=plane.collector.decode_errors,
                events_executed=stats.executed,
                events_cancelled=stats.cancelled,
                events_pending=stats.pending,
                event_log_sha256=sha256_text(event_log),
                metric_log_sha256=sha256_text(metric_log),
                catalog_sha256=sha256_text(snapshot),
                )
    logger.debug("simulated {} day(s): {} granules ingested, {} bytes replicated".format(
                    config.days, summary.granules_ingested, summary.bytes_replicated))
    return RunResult(event_log, metric_log, snapshot, list(engine.reports), summary, catalog, plane.repository, jobs)
