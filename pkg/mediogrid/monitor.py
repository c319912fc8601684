#  monitor.py
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
ApMon-style monitoring plane.

Agents on every node encode MetricSamples into single-line datagrams and send
them, possibly lossily, to a collector. The collector decodes, checks
per-source time order and appends to an append-only repository, which
answers windowed accounting queries and job rollups.

Datagram grammar, ASCII, one line::

    MG1|<ts:%.9f>|<node>|<vo>|<job or ->|<name>|<value:%.17g>|<unit>\\n
"""
__all__ = [
        "METRICS", "register_metric", "MetricSample", "encode", "decode",
        "MetricRepository", "Collector", "ApMonAgent", "MonitoringPlane", "emit",
        "AccountingQuery", "accounting", "JobRecord", "JobTree", "register_job", "job_rollup",
        "node_stats_sample", "ACCOUNTING_HEADER", "accounting_csv",
        ]

import math
import random
import threading
import typing
from dataclasses import dataclass

from .errors import (
                CodecError,
                SourceRegressionError,
                UnknownMetricError,
                JobTreeError,
                )
from .utils import logger, substream, fmt_float
from .vars import (
                NODE_ID,
                VO_ID,
                JOB_ID,
                DATAGRAM,
                CSV,
                NO_JOB,
                CODEC_MAGIC,
                GroupBy,
                Aggregation,
                )

if typing.TYPE_CHECKING:
    from .topology import GridTopology

# INFO: registered metric dictionary, name -> unit
METRICS:typing.Dict[str, str] = {
    "ftp_in_bytes": "B",
    "ftp_out_bytes": "B",
    "load": "sessions",
    "cpu_pct": "%",
    "mem_mb": "MB",
    "dropped_granules": "granules",
    "skipped_replicas": "replicas",
    }

FIELD_COUNT = 8
_FORBIDDEN = ("|", "\n", "\r")


def register_metric(name:str, unit:str="") -> None:
    """adds a user metric to the dictionary the collector accepts"""
    _check_field("name", name)
    if unit:
        _check_field("unit", unit)
    METRICS[name] = unit


def _check_field(label:str, value:str) -> None:
    if not isinstance(value, str) or not value or any(c in value for c in _FORBIDDEN) or not value.isascii():
        raise ValueError("metric sample {} must be non-empty ascii without '|' or newlines, got {!r}".format(label, value))


@dataclass(frozen=True)
class MetricSample:
    ts: float #: simulation seconds, kept to 1e-9
    node: NODE_ID
    vo: VO_ID
    job: typing.Optional[JOB_ID]
    name: str
    value: float
    unit: str = ""

    def __post_init__(self):
        if not math.isfinite(self.ts) or self.ts < 0:
            raise ValueError("sample time must be a finite non-negative number")
        object.__setattr__(self, "ts", round(float(self.ts), 9))
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ValueError("sample value must be finite")
        _check_field("node", self.node)
        _check_field("vo", self.vo)
        _check_field("name", self.name)
        if self.job is not None:
            _check_field("job", self.job)
            if self.job == NO_JOB:
                raise ValueError("job id '{}' is reserved for samples without a job".format(NO_JOB))
        if self.unit:
            _check_field("unit", self.unit)


def encode(sample:MetricSample) -> DATAGRAM:
    return "{}|{:.9f}|{}|{}|{}|{}|{:.17g}|{}\n".format(
                CODEC_MAGIC,
                sample.ts,
                sample.node,
                sample.vo,
                sample.job if sample.job is not None else NO_JOB,
                sample.name,
                sample.value,
                sample.unit,
                ).encode("ascii")


def decode(datagram:typing.Union[bytes, str]) -> MetricSample:
    """
        inverse of encode; raises CodecError on a wrong magic, a wrong field
        count or numbers that do not parse
    """
    if isinstance(datagram, (bytes, bytearray)):
        try:
            datagram = bytes(datagram).decode("ascii")
        except UnicodeDecodeError:
            raise CodecError("datagram is not ascii")
    if not datagram.endswith("\n"):
        raise CodecError("datagram must end with a newline")
    fields = datagram[:-1].split("|")
    if len(fields) != FIELD_COUNT:
        raise CodecError("datagram has {} fields, expected {}".format(len(fields), FIELD_COUNT))
    magic, ts, node, vo, job, name, value, unit = fields
    if magic != CODEC_MAGIC:
        raise CodecError("wrong magic '{}'".format(magic))
    try:
        ts = float(ts)
        value = float(value)
    except ValueError:
        raise CodecError("unparseable number in datagram")
    try:
        return MetricSample(ts, node, vo, None if job == NO_JOB else job, name, value, unit)
    except ValueError as error:
        raise CodecError(str(error))


class MetricRepository:
    """
        Append-only sample log with an index per (name, node, vo) and per job.

        The index is derived data: rebuild_index() replays the log and
        reproduces every query result.
    """

    def __init__(self, sink:typing.Optional[typing.TextIO]=None):
        self._log:typing.List[MetricSample] = []
        self._index:typing.Dict[tuple, typing.List[int]] = {}
        self._by_job:typing.Dict[str, typing.List[int]] = {}
        self._sink = sink
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._log)

    def __iter__(self) -> typing.Iterator[MetricSample]:
        return iter(list(self._log))

    def _index_one(self, position:int, sample:MetricSample) -> None:
        self._index.setdefault((sample.name, sample.node, sample.vo), []).append(position)
        if sample.job is not None:
            self._by_job.setdefault(sample.job, []).append(position)

    def append(self, sample:MetricSample) -> int:
        with self._lock:
            position = len(self._log)
            self._log.append(sample)
            self._index_one(position, sample)
            if self._sink is not None:
                self._sink.write(encode(sample).decode("ascii"))
        return position

    def rebuild_index(self) -> None:
        with self._lock:
            self._index = {}
            self._by_job = {}
            for position, sample in enumerate(self._log):
                self._index_one(position, sample)

    def select(self, name:str, window:typing.Optional[typing.Tuple[float, float]]=None) -> typing.List[MetricSample]:
        """samples of one metric, in log order, with ts inside the half-open window"""
        with self._lock:
            positions = sorted(p for key, ps in self._index.items() if key[0] == name for p in ps)
            samples = [self._log[p] for p in positions]
        if window is None:
            return samples
        start, end = window
        return [sample for sample in samples if start <= sample.ts < end]

    def for_jobs(self, jobs:typing.Iterable[str], name:str) -> typing.List[MetricSample]:
        with self._lock:
            positions = sorted(p for job in jobs for p in self._by_job.get(job, ()))
            return [self._log[p] for p in positions if self._log[p].name == name]

    def text(self) -> str:
        with self._lock:
            return "".join(encode(sample).decode("ascii") for sample in self._log)

    def dump(self, path:str) -> None:
        with open(path, "w", newline="") as _file:
            _file.write(self.text())

    @classmethod
    def load(cls, path:str) -> "MetricRepository":
        """replays a datagram log file; lines that do not decode are skipped and logged"""
        collector = Collector(cls(), check_order=False)
        with open(path, "r", newline="") as _file:
            for line in _file:
                collector.ingest(line)
        if collector.decode_errors:
            logger.warning("skipped {} malformed lines in {}".format(collector.decode_errors, path))
        return collector.repository


class Collector:
    """
        Decodes datagrams into the repository. Ingest is linearizable under
        concurrent submitters; errors are counted, never raised.
    """

    def __init__(self, repository:typing.Optional[MetricRepository]=None, check_order:bool=True):
        self.repository = repository if repository is not None else MetricRepository()
        self.check_order = check_order
        self.decode_errors = 0
        self.regressions = 0
        self.unknown_metrics = 0
        self._last_ts:typing.Dict[str, float] = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return "<mediogrid.Collector samples={} errors={}>".format(len(self.repository), self.rejected)

    @property
    def rejected(self) -> int:
        return self.decode_errors + self.regressions + self.unknown_metrics

    def accept(self, sample:MetricSample) -> MetricSample:
        """appends an already decoded sample; raises on unknown metric or per-source time regression"""
        with self._lock:
            if sample.name not in METRICS:
                self.unknown_metrics += 1
                raise UnknownMetricError("unknown metric '{}'".format(sample.name))
            last = self._last_ts.get(sample.node)
            if self.check_order and last is not None and sample.ts < last:
                self.regressions += 1
                raise SourceRegressionError("sample from '{}' at {} precedes {}".format(sample.node, sample.ts, last))
            self._last_ts[sample.node] = sample.ts if last is None else max(last, sample.ts)
            self.repository.append(sample)
        return sample

    def ingest(self, datagram:typing.Union[bytes, str]) -> typing.Optional[MetricSample]:
        """returns the appended sample, or None when the datagram was rejected"""
        try:
            sample = decode(datagram)
        except CodecError as error:
            with self._lock:
                self.decode_errors += 1
            logger.warning("dropping malformed datagram: {}".format(error))
            return None
        try:
            return self.accept(sample)
        except (UnknownMetricError, SourceRegressionError) as error:
            logger.warning("rejecting sample: {}".format(error))
            return None


class ApMonAgent:
    """per-node sender; each datagram is lost with the configured probability"""

    def __init__(self, node:NODE_ID, collector:Collector, loss_probability:float=0.0,
                 rng:typing.Optional[random.Random]=None, seed:int=0):
        assert 0.0 <= loss_probability <= 1.0, "loss probability must lie in [0, 1]"
        self.node = node
        self.collector = collector
        self.loss_probability = loss_probability
        self.rng = rng if rng is not None else substream(seed, "datagram-loss/{}".format(node))
        self.sent = 0
        self.lost = 0

    def __repr__(self):
        return "<mediogrid.ApMonAgent.{}>".format(self.node)

    def emit(self, sample:MetricSample) -> bool:
        """returns True if the datagram reached the collector"""
        datagram = encode(sample)
        self.sent += 1
        if self.rng.random() < self.loss_probability:
            self.lost += 1
            return False
        self.collector.ingest(datagram)
        return True


def emit(agent:ApMonAgent, sample:MetricSample) -> bool:
    return agent.emit(sample)


class MonitoringPlane:
    """one agent per node feeding one collector"""

    def __init__(self, repository:typing.Optional[MetricRepository]=None,
                 loss_probability:float=0.0, seed:int=0):
        self.collector = Collector(repository)
        self.loss_probability = loss_probability
        self.seed = seed
        self._agents:typing.Dict[str, ApMonAgent] = {}

    @property
    def repository(self) -> MetricRepository:
        return self.collector.repository

    def agent(self, node:NODE_ID) -> ApMonAgent:
        if node not in self._agents:
            self._agents[node] = ApMonAgent(node, self.collector, self.loss_probability, seed=self.seed)
        return self._agents[node]

    def emit(self, sample:MetricSample) -> bool:
        return self.agent(sample.node).emit(sample)

    @property
    def sent(self) -> int:
        return sum(agent.sent for agent in self._agents.values())

    @property
    def lost(self) -> int:
        return sum(agent.lost for agent in self._agents.values())


@dataclass(frozen=True)
class AccountingQuery:
    metric: str
    group_by: GroupBy = GroupBy.NODE
    window: typing.Tuple[float, float] = (0.0, math.inf)
    agg: Aggregation = Aggregation.SUM

    def __post_init__(self):
        object.__setattr__(self, "group_by", GroupBy(self.group_by))
        object.__setattr__(self, "agg", Aggregation(self.agg))
        start, end = self.window
        if not start < end:
            raise ValueError("accounting window [{}, {}) is empty".format(start, end))
        if self.agg is Aggregation.RATE and not math.isfinite(end - start):
            raise ValueError("a rate needs a bounded window")


def accounting(repository:MetricRepository, query:AccountingQuery,
               topology:typing.Optional["GridTopology"]=None) -> typing.List[typing.Tuple[str, float]]:
    """
        aggregates one metric over the window, per group; groups without
        samples are left out, rows come back ordered by group key
    """
    if query.metric not in METRICS:
        raise UnknownMetricError("unknown metric '{}'".format(query.metric))
    if query.group_by is GroupBy.CLUSTER and topology is None:
        raise ValueError("grouping by cluster needs the topology")

    groups:typing.Dict[str, typing.List[float]] = {}
    for sample in repository.select(query.metric, query.window):
        if query.group_by is GroupBy.NODE:
            key = sample.node
        elif query.group_by is GroupBy.VO:
            key = sample.vo
        else:
            key = topology.cluster_of(sample.node)
        groups.setdefault(key, []).append(sample.value)

    start, end = query.window
    rows = []
    for key in sorted(groups):
        values = groups[key]
        total = math.fsum(values)
        if query.agg is Aggregation.SUM:
            value = total
        elif query.agg is Aggregation.AVG:
            value = total / len(values)
        elif query.agg is Aggregation.RATE:
            value = total / (end - start)
        elif query.agg is Aggregation.COUNT:
            value = float(len(values))
        else:
            value = max(values)
        rows.append((key, value))
    return rows


ACCOUNTING_HEADER = "group,metric,agg,window_start,window_end,value"


def accounting_csv(rows:typing.List[typing.Tuple[str, float]], query:AccountingQuery) -> CSV:
    start, end = query.window
    lines = [ACCOUNTING_HEADER]
    for key, value in rows:
        lines.append(",".join((key, query.metric, query.agg.value, fmt_float(start), fmt_float(end), fmt_float(value))))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class JobRecord:
    id: JOB_ID
    parent: typing.Optional[JOB_ID]
    vo: VO_ID
    node: NODE_ID


class JobTree:
    """forked jobs; a parent is always registered before its children, so the tree has no cycles"""

    def __init__(self):
        self._jobs:typing.Dict[str, JobRecord] = {}
        self._children:typing.Dict[str, typing.List[str]] = {}

    def __len__(self):
        return len(self._jobs)

    def __contains__(self, job_id):
        return job_id in self._jobs

    def get(self, job_id:JOB_ID) -> JobRecord:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise JobTreeError("unknown job '{}'".format(job_id))

    def register(self, job:JobRecord) -> JobRecord:
        if job.id in self._jobs:
            raise JobTreeError("job '{}' is already registered".format(job.id))
        if job.parent is not None:
            if job.parent == job.id:
                raise JobTreeError("job '{}' cannot be its own parent".format(job.id))
            if job.parent not in self._jobs:
                raise JobTreeError("parent '{}' of job '{}' is not registered".format(job.parent, job.id))
            self._children[job.parent].append(job.id)
        self._jobs[job.id] = job
        self._children[job.id] = []
        return job

    def children(self, job_id:JOB_ID) -> typing.List[JOB_ID]:
        self.get(job_id)
        return list(self._children[job_id])

    def subtree(self, job_id:JOB_ID) -> typing.List[JOB_ID]:
        """the job and all of its transitive descendants, depth first"""
        self.get(job_id)
        found = []
        stack = [job_id]
        while stack:
            current = stack.pop()
            found.append(current)
            stack.extend(reversed(self._children[current]))
        return found

    def path(self, job_id:JOB_ID) -> typing.List[JOB_ID]:
        """the job followed by its ancestors up to the root"""
        trail = [self.get(job_id).id]
        while self._jobs[trail[-1]].parent is not None:
            trail.append(self._jobs[trail[-1]].parent)
        return trail


def register_job(tree:JobTree, job:JobRecord) -> JobRecord:
    return tree.register(job)


def job_rollup(tree:JobTree, repository:MetricRepository, job_id:JOB_ID, metric:str,
               window:typing.Optional[typing.Tuple[float, float]]=None) -> float:
    """sum of a metric over a job and every job it forked, directly or not"""
    jobs = tree.subtree(job_id)
    samples = repository.for_jobs(jobs, metric)
    if window is not None:
        start, end = window
        samples = [sample for sample in samples if start <= sample.ts < end]
    return math.fsum(sample.value for sample in samples)


def node_stats_sample(node:NODE_ID, load:int, ts:float, vo:VO_ID) -> typing.List[MetricSample]:
    """synthetic node statistics: load is the number of transfer sessions touching the node"""
    return [
        MetricSample(ts, node, vo, None, "load", float(load), METRICS["load"]),
        MetricSample(ts, node, vo, None, "cpu_pct", float(min(100, 10 * load)), METRICS["cpu_pct"]),
        MetricSample(ts, node, vo, None, "mem_mb", float(512 + 64 * load), METRICS["mem_mb"]),
        ]
