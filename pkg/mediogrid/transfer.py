#  transfer.py
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
GridFTP-like transfer engine.

A session opens with ``h`` round trips of handshake, then moves its files one
after the other. Each file pays ``hf`` round trips of data-channel setup
(only the first file when channels are reused) and one command round trip
unless commands are pipelined, then streams its payload over ``p`` parallel
data channels.

Setup phases are latency bound and never share the link. Data phases that
overlap on one link share it by stream count: with ``P`` streams active in
total every stream gets ``A(P) / P`` megabits/second, so a session with
``p`` streams gets ``A(P) * p / P``. The per-session cap ``p * r_max`` never
binds under this rule, since ``A(P) <= P * r_max``.
"""
__all__ = [
        "FileSlice", "TransferOptions", "TransferSpec", "TransferReport",
        "Transfer", "LinkSession", "TransferEngine",
        "setup_delays", "estimate_time", "partial_transfer",
        ]

import heapq
import itertools
import typing
from dataclasses import dataclass, field

from .catalog import PhysicalLocation, ReplicaCatalog
from .config import Config
from .errors import TransferError
from .monitor import MetricSample, METRICS
from .topology import GridTopology, NetworkLink, aggregate_throughput, resolve_link
from .utils import logger
from .vars import (
                LFN,
                NODE_ID,
                VO_ID,
                JOB_ID,
                MEGABYTE,
                BITS_PER_BYTE,
                QUANTUM,
                EventKind,
                TransferMode,
                megabits,
                )

if typing.TYPE_CHECKING:
    from .simcore import EventLoop, Event


@dataclass(frozen=True)
class FileSlice:
    """one file of a transfer; byte_range is a half-open [start, end) slice of the file"""
    lfn: LFN
    size: int #: bytes
    byte_range: typing.Optional[typing.Tuple[int, int]] = None

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size <= 0:
            raise TransferError("file '{}' must have a positive size".format(self.lfn))
        if self.byte_range is not None:
            start, end = self.byte_range
            if start < 0 or end > self.size:
                raise TransferError("range [{}, {}) exceeds the {} bytes of '{}'".format(start, end, self.size, self.lfn))
            if end <= start:
                raise TransferError("empty range [{}, {}) for '{}'".format(start, end, self.lfn))

    @property
    def length(self) -> int:
        if self.byte_range is None:
            return self.size
        return self.byte_range[1] - self.byte_range[0]

    @property
    def megabits(self) -> float:
        return megabits(self.length)


@dataclass(frozen=True)
class TransferOptions:
    channel_reuse: bool = True
    pipelining: bool = True


@dataclass(frozen=True)
class TransferSpec:
    source: PhysicalLocation
    dest_node: NODE_ID
    files: typing.Tuple[FileSlice, ...]
    parallelism: int = 1
    options: TransferOptions = TransferOptions()
    mode: TransferMode = TransferMode.TWO_PARTY
    vo: VO_ID = field(default_factory=lambda: Config.MEDIOGRID_DEFAULT_VO)
    job: typing.Optional[JOB_ID] = None
    controller: typing.Optional[NODE_ID] = None #: node ordering a third-party transfer

    def __post_init__(self):
        object.__setattr__(self, "files", tuple(self.files))
        object.__setattr__(self, "mode", TransferMode(self.mode))
        if not isinstance(self.parallelism, int) or self.parallelism < 1:
            raise TransferError("parallelism must be an integer >= 1, got {}".format(self.parallelism))
        if not self.files:
            raise TransferError("a transfer needs at least one file")
        if self.controller is not None and self.mode is not TransferMode.THIRD_PARTY:
            raise TransferError("only third-party transfers have a controller")

    @property
    def bytes(self) -> int:
        return sum(item.length for item in self.files)


@dataclass(frozen=True)
class TransferReport:
    transfer_id: str
    spec: TransferSpec
    start_time: float
    end_time: float
    bytes_moved: int
    per_file: typing.Tuple[typing.Tuple[LFN, float], ...]
    link: str

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    @property
    def effective_throughput(self) -> float:
        """megabits/second over the whole session, setup included"""
        return megabits(self.bytes_moved) / self.duration


def setup_delays(spec:TransferSpec, link:NetworkLink) -> typing.List[float]:
    """latency-bound seconds paid before each file's data phase"""
    delays = []
    for index in range(len(spec.files)):
        channel = link.per_file_rounds * link.rtt if index == 0 or not spec.options.channel_reuse else 0.0
        command = 0.0 if spec.options.pipelining else link.command_round * link.rtt
        delays.append(channel + command)
    delays[0] += link.handshake_rounds * link.rtt
    return delays


def estimate_time(spec:TransferSpec, link:NetworkLink) -> float:
    """
        closed-form session time on an otherwise idle link

        T = h*rtt + sum over files of (chan_i + cmd_i + bits_i / A(p))
    """
    rate = aggregate_throughput(link, spec.parallelism)
    total = 0.0
    for delay, item in zip(setup_delays(spec, link), spec.files):
        total += delay + item.megabits / rate
    return total


class _Flow:
    """the data phase of one file on one link session"""
    __slots__ = ("transfer", "item", "megabits", "streams", "finish_v", "emitted")

    def __init__(self, transfer:"Transfer", item:FileSlice):
        self.transfer = transfer
        self.item = item
        self.megabits = item.megabits
        self.streams = transfer.spec.parallelism
        self.finish_v = 0.0
        self.emitted = 0 #: bytes already reported to the monitor


class LinkSession:
    """
        The sessions currently moving data over one link.

        Progress is kept in virtual time: ``virtual`` is the megabits every
        single stream has delivered since the link last went idle, so a flow
        joining at ``V`` with ``b`` megabits over ``p`` streams is done when
        ``virtual`` reaches ``V + b / p``. Only the earliest of those has an
        event in the queue; any join or leave replaces it.
    """

    def __init__(self, key:str, link:NetworkLink, loop:"EventLoop", on_finish:typing.Callable[[_Flow], None]):
        self.key = key
        self.link = link
        self.loop = loop
        self.on_finish = on_finish
        self.virtual = 0.0
        self.total_streams = 0
        self._stamp = loop.now()
        self._flows:typing.List[typing.Tuple[float, int, _Flow]] = []
        self._seq = itertools.count()
        self._event:typing.Optional["Event"] = None
        self._busy = False

    def __repr__(self):
        return "<mediogrid.LinkSession.{} flows={} streams={}>".format(self.key, len(self._flows), self.total_streams)

    def __len__(self):
        return len(self._flows)

    def per_stream_rate(self) -> float:
        if not self.total_streams:
            return 0.0
        return aggregate_throughput(self.link, self.total_streams) / self.total_streams

    def capacity(self) -> float:
        """aggregate megabits/second the link delivers right now"""
        if not self.total_streams:
            return 0.0
        return aggregate_throughput(self.link, self.total_streams)

    def rates(self) -> typing.Dict[str, float]:
        """current data rate of every session on the link, by transfer id"""
        rate = self.per_stream_rate()
        shares = {}
        for _, _, flow in self._flows:
            shares[flow.transfer.id] = shares.get(flow.transfer.id, 0.0) + rate * flow.streams
        return shares

    def advance(self) -> None:
        now = self.loop.now()
        if self.total_streams:
            self.virtual += (now - self._stamp) * self.per_stream_rate()
        self._stamp = now

    def remaining(self, flow:_Flow) -> float:
        """megabits still to move for a flow on this link"""
        self.advance()
        return max(0.0, (flow.finish_v - self.virtual) * flow.streams)

    def join(self, flow:_Flow) -> None:
        self.advance()
        flow.finish_v = self.virtual + flow.megabits / flow.streams
        heapq.heappush(self._flows, (flow.finish_v, next(self._seq), flow))
        self.total_streams += flow.streams
        self.reshare()

    def reshare(self) -> None:
        """replaces the pending completion event after the set of flows changed"""
        if self._busy:
            return
        if self._event is not None:
            self.loop.cancel(self._event)
            self._event = None
        if not self._flows:
            self.virtual = 0.0
            return
        delay = max(0.0, (self._flows[0][0] - self.virtual) / self.per_stream_rate())
        self._event = self.loop.schedule_at(self.loop.now() + delay, EventKind.RESHARE, self._on_event, self.key)

    def _on_event(self) -> None:
        self._event = None
        self.advance()
        tolerance = self.per_stream_rate() * QUANTUM
        finished = [heapq.heappop(self._flows)[2]]
        while self._flows and self._flows[0][0] - self.virtual <= tolerance:
            finished.append(heapq.heappop(self._flows)[2])
        for flow in finished:
            self.total_streams -= flow.streams
        self._busy = True
        try:
            for flow in finished:
                self.on_finish(flow)
        finally:
            self._busy = False
        self.reshare()


class Transfer:
    """handle on one executing session; ``report`` is set once it completes"""

    def __init__(self, transfer_id:str, spec:TransferSpec, link:NetworkLink, session:LinkSession,
                 started_at:float, on_complete:typing.Optional[typing.Callable[[TransferReport], None]]):
        self.id = transfer_id
        self.spec = spec
        self.link = link
        self.session = session
        self.started_at = started_at
        self.on_complete = on_complete
        self.delays = setup_delays(spec, link)
        self.index = 0
        self.per_file:typing.List[typing.Tuple[LFN, float]] = []
        self.flow:typing.Optional[_Flow] = None
        self.report:typing.Optional[TransferReport] = None

    def __repr__(self):
        return "<mediogrid.Transfer.{} {}->{}>".format(self.id, self.spec.source.node, self.spec.dest_node)

    @property
    def done(self) -> bool:
        return self.report is not None


class TransferEngine:
    """
        Runs TransferSpecs inside the event loop.

        ftp_in_bytes (dest node) and ftp_out_bytes (source node) are emitted
        when a file completes and, for files still streaming, whenever
        flush() is called; the samples of one file always add up to its
        exact byte count.
    """

    def __init__(self, loop:"EventLoop", topology:GridTopology,
                 emit:typing.Optional[typing.Callable[[MetricSample], typing.Any]]=None,
                 catalog:typing.Optional[ReplicaCatalog]=None):
        self.loop = loop
        self.topology = topology
        self.catalog = catalog
        self._emit = emit
        self._sessions:typing.Dict[str, LinkSession] = {}
        self._active:typing.Dict[str, Transfer] = {}
        self._ids = itertools.count(1)
        self.reports:typing.List[TransferReport] = []

    def __repr__(self):
        return "<mediogrid.TransferEngine active={} completed={}>".format(len(self._active), len(self.reports))

    def link_session(self, link:NetworkLink, node:NODE_ID) -> LinkSession:
        # NOTE: every node has its own loopback
        key = "{}/{}".format(link.name, node) if link.name == self.topology.loopback.name else link.name
        if key not in self._sessions:
            self._sessions[key] = LinkSession(key, link, self.loop, self._file_done)
        return self._sessions[key]

    @property
    def active_transfers(self) -> typing.List[Transfer]:
        return list(self._active.values())

    def active_sessions(self, node:NODE_ID) -> int:
        """number of running transfers with node as source or destination"""
        return sum(1 for transfer in self._active.values()
                   if node in (transfer.spec.source.node, transfer.spec.dest_node))

    def execute(self, spec:TransferSpec,
                on_complete:typing.Optional[typing.Callable[[TransferReport], None]]=None) -> Transfer:
        """
            starts a session now; on_complete receives the TransferReport at the
            transfer-complete event
        """
        for node in (spec.source.node, spec.dest_node) + ((spec.controller,) if spec.controller else ()):
            self.topology.node(node)
        if self.catalog is not None:
            for item in spec.files:
                if not self.catalog.has_replica_on(item.lfn, spec.source.node):
                    raise TransferError("'{}' has no replica on source node '{}'".format(item.lfn, spec.source.node))
        link = resolve_link(self.topology, spec.source.node, spec.dest_node)
        transfer = Transfer(
                        "tx{:06d}".format(next(self._ids)),
                        spec,
                        link,
                        self.link_session(link, spec.source.node),
                        self.loop.now(),
                        on_complete,
                        )
        self._active[transfer.id] = transfer
        logger.debug("starting {} over {} with {} file(s), p={}".format(transfer, link.name, len(spec.files), spec.parallelism))
        self._setup(transfer)
        return transfer

    def _setup(self, transfer:Transfer) -> None:
        delay = transfer.delays[transfer.index]
        if delay > 0:
            self.loop.schedule_at(
                            self.loop.now() + delay,
                            EventKind.TRANSFER_PROGRESS,
                            lambda: self._stream(transfer),
                            "{} file={}".format(transfer.id, transfer.index),
                            )
        else:
            self._stream(transfer)

    def _stream(self, transfer:Transfer) -> None:
        transfer.flow = _Flow(transfer, transfer.spec.files[transfer.index])
        transfer.session.join(transfer.flow)

    def _sample(self, node:NODE_ID, transfer:Transfer, name:str, count:int) -> None:
        if self._emit is None or count <= 0:
            return
        self._emit(MetricSample(self.loop.now(), node, transfer.spec.vo, transfer.spec.job, name, float(count), METRICS[name]))

    def _traffic(self, transfer:Transfer, count:int) -> None:
        self._sample(transfer.spec.dest_node, transfer, "ftp_in_bytes", count)
        self._sample(transfer.spec.source.node, transfer, "ftp_out_bytes", count)

    def _file_done(self, flow:_Flow) -> None:
        transfer = flow.transfer
        self._traffic(transfer, flow.item.length - flow.emitted)
        flow.emitted = flow.item.length
        transfer.per_file.append((flow.item.lfn, self.loop.now()))
        transfer.flow = None
        transfer.index += 1
        if transfer.index < len(transfer.spec.files):
            self._setup(transfer)
        else:
            self.loop.schedule_at(
                            self.loop.now(),
                            EventKind.TRANSFER_COMPLETE,
                            lambda: self._complete(transfer),
                            "{} {}->{} bytes={}".format(transfer.id, transfer.spec.source.node,
                                                        transfer.spec.dest_node, transfer.spec.bytes),
                            )

    def _complete(self, transfer:Transfer) -> None:
        transfer.report = TransferReport(
                            transfer.id,
                            transfer.spec,
                            transfer.started_at,
                            self.loop.now(),
                            transfer.spec.bytes,
                            tuple(transfer.per_file),
                            transfer.link.name,
                            )
        del self._active[transfer.id]
        self.reports.append(transfer.report)
        logger.debug("{} done in {:.6f}s".format(transfer, transfer.report.duration))
        if transfer.on_complete is not None:
            transfer.on_complete(transfer.report)

    def flush(self) -> None:
        """reports bytes streamed so far by every file still in its data phase"""
        for transfer in sorted(self._active.values(), key=lambda _: _.id):
            flow = transfer.flow
            if flow is None:
                continue
            delivered = flow.megabits - transfer.session.remaining(flow)
            count = min(flow.item.length, int(delivered * MEGABYTE / BITS_PER_BYTE))
            if count > flow.emitted:
                self._traffic(transfer, count - flow.emitted)
                flow.emitted = count


def partial_transfer(engine:TransferEngine, spec:TransferSpec,
                     on_complete:typing.Optional[typing.Callable[[TransferReport], None]]=None) -> Transfer:
    """executes a spec whose files carry byte ranges; timing and traffic follow the range lengths"""
    assert any(item.byte_range is not None for item in spec.files), "partial transfer needs at least one byte range"
    return engine.execute(spec, on_complete)
