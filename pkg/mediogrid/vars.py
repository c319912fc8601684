#  vars.py
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

import typing
from enum import Enum

# INFO: Custom Types
NODE_ID = typing.NewType("Node ID", str)
CLUSTER_ID = typing.NewType("Cluster ID", str)
LFN = typing.NewType("Logical File Name", str)
VO_ID = typing.NewType("Virtual Organization ID", str)
JOB_ID = typing.NewType("Job ID", str)
DATAGRAM = typing.NewType("Datagram", bytes)
YAML = typing.NewType("YAML Document", str)
CSV = typing.NewType("CSV Document", str)

# INFO: Units, decimal throughout
MEGABYTE = 10 ** 6
GIGABYTE = 10 ** 9
BITS_PER_BYTE = 8
SECONDS_PER_DAY = 86400.0

# INFO: Static
QUANTUM = 1e-9 #: event-time comparison quantum, seconds
LOOPBACK_MBPS = 1e6
LOOPBACK_NAME = "loopback"
NO_JOB = "-"
EMPTY_REPLICAS = "-"
CODEC_MAGIC = "MG1"


class StringEnum(str, Enum):
    def __str__(self):
        return self.value


class Role(StringEnum):
    ACQUISITION = "acquisition"
    STORAGE = "storage"
    COMPUTE = "compute"


class TransferMode(StringEnum):
    TWO_PARTY = "two_party"
    THIRD_PARTY = "third_party"


class Resolution(StringEnum):
    R250M = "250m"
    R500M = "500m"
    R1KM = "1km"


class Decision(StringEnum):
    LOCAL_HIT = "local_hit"
    COALESCED = "coalesced"
    FETCH = "fetch"
    UNSATISFIABLE = "unsatisfiable"


class SelectionPolicy(StringEnum):
    GREEDY = "greedy"
    CLUSTER_LOCAL = "cluster_local"


class GroupBy(StringEnum):
    NODE = "node"
    VO = "vo"
    CLUSTER = "cluster"


class Aggregation(StringEnum):
    SUM = "sum"
    AVG = "avg"
    RATE = "rate"
    COUNT = "count"
    MAX = "max"


class EventKind(StringEnum):
    GRANULE_ARRIVAL = "granule-arrival"
    TRANSFER_PROGRESS = "transfer-progress"
    TRANSFER_COMPLETE = "transfer-complete"
    RESHARE = "reshare"
    METRIC_PERIOD = "metric-period"
    REQUEST_ARRIVAL = "request-arrival"


# NOTE: real MODIS band layout, channels 1-2 at 250m, 3-7 at 500m, the rest at 1km
CHANNEL_COUNT = 36
CHANNEL_RESOLUTIONS = {
    index: (Resolution.R250M if index <= 2 else Resolution.R500M if index <= 7 else Resolution.R1KM)
    for index in range(1, CHANNEL_COUNT + 1)
    }
DEFAULT_CHANNEL_SIZES = {
    Resolution.R250M: 150 * MEGABYTE,
    Resolution.R500M: 60 * MEGABYTE,
    Resolution.R1KM: 25 * MEGABYTE,
    }

# INFO: built-in link calibration
INTER_DEFAULTS = {"bandwidth_mbps": 100.0, "rtt": 0.05, "rmax_mbps": 10.0}
INTRA_DEFAULTS = {"bandwidth_mbps": 1000.0, "rtt": 0.0002, "rmax_mbps": 200.0}
DEFAULT_GAMMA = 0.02
DEFAULT_HANDSHAKE_ROUNDS = 3
DEFAULT_PER_FILE_ROUNDS = 2
DEFAULT_COMMAND_ROUND = 1


def str2bool(v) -> bool:
    return str(v).lower() in ("yes", "true", "t", "1", "on")


def megabits(size_bytes: int) -> float:
    """bytes to megabits, 1 MB = 8 Mb"""
    return size_bytes * BITS_PER_BYTE / MEGABYTE
