#  catalog.py
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
Replica Location Service.

Maps each logical file name to its logical collection, its size and the set
of physical locations holding a copy. All mutations go through one lock, and
readers always get immutable records back.
"""
__all__ = ["PhysicalLocation", "CatalogRecord", "LookupResult", "ReplicaCatalog"]

import threading
import typing
from dataclasses import dataclass, replace

from .errors import DuplicateEntryError, UnknownEntryError, SnapshotError
from .utils import logger
from .vars import LFN, NODE_ID, EMPTY_REPLICAS


@dataclass(frozen=True, order=True)
class PhysicalLocation:
    node: NODE_ID
    path: str

    def __post_init__(self):
        if not self.node or any(c in self.node for c in ":,\t\n "):
            raise ValueError("invalid node name '{}' in physical location".format(self.node))
        if not self.path or any(c in self.path for c in ",\t\n"):
            raise ValueError("invalid storage path '{}' in physical location".format(self.path))

    def __str__(self):
        return "{}:{}".format(self.node, self.path)

    @classmethod
    def parse(cls, text:str) -> "PhysicalLocation":
        node, sep, path = text.partition(":")
        if not sep:
            raise ValueError("physical location must look like node:path, got '{}'".format(text))
        return cls(node, path)


@dataclass(frozen=True)
class CatalogRecord:
    lfn: LFN
    collection: str
    size: int #: bytes
    replicas: typing.FrozenSet[PhysicalLocation] = frozenset()

    @property
    def locations(self) -> typing.List[PhysicalLocation]:
        """replicas ordered by node, then path"""
        return sorted(self.replicas)


class LookupResult(typing.NamedTuple):
    collection: str
    size: int
    replicas: typing.List[PhysicalLocation]


def _check_lfn(lfn:str) -> None:
    if not isinstance(lfn, str) or not lfn or any(c.isspace() for c in lfn):
        raise ValueError("logical file name must be a non-empty string without whitespace, got '{}'".format(lfn))


def _check_collection(collection:str) -> None:
    if not isinstance(collection, str) or not collection or any(c in collection for c in "\t\n"):
        raise ValueError("invalid collection name '{}'".format(collection))


class ReplicaCatalog:
    """
        A single logical catalog service.

        A record may hold zero replicas between its registration and the
        first add_replica, and keeps existing when its last replica is
        removed; only unregister drops it, together with its locations.
    """

    def __init__(self):
        self._records:typing.Dict[str, CatalogRecord] = {}
        self._collections:typing.Dict[str, typing.Set[str]] = {}
        self._lock = threading.RLock()

    def __repr__(self):
        return "<mediogrid.ReplicaCatalog records={}>".format(len(self))

    def __len__(self):
        return len(self._records)

    def __contains__(self, lfn):
        return lfn in self._records

    def __iter__(self) -> typing.Iterator[CatalogRecord]:
        with self._lock:
            records = [self._records[lfn] for lfn in sorted(self._records)]
        return iter(records)

    def __eq__(self, other):
        if not isinstance(other, ReplicaCatalog):
            return NotImplemented
        return self._records == other._records

    def _get(self, lfn:LFN) -> CatalogRecord:
        try:
            return self._records[lfn]
        except KeyError:
            raise UnknownEntryError("unknown logical file '{}'".format(lfn))

    def register(self, lfn:LFN, collection:str, size:int) -> CatalogRecord:
        """
            creates the record of a logical file inside a collection, with no replicas yet
        """
        _check_lfn(lfn)
        _check_collection(collection)
        if not isinstance(size, int) or size <= 0:
            raise ValueError("size of '{}' must be a positive number of bytes".format(lfn))
        with self._lock:
            if lfn in self._records:
                raise DuplicateEntryError("logical file '{}' is already registered".format(lfn))
            record = CatalogRecord(lfn, collection, size)
            self._records[lfn] = record
            self._collections.setdefault(collection, set()).add(lfn)
        return record

    def unregister(self, lfn:LFN) -> CatalogRecord:
        """
            drops the record and every one of its locations at once
        """
        with self._lock:
            record = self._get(lfn)
            del self._records[lfn]
            members = self._collections[record.collection]
            members.discard(lfn)
            if not members:
                del self._collections[record.collection]
        return record

    def add_replica(self, lfn:LFN, location:PhysicalLocation) -> CatalogRecord:
        with self._lock:
            record = self._get(lfn)
            if location in record.replicas:
                raise DuplicateEntryError("'{}' already has a replica at {}".format(lfn, location))
            record = replace(record, replicas=record.replicas | {location})
            self._records[lfn] = record
        return record

    def remove_replica(self, lfn:LFN, location:PhysicalLocation) -> CatalogRecord:
        with self._lock:
            record = self._get(lfn)
            if location not in record.replicas:
                raise UnknownEntryError("'{}' has no replica at {}".format(lfn, location))
            record = replace(record, replicas=record.replicas - {location})
            self._records[lfn] = record
        return record

    def record(self, lfn:LFN) -> CatalogRecord:
        with self._lock:
            return self._get(lfn)

    def lookup(self, lfn:LFN) -> LookupResult:
        """returns (collection, size, locations ordered by node then path)"""
        record = self.record(lfn)
        return LookupResult(record.collection, record.size, record.locations)

    def has_replica_on(self, lfn:LFN, node:NODE_ID) -> bool:
        return any(location.node == node for location in self.record(lfn).replicas)

    def list_collection(self, collection:str) -> typing.List[LFN]:
        with self._lock:
            return sorted(self._collections.get(collection, ()))

    def collections(self) -> typing.List[str]:
        with self._lock:
            return sorted(self._collections)

    def snapshot(self) -> str:
        """
            one record per line, sorted by lfn:
            ``lfn<TAB>collection<TAB>size_bytes<TAB>node:path[,node:path...]``
            with ``-`` standing for an empty replica set
        """
        lines = []
        for record in self:
            replicas = ",".join(str(location) for location in record.locations) or EMPTY_REPLICAS
            lines.append("\t".join((record.lfn, record.collection, str(record.size), replicas)))
        return "".join(line + "\n" for line in lines)

    @classmethod
    def restore(cls, text:str) -> "ReplicaCatalog":
        """
            rebuilds a catalog from snapshot text; raises SnapshotError naming
            the line that could not be read
        """
        catalog = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise SnapshotError("expected 4 tab-separated fields, found {}".format(len(fields)), lineno)
            lfn, collection, size, replicas = fields
            try:
                catalog.register(lfn, collection, int(size))
                if replicas != EMPTY_REPLICAS:
                    for location in replicas.split(","):
                        catalog.add_replica(lfn, PhysicalLocation.parse(location))
            except (ValueError, DuplicateEntryError) as error:
                raise SnapshotError(str(error), lineno)
        logger.debug("restored catalog with {} records".format(len(catalog)))
        return catalog
