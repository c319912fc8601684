#  store.py
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
MongoDB persistence for replica catalogs.

One document per logical file::

    {"_id": lfn, "collection": str, "size": int, "replicas": [{"node": str, "path": str}, ...]}
"""
__all__ = ["MongoCatalogStore", "RECORD_SCHEMA", "record_to_doc", "doc_to_record"]

import typing

from jsonschema import validate
from pymongo import MongoClient, ASCENDING

from ..catalog import CatalogRecord, PhysicalLocation, ReplicaCatalog
from ..config import Config
from ..utils import logger

RECORD_SCHEMA = {
    "type": "object",
    "required": ["_id", "collection", "size", "replicas"],
    "properties": {
        "_id": {"type": "string", "minLength": 1},
        "collection": {"type": "string", "minLength": 1},
        "size": {"type": "integer", "exclusiveMinimum": 0},
        "replicas": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["node", "path"],
                "properties": {
                    "node": {"type": "string", "minLength": 1},
                    "path": {"type": "string", "minLength": 1},
                    },
                "additionalProperties": False,
                },
            },
        },
    "additionalProperties": False,
    }


def record_to_doc(record:CatalogRecord) -> dict:
    doc = {
        "_id": record.lfn,
        "collection": record.collection,
        "size": record.size,
        "replicas": [{"node": location.node, "path": location.path} for location in record.locations],
        }
    validate(doc, RECORD_SCHEMA)
    return doc


def doc_to_record(doc:dict) -> CatalogRecord:
    validate(doc, RECORD_SCHEMA)
    return CatalogRecord(
                doc["_id"],
                doc["collection"],
                doc["size"],
                frozenset(PhysicalLocation(item["node"], item["path"]) for item in doc["replicas"]),
                )


class MongoCatalogStore(MongoClient):
    """
        MongoClient holding one catalog in Config.MONGO_COLLECTION of the
        URI's default database (Config.MONGO_DB when the URI names none).
        save() replaces whatever catalog was stored before.
    """
    _MONGO_URI = lambda _: getattr(Config, "MONGO_URI", None) #: defaults to Config.MONGO_URI if not supplied
    _COLLECTION = None

    def __init__(self, mongo_uri:typing.Optional[str]=None, collection:typing.Optional[str]=None, **kwargs):
        self._MONGO_URI = mongo_uri or self._MONGO_URI
        if callable(self._MONGO_URI):
            self._MONGO_URI = self._MONGO_URI()
        self._COLLECTION = collection or Config.MONGO_COLLECTION
        MongoClient.__init__(self, self._MONGO_URI, **kwargs)

    def __repr__(self):
        return "<mediogrid.MongoCatalogStore.{}>".format(self._COLLECTION)

    @property
    def records(self):
        db = self.get_default_database(default=Config.MONGO_DB)
        return db[self._COLLECTION]

    def save(self, catalog:ReplicaCatalog) -> int:
        docs = [record_to_doc(record) for record in catalog]
        self.records.delete_many({})
        if docs:
            self.records.insert_many(docs, ordered=True)
        logger.debug("stored {} catalog records in {}".format(len(docs), self._COLLECTION))
        return len(docs)

    def load(self) -> ReplicaCatalog:
        catalog = ReplicaCatalog()
        for doc in self.records.find({}).sort("_id", ASCENDING):
            record = doc_to_record(doc)
            catalog.register(record.lfn, record.collection, record.size)
            for location in record.locations:
                catalog.add_replica(record.lfn, location)
        logger.debug("loaded {} catalog records from {}".format(len(catalog), self._COLLECTION))
        return catalog
