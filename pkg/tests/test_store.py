#  test_store.py
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

import mediogrid
from mediogrid.catalog import CatalogRecord, PhysicalLocation, ReplicaCatalog
from mediogrid.extra.store import MongoCatalogStore, record_to_doc, doc_to_record
import jsonschema
import unittest

# INFO: for use in tests, kept apart from any real catalog
example_collection = "mediogrid_test_rls"


def mongodb_available() -> bool:
    from pymongo.errors import PyMongoError
    try:
        client = MongoCatalogStore(serverSelectionTimeoutMS=200)
        client.server_info()
        client.close()
        return True
    except PyMongoError:
        return False


class RecordDocumentTests(unittest.TestCase):

    def test_record_document_round_trip(self):
        record = CatalogRecord("modis/A01/1800.000/ch01", "granule/A01/1800.000", 150 * 10 ** 6,
                               frozenset((PhysicalLocation("n2", "/s/a"), PhysicalLocation("n1", "/s/a"))))
        doc = record_to_doc(record)
        self.assertEqual(doc["_id"], record.lfn)
        self.assertEqual(doc["replicas"], [{"node": "n1", "path": "/s/a"}, {"node": "n2", "path": "/s/a"}])
        self.assertEqual(doc_to_record(doc), record)

    def test_invalid_document(self):
        with self.assertRaises(jsonschema.ValidationError):
            doc_to_record({"_id": "f", "collection": "c", "size": 0, "replicas": []})
        with self.assertRaises(jsonschema.ValidationError):
            doc_to_record({"_id": "f", "collection": "c", "size": 1, "replicas": [], "owner": "x"})


class MongoCatalogStoreTests(unittest.TestCase):

    def setUp(self):
        mediogrid.config.reset()

    def test_client_is_pymongo_client_instance(self):
        """Assert the catalog store is a valid pymongo MongoClient instance"""
        from pymongo import MongoClient as pymongo_client
        store = MongoCatalogStore(connect=False)
        self.assertIsInstance(store, pymongo_client)
        self.assertEqual(store._MONGO_URI, mediogrid.config.MONGO_URI)
        store.close()

    @unittest.skipUnless(mongodb_available(), "no MongoDB server answering on MONGO_URI")
    def test_save_and_load(self):
        catalog = ReplicaCatalog()
        catalog.register("a", "c1", 20)
        catalog.register("b", "c1", 10)
        catalog.add_replica("a", PhysicalLocation("n1", "/storage/a"))
        store = MongoCatalogStore(collection=example_collection)
        try:
            self.assertEqual(store.save(catalog), 2)
            self.assertEqual(store.load(), catalog)
            self.assertEqual(store.save(ReplicaCatalog()), 0)
            self.assertEqual(len(store.load()), 0)
        finally:
            store.records.drop()
            store.close()


if __name__ == '__main__':
    unittest.main()
