#  test_replication.py
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
from mediogrid.catalog import PhysicalLocation, ReplicaCatalog
from mediogrid.errors import CapacityError, ConfigError
from mediogrid.monitor import JobTree, MonitoringPlane, AccountingQuery, accounting, job_rollup
from mediogrid.replication import (
                ReplicationPolicy,
                IngestSchedule,
                StorageLedger,
                ReplicationDaemon,
                ChannelFile,
                GranuleSpec,
                area_ids,
                build_granule,
                generate_granules,
                ingest,
                location_path,
                replicate,
                predicted_daily_traffic,
                size_table,
                )
from mediogrid.simcore import EventLoop
from mediogrid.transfer import TransferEngine
from mediogrid.vars import Resolution, TransferMode
import unittest

grid_config = """
[cluster upb]
node upb-acq capacity_gb=100 role=acquisition
node upb-s1 capacity_gb=100 role=storage
node upb-s2 capacity_gb=100 role=storage

[cluster utcn]
node utcn-s1 capacity_gb=100 role=storage

[cluster uvt]
node uvt-s1 capacity_gb=2 role=storage

[link upb utcn]
[link upb uvt]
[link utcn uvt]
"""

# INFO: 2 * 40 + 5 * 10 + 29 * 30 MB, one gigabyte per granule
GIGABYTE_SIZES = size_table(40, 10, 30)


class GranuleTests(unittest.TestCase):

    def test_default_granule(self):
        granule = build_granule("A01", 1800.0)
        self.assertEqual(len(granule.channels), 36)
        self.assertEqual(granule.total_size, (2 * 150 + 5 * 60 + 29 * 25) * 10 ** 6)
        self.assertEqual(granule.lfn(1), "modis/A01/1800.000/ch01")
        self.assertEqual(granule.collection, "granule/A01/1800.000")
        self.assertEqual(granule.channels[6].resolution, Resolution.R500M)
        self.assertEqual(granule.channels[7].resolution, Resolution.R1KM)

    def test_gigabyte_table(self):
        self.assertEqual(build_granule("A01", 0.0, GIGABYTE_SIZES).total_size, 10 ** 9)

    def test_invalid_granules(self):
        channels = build_granule("A01", 0.0).channels
        with self.assertRaises(ValueError):
            GranuleSpec("A01", 0.0, channels[:35])
        with self.assertRaises(ValueError):
            GranuleSpec("A01", 0.0, (ChannelFile(1, Resolution.R1KM, 10),) + channels[1:])
        with self.assertRaises(ValueError):
            size_table(0, 60, 25)

    def test_area_ids(self):
        self.assertEqual(area_ids(3), ["A01", "A02", "A03"])
        self.assertEqual(area_ids(100)[-1], "A100")
        self.assertEqual(area_ids(100)[0], "A001")


class IngestScheduleTests(unittest.TestCase):

    def test_fifty_areas_for_a_day(self):
        """Assert 50 areas at 20 granules a day give 1000 granules in arrival order"""
        granules = generate_granules(IngestSchedule(area_ids(50), 20), days=1, seed=42)
        self.assertEqual(len(granules), 1000)
        keys = [(granule.acquired_at, granule.area) for granule in granules]
        self.assertEqual(keys, sorted(keys))
        self.assertEqual(len({granule.id for granule in granules}), 1000)

    def test_jitter_stays_within_the_slot(self):
        schedule = IngestSchedule(area_ids(4), 10)
        interval = schedule.interval
        for day in (1, 2):
            for granule in generate_granules(schedule, days=day, seed=1):
                slot = (granule.acquired_at % 86400.0) / interval
                k = round(slot - 0.5)
                self.assertLessEqual(abs(slot - (k + 0.5)), 0.1 + 1e-9)

    def test_same_seed_same_granules(self):
        schedule = IngestSchedule(area_ids(3), 5)
        self.assertEqual(generate_granules(schedule, 2, seed=9), generate_granules(schedule, 2, seed=9))
        self.assertNotEqual(generate_granules(schedule, 2, seed=9), generate_granules(schedule, 2, seed=10))

    def test_jitter_seed_overrides_run_seed(self):
        schedule = IngestSchedule(area_ids(3), 5, jitter_seed=77)
        self.assertEqual(generate_granules(schedule, 1, seed=1), generate_granules(schedule, 1, seed=2))

    def test_single_granule(self):
        granules = generate_granules(IngestSchedule(("A01",), 1), days=1)
        self.assertEqual(len(granules), 1)
        self.assertEqual(len(granules[0].lfns), 36)

    def test_invalid_schedules(self):
        with self.assertRaises(ValueError):
            generate_granules(IngestSchedule((), 20), days=1)
        with self.assertRaises(ValueError):
            generate_granules(IngestSchedule(("A01",), 20), days=0)
        with self.assertRaises(ValueError):
            IngestSchedule(("A01",), 0)


class ReplicationTests(unittest.TestCase):

    def setUp(self):
        mediogrid.config.reset()
        self.topology = mediogrid.load_topology(grid_config)
        self.catalog = ReplicaCatalog()
        self.ledger = StorageLedger(self.topology)
        self.loop = EventLoop()
        self.engine = TransferEngine(self.loop, self.topology, catalog=self.catalog)
        self.policy = ReplicationPolicy("upb-acq", {"upb": "upb-s1", "utcn": "utcn-s1", "uvt": "uvt-s1"})
        self.granule = build_granule("A01", 0.0, GIGABYTE_SIZES)

    def test_ingest_registers_every_channel(self):
        lfns = ingest(self.granule, self.catalog, self.policy, self.ledger)
        self.assertEqual(len(lfns), 36)
        self.assertEqual(self.catalog.list_collection(self.granule.collection), sorted(lfns))
        for lfn in lfns:
            replicas = self.catalog.lookup(lfn).replicas
            self.assertEqual([replica.node for replica in replicas], ["upb-acq"])
        self.assertEqual(self.ledger.used("upb-acq"), 10 ** 9)

    def test_ingest_over_capacity_registers_nothing(self):
        policy = ReplicationPolicy("uvt-s1")
        ingest(self.granule, self.catalog, policy, self.ledger)
        ingest(build_granule("A02", 0.0, GIGABYTE_SIZES), self.catalog, policy, self.ledger)
        with self.assertRaises(CapacityError):
            ingest(build_granule("A03", 0.0, GIGABYTE_SIZES), self.catalog, policy, self.ledger)
        self.assertEqual(self.catalog.list_collection("granule/A03/0.000"), [])
        self.assertEqual(len(self.catalog), 72)

    def test_one_third_party_session_per_target(self):
        ingest(self.granule, self.catalog, self.policy, self.ledger)
        specs = replicate(self.granule, self.policy, self.engine, self.catalog, self.ledger)
        self.assertEqual([spec.dest_node for spec in specs], ["upb-s1", "utcn-s1", "uvt-s1"])
        for spec in specs:
            self.assertEqual(len(spec.files), 36)
            self.assertEqual(spec.mode, TransferMode.THIRD_PARTY)
            self.assertEqual(spec.controller, "upb-acq")
            self.assertEqual(spec.parallelism, 10)
        self.loop.run()
        for lfn in self.granule.lfns:
            self.assertEqual(len(self.catalog.lookup(lfn).replicas), 4)

    def test_replicas_appear_only_on_completion(self):
        ingest(self.granule, self.catalog, self.policy, self.ledger)
        replicate(self.granule, self.policy, self.engine, self.catalog, self.ledger)
        self.loop.step()
        self.assertEqual(len(self.catalog.lookup(self.granule.lfn(36)).replicas), 1)

    def test_no_targets_no_sessions(self):
        policy = ReplicationPolicy("upb-acq")
        ingest(self.granule, self.catalog, policy, self.ledger)
        self.assertEqual(replicate(self.granule, policy, self.engine, self.catalog, self.ledger), [])
        self.assertEqual(self.loop.pending, 0)

    def test_full_target_is_skipped(self):
        skipped = []
        for area in ("A01", "A02", "A03"):
            granule = build_granule(area, 0.0, GIGABYTE_SIZES)
            ingest(granule, self.catalog, self.policy, self.ledger)
            replicate(granule, self.policy, self.engine, self.catalog, self.ledger,
                      on_skip=lambda cluster, node: skipped.append((cluster, node)))
        self.assertEqual(skipped, [("uvt", "uvt-s1")])
        self.loop.run()
        self.assertEqual(len(self.catalog.lookup("modis/A03/0.000/ch01").replicas), 3)

    def test_acquisition_node_as_its_own_target(self):
        """Assert a target already holding the granule gets no session and no second reservation"""
        policy = ReplicationPolicy("upb-acq", {"upb": "upb-acq", "utcn": "utcn-s1"})
        ingest(self.granule, self.catalog, policy, self.ledger)
        specs = replicate(self.granule, policy, self.engine, self.catalog, self.ledger)
        self.assertEqual([spec.dest_node for spec in specs], ["utcn-s1"])
        self.loop.run()
        for lfn in self.granule.lfns:
            self.assertEqual(sorted(replica.node for replica in self.catalog.lookup(lfn).replicas),
                             ["upb-acq", "utcn-s1"])
        self.assertEqual(self.ledger.used("upb-acq"), 10 ** 9)
        schedule = IngestSchedule(area_ids(50), 20)
        self.assertEqual(predicted_daily_traffic(schedule, policy, GIGABYTE_SIZES), {"utcn": 10 ** 12})

    def test_channel_cached_before_the_session_completes(self):
        ingest(self.granule, self.catalog, self.policy, self.ledger)
        replicate(self.granule, self.policy, self.engine, self.catalog, self.ledger)
        lfn = self.granule.lfn(5)
        self.catalog.add_replica(lfn, PhysicalLocation("utcn-s1", location_path(lfn)))
        self.loop.run()
        self.assertEqual(sorted(replica.node for replica in self.catalog.lookup(lfn).replicas),
                         ["upb-acq", "upb-s1", "utcn-s1", "uvt-s1"])

    def test_policy_validation(self):
        with self.assertRaises(ConfigError):
            ReplicationPolicy("nowhere").validate(self.topology)
        with self.assertRaises(ConfigError):
            ReplicationPolicy("upb-acq", {"utcn": "upb-s1"}).validate(self.topology)
        with self.assertRaises(AssertionError):
            ReplicationPolicy("upb-acq", parallelism=0)

    def test_predicted_daily_traffic(self):
        schedule = IngestSchedule(area_ids(50), 20)
        traffic = predicted_daily_traffic(schedule, self.policy, GIGABYTE_SIZES)
        self.assertEqual(traffic, {"upb": 10 ** 12, "utcn": 10 ** 12, "uvt": 10 ** 12})
        self.assertEqual(predicted_daily_traffic(schedule, ReplicationPolicy("upb-acq")), {})


class ReplicationDaemonTests(unittest.TestCase):

    def setUp(self):
        mediogrid.config.reset()
        self.topology = mediogrid.load_topology(grid_config)
        self.catalog = ReplicaCatalog()
        self.loop = EventLoop()
        self.plane = MonitoringPlane()
        self.engine = TransferEngine(self.loop, self.topology, emit=self.plane.emit, catalog=self.catalog)
        self.jobs = JobTree()

    def daemon(self, policy:ReplicationPolicy) -> ReplicationDaemon:
        return ReplicationDaemon(self.loop, self.engine, self.catalog, StorageLedger(self.topology),
                                 policy, self.jobs, self.plane.emit, GIGABYTE_SIZES)

    def test_granules_reach_every_target(self):
        policy = ReplicationPolicy("upb-acq", {"upb": "upb-s1", "utcn": "utcn-s1"})
        daemon = self.daemon(policy)
        granules = generate_granules(IngestSchedule(area_ids(2), 2), days=1, sizes=GIGABYTE_SIZES)
        self.assertEqual(daemon.schedule(granules), 4)
        self.loop.run()
        self.assertEqual(daemon.granules_ingested, 4)
        self.assertEqual(daemon.transfers, 8)
        self.assertEqual(daemon.bytes_per_cluster, {"upb": 4 * 10 ** 9, "utcn": 4 * 10 ** 9})
        for granule in granules:
            for lfn in granule.lfns:
                self.assertEqual(len(self.catalog.lookup(lfn).replicas), 3)

        rows = dict(accounting(self.plane.repository, AccountingQuery("ftp_in_bytes", "cluster"), self.topology))
        self.assertEqual(rows, {"upb": 4 * 10 ** 9, "utcn": 4 * 10 ** 9})
        self.assertEqual(job_rollup(self.jobs, self.plane.repository, "replication", "ftp_in_bytes"), 8 * 10 ** 9)
        self.assertEqual(len(self.jobs.children("replication")), 4)

    def test_fan_out_covers_the_cluster(self):
        policy = ReplicationPolicy("upb-acq", {"utcn": "utcn-s1", "upb": "upb-s1"}, fanout=True)
        daemon = self.daemon(policy)
        granule = build_granule("A01", 0.0, GIGABYTE_SIZES)
        daemon.schedule([granule])
        self.loop.run()
        nodes = [replica.node for replica in self.catalog.lookup(granule.lfn(1)).replicas]
        self.assertEqual(nodes, ["upb-acq", "upb-s1", "upb-s2", "utcn-s1"])
        self.assertEqual(daemon.bytes_fanned_out, 10 ** 9)

    def test_full_acquisition_node_drops_granules(self):
        daemon = self.daemon(ReplicationPolicy("uvt-s1"))
        daemon.schedule([build_granule(area, 0.0, GIGABYTE_SIZES) for area in area_ids(3)])
        self.loop.run()
        self.assertEqual(daemon.granules_ingested, 2)
        self.assertEqual(daemon.granules_dropped, 1)
        rows = accounting(self.plane.repository, AccountingQuery("dropped_granules"))
        self.assertEqual(rows, [("uvt-s1", 1.0)])


if __name__ == '__main__':
    unittest.main()
