#  test_simcore.py
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
from mediogrid.errors import ConfigError, SchedulingError
from mediogrid.monitor import MonitoringPlane, job_rollup
from mediogrid.simcore import EventLoop, MetricTicker, load_sim_config, run, EVENT_LOG_HEADER
from mediogrid.transfer import TransferEngine
from mediogrid.vars import EventKind
import unittest

grid_config = """
[cluster upb]
node upb-acq capacity_gb=500 role=acquisition
node upb-c1 capacity_gb=100 role=compute

[cluster utcn]
node utcn-s1 capacity_gb=500 role=storage
node utcn-c1 capacity_gb=100 role=compute

[link upb utcn]
"""

replication_config = grid_config + """
[replication]
acquisition=upb-acq
target utcn=utcn-s1

[ingest]
areas=1 rate_per_day=1

[monitor]
period=600
"""

workload_config = replication_config.replace("areas=1 rate_per_day=1", "areas=1 rate_per_day=4") + """
[workload]
requests_per_day=12 vos=meteo,hydro chain=1
"""


def kinds(event_log:str):
    return [row.split(",")[2] for row in event_log.splitlines()[1:]]


class EventLoopTests(unittest.TestCase):

    def test_time_then_insertion_order(self):
        loop = EventLoop()
        seen = []
        loop.schedule_at(5.0, EventKind.METRIC_PERIOD, lambda: seen.append("b"))
        loop.schedule_at(1.0, EventKind.METRIC_PERIOD, lambda: seen.append("a"))
        loop.schedule_at(5.0, EventKind.METRIC_PERIOD, lambda: seen.append("c"))
        loop.run()
        self.assertEqual(seen, ["a", "b", "c"])
        self.assertEqual(loop.now(), 5.0)

    def test_clock_is_fixed_inside_a_handler(self):
        loop = EventLoop()
        times = []

        def handler():
            times.append(loop.now())
            times.append(loop.now())

        loop.schedule_at(2.5, EventKind.METRIC_PERIOD, handler)
        loop.run()
        self.assertEqual(times, [2.5, 2.5])

    def test_scheduling_in_the_past(self):
        loop = EventLoop()
        loop.schedule_at(10.0, EventKind.METRIC_PERIOD, lambda: loop.schedule_at(5.0, EventKind.METRIC_PERIOD, print))
        with self.assertRaises(SchedulingError):
            loop.run()

    def test_handlers_may_schedule_now(self):
        loop = EventLoop()
        seen = []
        loop.schedule_at(1.0, EventKind.METRIC_PERIOD,
                         lambda: loop.schedule_in(0.0, EventKind.METRIC_PERIOD, lambda: seen.append(loop.now())))
        loop.run()
        self.assertEqual(seen, [1.0])

    def test_cancelled_events_are_not_run_nor_logged(self):
        loop = EventLoop()
        seen = []
        event = loop.schedule_at(1.0, EventKind.RESHARE, lambda: seen.append("x"))
        loop.schedule_at(2.0, EventKind.METRIC_PERIOD, lambda: seen.append("y"))
        loop.cancel(event)
        stats = loop.run()
        self.assertEqual(seen, ["y"])
        self.assertEqual((stats.executed, stats.cancelled, stats.pending), (1, 1, 0))
        self.assertEqual(kinds(loop.event_log()), ["metric-period"])

    def test_event_log_format(self):
        loop = EventLoop()
        loop.schedule_at(1.5, EventKind.GRANULE_ARRIVAL, lambda: None, "A01/1.500")
        loop.run()
        self.assertEqual(loop.event_log(), "time,seq,kind,detail\n1.500000000,0,granule-arrival,A01/1.500\n")
        self.assertEqual(EVENT_LOG_HEADER, ("time", "seq", "kind", "detail"))

    def test_drain_past_the_horizon(self):
        loop = EventLoop(horizon=10.0, drain=True)
        seen = []
        loop.schedule_at(20.0, EventKind.TRANSFER_PROGRESS, lambda: seen.append("transfer"))
        loop.schedule_at(20.0, EventKind.REQUEST_ARRIVAL, lambda: seen.append("request"))
        stats = loop.run()
        self.assertEqual(seen, ["transfer"])
        self.assertEqual((stats.executed, stats.pending), (1, 1))

    def test_hard_stop_at_the_horizon(self):
        loop = EventLoop(horizon=10.0, drain=False)
        loop.schedule_at(10.0, EventKind.METRIC_PERIOD, lambda: None)
        loop.schedule_at(20.0, EventKind.TRANSFER_PROGRESS, lambda: None)
        stats = loop.run()
        self.assertEqual((stats.executed, stats.pending), (1, 1))


class MetricTickerTests(unittest.TestCase):

    def test_ten_minutes_at_one_minute_period(self):
        mediogrid.config.reset()
        topology = mediogrid.load_topology(grid_config)
        loop = EventLoop(horizon=600.0)
        plane = MonitoringPlane()
        ticker = MetricTicker(loop, TransferEngine(loop, topology), plane, 60.0, "mediogrid")
        ticker.start()
        loop.run()
        self.assertEqual(ticker.ticks, 10)
        self.assertEqual(len(plane.repository), 10 * 3 * len(topology.node_names))
        self.assertEqual(sorted({sample.ts for sample in plane.repository}), [60.0 * k for k in range(10)])


class SimConfigTests(unittest.TestCase):

    def setUp(self):
        mediogrid.config.reset()

    def test_sections_are_read(self):
        config = load_sim_config(workload_config, days=2, seed=3)
        self.assertEqual(config.horizon, 2 * 86400.0)
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.policy.targets, {"utcn": "utcn-s1"})
        self.assertEqual(config.schedule.areas, ("A01",))
        self.assertEqual(config.metric_period, 600.0)
        self.assertEqual(config.workload.vos, ("meteo", "hydro"))
        self.assertEqual(config.workload.chain, 1)

    def test_seed_defaults_to_settings(self):
        mediogrid.config.set_seed(99)
        self.assertEqual(load_sim_config(grid_config).seed, 99)
        mediogrid.config.reset()

    def test_invalid_configs(self):
        with self.assertRaises(ValueError):
            load_sim_config(grid_config, days=0)
        with self.assertRaises(ConfigError):
            load_sim_config(grid_config + "\n[ingest]\nareas=1\n")
        with self.assertRaises(ConfigError) as context:
            load_sim_config(grid_config + "\n[replication]\nacquisition=upb-acq\ntarget utcn=upb-c1\n")
        self.assertIsNotNone(context.exception.lineno)
        with self.assertRaises(ConfigError):
            load_sim_config(grid_config + "\n[replication]\nparallelism=4\n")


class RunTests(unittest.TestCase):

    def setUp(self):
        mediogrid.config.reset()

    def test_idle_grid_produces_no_events(self):
        result = run(load_sim_config(grid_config))
        self.assertEqual(result.event_log, "time,seq,kind,detail\n")
        self.assertEqual(result.metric_log, "")
        self.assertEqual(result.catalog_snapshot, "")
        self.assertEqual(result.summary.events_executed, 0)

    def test_single_granule_single_target(self):
        """Assert one granule and one target give one arrival and one completed session"""
        result = run(load_sim_config(replication_config, days=1, seed=42))
        events = kinds(result.event_log)
        self.assertEqual(events.count("granule-arrival"), 1)
        self.assertEqual(events.count("transfer-complete"), 1)
        self.assertEqual(events.count("metric-period"), 144)
        self.assertEqual(result.summary.granules_ingested, 1)
        self.assertEqual(result.summary.channel_files_registered, 36)
        self.assertEqual(len(result.reports), 1)
        self.assertEqual(len(result.catalog), 36)
        for record in result.catalog:
            self.assertEqual(sorted(replica.node for replica in record.replicas), ["upb-acq", "utcn-s1"])
        self.assertEqual(result.summary.bytes_replicated, result.summary.predicted_bytes_per_cluster["utcn"])

    def test_runs_are_reproducible(self):
        first = run(load_sim_config(workload_config, days=1, seed=42))
        second = run(load_sim_config(workload_config, days=1, seed=42))
        self.assertEqual(first.event_log, second.event_log)
        self.assertEqual(first.metric_log, second.metric_log)
        self.assertEqual(first.catalog_snapshot, second.catalog_snapshot)
        self.assertEqual(first.summary, second.summary)
        other = run(load_sim_config(workload_config, days=1, seed=43))
        self.assertNotEqual(first.event_log, other.event_log)

    def test_workload_forks_jobs(self):
        result = run(load_sim_config(workload_config, days=1, seed=42))
        summary = result.summary
        self.assertGreater(summary.requests, 0)
        self.assertEqual(summary.unsatisfiable, 0)
        self.assertEqual(result.jobs.children("job000001"), ["job000001.1"])
        root = job_rollup(result.jobs, result.repository, "job000001", "ftp_in_bytes")
        child = job_rollup(result.jobs, result.repository, "job000001.1", "ftp_in_bytes")
        self.assertGreaterEqual(root, child)
        self.assertGreater(root, 0.0)

    def test_workload_on_replication_targets(self):
        """Assert fetches onto a replication target and the later granule session both land cleanly"""
        config = load_sim_config("""
[cluster upb]
node upb-acq capacity_gb=500 role=acquisition
node upb-s1 capacity_gb=500 role=storage

[cluster utcn]
node utcn-s1 capacity_gb=500 role=storage

[link upb utcn]

[replication]
acquisition=upb-acq
target utcn=utcn-s1

[ingest]
areas=2 rate_per_day=20

[workload]
requests_per_day=400
""", days=1, seed=42)
        result = run(config)
        summary = result.summary
        self.assertEqual(summary.granules_ingested, 40)
        self.assertGreater(summary.fetches, 0)
        for record in result.catalog:
            if ".stage" not in record.lfn:
                self.assertIn("utcn-s1", [replica.node for replica in record.replicas])

    def test_acquisition_node_as_its_own_target(self):
        result = run(load_sim_config(grid_config + """
[replication]
acquisition=upb-acq
target upb=upb-acq
target utcn=utcn-s1

[ingest]
areas=1 rate_per_day=1
""", days=1, seed=42))
        self.assertEqual(result.summary.replication_transfers, 1)
        self.assertEqual(result.summary.predicted_bytes_per_cluster, {"utcn": result.summary.bytes_replicated})
        for record in result.catalog:
            self.assertEqual(sorted(replica.node for replica in record.replicas), ["upb-acq", "utcn-s1"])

    def test_lossy_monitoring_is_counted(self):
        result = run(load_sim_config(replication_config.replace("period=600", "period=600 loss=0.5"), seed=1))
        summary = result.summary
        self.assertGreater(summary.samples_lost, 0)
        self.assertEqual(summary.samples_delivered, len(result.repository))


class ConvenienceTests(unittest.TestCase):

    def test_quick_run_from_a_file(self):
        import os
        import tempfile
        mediogrid.config.reset()
        path = os.path.join(tempfile.mkdtemp(), "grid.conf")
        with open(path, "w") as _file:
            _file.write(replication_config)
        config = mediogrid.quick_load_simulation(path, days=1, seed=5)
        self.assertEqual(config.seed, 5)
        self.assertEqual(mediogrid.config.MEDIOGRID_SEED, 5)
        result = mediogrid.extra.convenience.quick_run(path, seed=5)
        self.assertEqual(result.summary.granules_ingested, 1)
        mediogrid.config.reset()


if __name__ == '__main__':
    unittest.main()
