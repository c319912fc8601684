#  harness.py
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
Command line entry point.

::

    mediogrid simulate --config F --days N --seed S --out DIR [--no-drain]
    mediogrid experiment inter|intra --config F --p 1..30 --splits canonical|paper-literal
                         --reuse on|off --pipeline on|off --engine closed|event --workers N --out CSV
    mediogrid report --log F --metric M --group-by node|vo|cluster --window T0:T1|all --agg sum|avg|rate|count|max
    mediogrid catalog dump --snapshot F [--format tsv|yaml]
    mediogrid catalog push --snapshot F / catalog pull --out F

Exit status is 0 on success, 2 on a usage error and 1 when the run fails.
"""
__all__ = [
        "DatasetSplit", "ExperimentRow", "ExperimentResult", "CANONICAL_SPLITS", "LITERAL_SPLITS",
        "SPLIT_SETS", "EXPERIMENT_HEADER", "validate_splits", "experiment_inter", "experiment_intra",
        "simulate", "report", "build_parser", "main",
        ]

import argparse
import logging
import math
import os
import sys
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .catalog import PhysicalLocation, ReplicaCatalog
from .config import Config, parse_document
from .errors import MedioGridError, TopologyError
from .monitor import METRICS, AccountingQuery, MetricRepository, accounting, accounting_csv
from .simcore import EventLoop, load_sim_config, run
from .topology import GridTopology, load_topology, resolve_link
from .transfer import FileSlice, TransferEngine, TransferOptions, TransferSpec, estimate_time
from .utils import logger, parse_p_range, parse_window, yaml_dump
from .vars import CSV, MEGABYTE, NODE_ID, Aggregation, GroupBy, megabits, str2bool

EXPERIMENT_HEADER = "dataset,p,seconds,throughput_mbps"
DATASET_BYTES = 500 * MEGABYTE

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class DatasetSplit:
    label: str
    file_count: int
    file_size: int #: bytes

    @property
    def total(self) -> int:
        return self.file_count * self.file_size

    def files(self) -> typing.Tuple[FileSlice, ...]:
        return tuple(FileSlice("experiment/{}/f{:03d}".format(self.label, index), self.file_size)
                     for index in range(1, self.file_count + 1))


def _split(count:int, size_mb:int) -> DatasetSplit:
    return DatasetSplit("{}x{}MB".format(count, size_mb), count, size_mb * MEGABYTE)


CANONICAL_SPLITS = (_split(1, 500), _split(5, 100), _split(10, 50), _split(50, 10), _split(100, 5))
# NOTE: 10x10MB here does not add up to 500 MB
LITERAL_SPLITS = (_split(1, 500), _split(5, 100), _split(10, 10), _split(50, 10), _split(100, 5))
SPLIT_SETS = {"canonical": CANONICAL_SPLITS, "paper-literal": LITERAL_SPLITS, "literal": LITERAL_SPLITS}


def validate_splits(splits:typing.Iterable[DatasetSplit], total:int=DATASET_BYTES) -> None:
    for split in splits:
        if split.total != total:
            raise ValueError("dataset {} holds {} bytes, expected {}".format(split.label, split.total, total))


@dataclass(frozen=True)
class ExperimentRow:
    dataset: str
    p: int
    seconds: float
    throughput_mbps: float


class ExperimentResult(typing.NamedTuple):
    rows: typing.List[ExperimentRow]

    def csv(self) -> CSV:
        lines = [EXPERIMENT_HEADER]
        for row in self.rows:
            lines.append("{},{},{:.9f},{:.9f}".format(row.dataset, row.p, row.seconds, row.throughput_mbps))
        return "\n".join(lines) + "\n"

    def best_p(self, dataset:str) -> int:
        """parallelism with the shortest time for a dataset, the lowest p on ties"""
        rows = [row for row in self.rows if row.dataset == dataset]
        return min(rows, key=lambda row: (row.seconds, row.p)).p


def _measure(task:tuple) -> ExperimentRow:
    topology, source, dest, split, p, options, engine = task
    spec = TransferSpec(PhysicalLocation(source, "/experiment"), dest, split.files(), p, options)
    if engine == "event":
        loop = EventLoop()
        transfer = TransferEngine(loop, topology).execute(spec)
        loop.run()
        seconds = transfer.report.duration
    else:
        seconds = estimate_time(spec, resolve_link(topology, source, dest))
    return ExperimentRow(split.label, p, seconds, megabits(spec.bytes) / seconds)


def _sweep(topology:GridTopology, source:NODE_ID, dest:NODE_ID, p_range:typing.Iterable[int],
           splits:typing.Iterable[DatasetSplit], options:TransferOptions, engine:str, workers:int) -> ExperimentResult:
    assert engine in ("closed", "event"), "engine is closed or event"
    tasks = [(topology, source, dest, split, p, options, engine) for split in splits for p in p_range]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_measure, tasks))
    else:
        rows = [_measure(task) for task in tasks]
    return ExperimentResult(rows)


def experiment_inter(topology:GridTopology, p_range:typing.Iterable[int],
                     splits:typing.Iterable[DatasetSplit]=CANONICAL_SPLITS,
                     options:TransferOptions=TransferOptions(), engine:str="closed", workers:int=1) -> ExperimentResult:
    """sweeps every split over p between the first nodes of the first two clusters"""
    if len(topology.clusters) < 2:
        raise TopologyError("the inter-cluster experiment needs at least two clusters")
    source = topology.clusters[0].nodes[0].name
    dest = topology.clusters[1].nodes[0].name
    return _sweep(topology, source, dest, p_range, splits, options, engine, workers)


def experiment_intra(topology:GridTopology, p_range:typing.Iterable[int],
                     splits:typing.Iterable[DatasetSplit]=CANONICAL_SPLITS,
                     options:TransferOptions=TransferOptions(), engine:str="closed", workers:int=1) -> ExperimentResult:
    """sweeps every split over p between two nodes of the first cluster that has two"""
    for cluster in topology.clusters:
        if len(cluster.nodes) >= 2:
            return _sweep(topology, cluster.nodes[0].name, cluster.nodes[1].name, p_range, splits, options, engine, workers)
    raise TopologyError("the intra-cluster experiment needs a cluster with at least two nodes")


def _read(path:str) -> str:
    with open(path, "r") as _file:
        return _file.read()


def _write(path:str, text:str) -> None:
    with open(path, "w", newline="") as _file:
        _file.write(text)


def simulate(config_path:str, days:int, seed:typing.Optional[int], out_dir:str, drain:bool=True) -> int:
    config = load_sim_config(_read(config_path), days, seed, drain)
    result = run(config)
    os.makedirs(out_dir, exist_ok=True)
    _write(os.path.join(out_dir, "events.csv"), result.event_log)
    _write(os.path.join(out_dir, "metrics.log"), result.metric_log)
    _write(os.path.join(out_dir, "catalog.tsv"), result.catalog_snapshot)
    _write(os.path.join(out_dir, "summary.yaml"), str(result.summary))
    logger.info("wrote simulation output to {}".format(out_dir))
    return EXIT_OK


def report(log_path:str, metric:str, group_by:GroupBy=GroupBy.NODE,
           window:typing.Optional[typing.Tuple[float, float]]=None, agg:Aggregation=Aggregation.SUM,
           topology:typing.Optional[GridTopology]=None) -> CSV:
    """accounting CSV over a metric log; no window means the whole log"""
    repository = MetricRepository.load(log_path)
    query = AccountingQuery(metric, group_by, window or (0.0, math.inf), agg)
    return accounting_csv(accounting(repository, query, topology), query)


def _catalog_yaml(catalog:ReplicaCatalog) -> str:
    return yaml_dump({"records": [
                {
                    "lfn": record.lfn,
                    "collection": record.collection,
                    "size": record.size,
                    "replicas": [str(location) for location in record.locations],
                }
                for record in catalog
            ]})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mediogrid", description="MedioGRID data grid simulator")
    parser.add_argument("--env", help=".env file with mediogrid settings")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug information")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="run ingest, replication and workload for some days")
    sim.add_argument("--config", required=True)
    sim.add_argument("--days", type=int, default=1)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", required=True)
    sim.add_argument("--no-drain", dest="drain", action="store_false",
                     help="stop transfers at the horizon instead of letting them finish")

    exp = commands.add_parser("experiment", help="sweep transfer time over parallelism and dataset splits")
    exp.add_argument("scope", choices=("inter", "intra"))
    exp.add_argument("--config", required=True)
    exp.add_argument("--p", default="1..30")
    exp.add_argument("--splits", choices=sorted(SPLIT_SETS), default="canonical")
    exp.add_argument("--reuse", choices=("on", "off"), default="on")
    exp.add_argument("--pipeline", choices=("on", "off"), default="on")
    exp.add_argument("--engine", choices=("closed", "event"), default="closed")
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--out", default=None, help="CSV file, standard output when left out")

    rep = commands.add_parser("report", help="accounting over a metric log")
    rep.add_argument("--log", required=True)
    rep.add_argument("--metric", required=True)
    rep.add_argument("--group-by", choices=[_.value for _ in GroupBy], default=GroupBy.NODE.value)
    rep.add_argument("--window", default="all")
    rep.add_argument("--agg", choices=[_.value for _ in Aggregation], default=Aggregation.SUM.value)
    rep.add_argument("--config", default=None, help="topology, needed to group by cluster")

    cat = commands.add_parser("catalog", help="catalog snapshots")
    cat_commands = cat.add_subparsers(dest="action", required=True)
    dump = cat_commands.add_parser("dump")
    dump.add_argument("--snapshot", required=True)
    dump.add_argument("--format", choices=("tsv", "yaml"), default="tsv")
    push = cat_commands.add_parser("push", help="store a snapshot in MongoDB")
    push.add_argument("--snapshot", required=True)
    push.add_argument("--mongo-uri", default=None)
    pull = cat_commands.add_parser("pull", help="write the catalog held in MongoDB as a snapshot")
    pull.add_argument("--out", required=True)
    pull.add_argument("--mongo-uri", default=None)
    return parser


def _run_experiment(args) -> int:
    try:
        p_range = parse_p_range(args.p)
    except ValueError as error:
        logger.error(str(error))
        return EXIT_USAGE
    if args.workers < 1:
        logger.error("--workers must be >= 1")
        return EXIT_USAGE
    splits = SPLIT_SETS[args.splits]
    if splits is not CANONICAL_SPLITS:
        logger.warning("using the literal split list; not every dataset holds 500 MB")
    topology = load_topology(parse_document(_read(args.config)))
    options = TransferOptions(str2bool(args.reuse), str2bool(args.pipeline))
    sweep = experiment_inter if args.scope == "inter" else experiment_intra
    result = sweep(topology, p_range, splits, options, args.engine, args.workers)
    if args.out:
        _write(args.out, result.csv())
    else:
        sys.stdout.write(result.csv())
    return EXIT_OK


def _run_report(args) -> int:
    try:
        window = parse_window(args.window)
    except ValueError as error:
        logger.error(str(error))
        return EXIT_USAGE
    if args.metric not in METRICS:
        logger.error("unknown metric '{}'".format(args.metric))
        return EXIT_USAGE
    if window is None and args.agg == Aggregation.RATE.value:
        logger.error("a rate needs an explicit --window T0:T1")
        return EXIT_USAGE
    topology = None
    if args.group_by == GroupBy.CLUSTER.value:
        if args.config is None:
            logger.error("grouping by cluster needs --config")
            return EXIT_USAGE
        topology = load_topology(parse_document(_read(args.config)))
    sys.stdout.write(report(args.log, args.metric, GroupBy(args.group_by), window, Aggregation(args.agg), topology))
    return EXIT_OK


def _run_catalog(args) -> int:
    if args.action == "dump":
        catalog = ReplicaCatalog.restore(_read(args.snapshot))
        sys.stdout.write(catalog.snapshot() if args.format == "tsv" else _catalog_yaml(catalog))
        return EXIT_OK
    from .extra.store import MongoCatalogStore
    store = MongoCatalogStore(args.mongo_uri)
    if args.action == "push":
        store.save(ReplicaCatalog.restore(_read(args.snapshot)))
    else:
        _write(args.out, store.load().snapshot())
    return EXIT_OK


def main(argv:typing.Optional[typing.List[str]]=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_OK if error.code == 0 else EXIT_USAGE

    if args.env:
        Config.reload_from_file(args.env, override=True)
    if args.verbose:
        Config.set_debug_level(logging.DEBUG)
    validate_splits(CANONICAL_SPLITS)

    try:
        if args.command == "simulate":
            if args.days < 1:
                logger.error("--days must be >= 1")
                return EXIT_USAGE
            return simulate(args.config, args.days, args.seed, args.out, args.drain)
        if args.command == "experiment":
            return _run_experiment(args)
        if args.command == "report":
            return _run_report(args)
        return _run_catalog(args)
    except (MedioGridError, OSError, ValueError, KeyError) as error:
        logger.error("{}: {}".format(type(error).__name__, error))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
