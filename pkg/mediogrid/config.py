#  config.py
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

__all__ = ["Config", "ConfigDocument", "parse_document", "CONFIG_SCHEMA"]

import math
import os
import typing
import logging

import jsonschema

from .errors import ConfigError
from .models import MetaConfig
from .utils import logger
from .vars import GIGABYTE, LOOPBACK_MBPS, str2bool

ch = logging.StreamHandler()

ConfigClass = typing.TypeVar('Config')


class Defaults:
    DEBUG_LEVEL:int = int(os.getenv("DEBUG_LEVEL", logging.WARNING))
    MEDIOGRID_SEED:int = int(os.getenv("MEDIOGRID_SEED", 42))
    MEDIOGRID_LOSS_PROBABILITY:float = float(os.getenv("MEDIOGRID_LOSS_PROBABILITY", 0.0))
    MEDIOGRID_METRIC_PERIOD:float = float(os.getenv("MEDIOGRID_METRIC_PERIOD", 60.0))
    MEDIOGRID_LOOPBACK_MBPS:float = float(os.getenv("MEDIOGRID_LOOPBACK_MBPS", LOOPBACK_MBPS))
    MEDIOGRID_DEFAULT_VO:str = os.getenv("MEDIOGRID_DEFAULT_VO", "mediogrid")
    MEDIOGRID_STORAGE_ROOT:str = os.getenv("MEDIOGRID_STORAGE_ROOT", "/storage")
    MONGO_URI:str = os.getenv("MONGO_URI", "mongodb://127.0.0.1:27017/mediogrid")
    MONGO_DB:str = os.getenv("MONGO_DB", "mediogrid")
    MONGO_COLLECTION:str = os.getenv("MONGO_COLLECTION", "rls")


class Config(metaclass=MetaConfig):
    """
        mediogrid settings, loaded initially by environmental variables
    """
    DEBUG_LEVEL:int = Defaults.DEBUG_LEVEL #: The level at which to display information, defaults to logging.warning
    MEDIOGRID_SEED:int = Defaults.MEDIOGRID_SEED #: Run seed used when none is given on the command line
    MEDIOGRID_LOSS_PROBABILITY:float = Defaults.MEDIOGRID_LOSS_PROBABILITY #: Datagram loss between agents and collector
    MEDIOGRID_METRIC_PERIOD:float = Defaults.MEDIOGRID_METRIC_PERIOD #: Seconds between node statistics samples
    MEDIOGRID_LOOPBACK_MBPS:float = Defaults.MEDIOGRID_LOOPBACK_MBPS #: Effective bandwidth of same-node access
    MEDIOGRID_DEFAULT_VO:str = Defaults.MEDIOGRID_DEFAULT_VO #: VO tagged on system metrics and replication traffic
    MEDIOGRID_STORAGE_ROOT:str = Defaults.MEDIOGRID_STORAGE_ROOT #: Path prefix of physical locations
    MONGO_URI:str = Defaults.MONGO_URI #: MongoDB URI for the optional catalog store
    MONGO_DB:str = Defaults.MONGO_DB
    MONGO_COLLECTION:str = Defaults.MONGO_COLLECTION #: Collection holding catalog records

    @classmethod
    def reset(cls) -> None:
        """
            resets config values to the first values assigned when mediogrid was imported
        """
        for attr, value in Defaults.__dict__.items():
            if attr.isupper():
                setattr(cls, attr, value)

    @classmethod
    def set_debug_level(cls, debug_level:int) -> ConfigClass:
        """
            sets debug level of application, default is logging.warning
        """
        assert isinstance(debug_level, int), "debug level must be a valid logging int"
        cls.DEBUG_LEVEL = debug_level
        logger.setLevel(debug_level)
        ch.setLevel(debug_level)
        return cls

    @classmethod
    def set_seed(cls, seed:int) -> ConfigClass:
        assert isinstance(seed, int), "seed must be an integer"
        cls.MEDIOGRID_SEED = seed
        return cls

    @classmethod
    def set_loss_probability(cls, loss:float) -> ConfigClass:
        """
            assigns the datagram loss probability, must lie in [0, 1]
        """
        assert 0.0 <= loss <= 1.0, "loss probability must lie in [0, 1]"
        cls.MEDIOGRID_LOSS_PROBABILITY = float(loss)
        return cls

    @classmethod
    def set_metric_period(cls, period:float) -> ConfigClass:
        assert period > 0, "metric period must be positive"
        cls.MEDIOGRID_METRIC_PERIOD = float(period)
        return cls

    @classmethod
    def reload(cls) -> None:
        """
            Reloads config class values from environment, falls back to current values if none found
        """
        cls.DEBUG_LEVEL = int(os.getenv("DEBUG_LEVEL", cls.DEBUG_LEVEL))
        cls.MEDIOGRID_SEED = int(os.getenv("MEDIOGRID_SEED", cls.MEDIOGRID_SEED))
        cls.MEDIOGRID_LOSS_PROBABILITY = float(os.getenv("MEDIOGRID_LOSS_PROBABILITY", cls.MEDIOGRID_LOSS_PROBABILITY))
        cls.MEDIOGRID_METRIC_PERIOD = float(os.getenv("MEDIOGRID_METRIC_PERIOD", cls.MEDIOGRID_METRIC_PERIOD))
        cls.MEDIOGRID_LOOPBACK_MBPS = float(os.getenv("MEDIOGRID_LOOPBACK_MBPS", cls.MEDIOGRID_LOOPBACK_MBPS))
        cls.MEDIOGRID_DEFAULT_VO = os.getenv("MEDIOGRID_DEFAULT_VO", cls.MEDIOGRID_DEFAULT_VO)
        cls.MEDIOGRID_STORAGE_ROOT = os.getenv("MEDIOGRID_STORAGE_ROOT", cls.MEDIOGRID_STORAGE_ROOT)
        cls.MONGO_URI = os.getenv("MONGO_URI", cls.MONGO_URI)
        cls.MONGO_DB = os.getenv("MONGO_DB", cls.MONGO_DB)
        cls.MONGO_COLLECTION = os.getenv("MONGO_COLLECTION", cls.MONGO_COLLECTION)

    @classmethod
    def reload_from_file(cls, env_path:str=".env", override:bool=False) -> None:
        """
            Re-assign class variables using .env config file
        """
        import dotenv
        dotenv.load_dotenv(dotenv_path=env_path, override=override)
        cls.reload()

    @classmethod
    def reload_from_stream(cls, stream:typing.IO, override:bool=False) -> None:
        """
            Re-assign class variables using stream in .env config format
        """
        import dotenv
        dotenv.load_dotenv(stream=stream, override=override)
        cls.reload()


# INFO: config file grammar

LINK_KEYS = {
    "bandwidth_mbps": float,
    "rtt_ms": float,
    "rtt_s": float,
    "rmax_mbps": float,
    "gamma": float,
    "h": int,
    "hf": int,
    "command_round": int,
    }
NODE_KEYS = {"capacity_gb": int, "capacity_bytes": int, "role": str}

SECTION_KEYS = {
    "cluster": LINK_KEYS,
    "link": LINK_KEYS,
    "defaults": LINK_KEYS,
    "replication": {"acquisition": str, "controller": str, "parallelism": int, "fanout": bool, "vo": str},
    "ingest": {"areas": int, "rate_per_day": int, "size_250m_mb": float,
               "size_500m_mb": float, "size_1km_mb": float, "jitter_seed": int},
    "sched": {"alpha": float, "p_default": int, "policy": str, "io_limit": int,
              "reuse": bool, "pipeline": bool},
    "monitor": {"period": float, "loss": float, "vo": str},
    "workload": {"requests_per_day": int, "vos": list, "chain": int, "intermediate_ratio": float},
    }
SECTION_ARITY = {"cluster": 1, "link": 2}

_LINK_SCHEMA = {
    "type": "object",
    "properties": {
        "bandwidth_mbps": {"type": "number", "exclusiveMinimum": 0},
        "rtt": {"type": "number", "minimum": 0},
        "rmax_mbps": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "minimum": 0},
        "h": {"type": "integer", "minimum": 0},
        "hf": {"type": "integer", "minimum": 0},
        "command_round": {"enum": [0, 1]},
        },
    "additionalProperties": False,
    }

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "clusters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "nodes", "link"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "link": _LINK_SCHEMA,
                    "nodes": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["name", "capacity_bytes", "role"],
                            "properties": {
                                "name": {"type": "string", "minLength": 1},
                                "capacity_bytes": {"type": "integer", "exclusiveMinimum": 0},
                                "role": {"enum": ["acquisition", "storage", "compute"]},
                                },
                            },
                        },
                    },
                },
            },
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["clusters", "link"],
                "properties": {
                    "clusters": {"type": "array", "minItems": 2, "maxItems": 2},
                    "link": _LINK_SCHEMA,
                    },
                },
            },
        "defaults": _LINK_SCHEMA,
        "replication": {
            "type": "object",
            "properties": {
                "parallelism": {"type": "integer", "minimum": 1},
                "targets": {"type": "object", "additionalProperties": {"type": "string"}},
                },
            },
        "ingest": {
            "type": "object",
            "properties": {
                "areas": {"type": "integer", "minimum": 1},
                "rate_per_day": {"type": "integer", "minimum": 1},
                "size_250m_mb": {"type": "number", "exclusiveMinimum": 0},
                "size_500m_mb": {"type": "number", "exclusiveMinimum": 0},
                "size_1km_mb": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        "sched": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "p_default": {"type": "integer", "minimum": 1},
                "policy": {"enum": ["greedy", "cluster_local"]},
                "io_limit": {"type": "integer", "minimum": 1},
                },
            },
        "monitor": {
            "type": "object",
            "properties": {
                "period": {"type": "number", "exclusiveMinimum": 0},
                "loss": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        "workload": {
            "type": "object",
            "properties": {
                "requests_per_day": {"type": "integer", "minimum": 0},
                "chain": {"type": "integer", "minimum": 0},
                "intermediate_ratio": {"type": "number", "exclusiveMinimum": 0},
                "vos": {"type": "array", "items": {"type": "string", "minLength": 1}},
                },
            },
        },
    }


class ConfigDocument(typing.NamedTuple):
    """the parsed config file: plain data plus the line of every key"""
    data: dict
    lines: typing.Dict[tuple, int]

    def line_of(self, *path) -> typing.Optional[int]:
        path = tuple(path)
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return None

    def section(self, name:str) -> dict:
        return self.data.get(name, {})


def _convert(kind, key:str, raw:str, lineno:int):
    try:
        if kind is bool:
            if raw.lower() not in ("on", "off", "true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return str2bool(raw)
        if kind is list:
            return [item for item in raw.split(",") if item]
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return kind(raw)
    except ValueError:
        raise ConfigError("invalid value '{}' for key '{}'".format(raw, key), lineno)


def _split_pair(token:str, lineno:int) -> typing.Tuple[str, str]:
    if "=" not in token:
        raise ConfigError("expected key=value, got '{}'".format(token), lineno)
    key, _, raw = token.partition("=")
    if not key or not raw:
        raise ConfigError("expected key=value, got '{}'".format(token), lineno)
    return key, raw


def _assign(target:dict, keys:dict, token:str, lineno:int, lines:dict, path:tuple) -> None:
    key, raw = _split_pair(token, lineno)
    if key not in keys:
        raise ConfigError("unknown key '{}'".format(key), lineno)
    value = _convert(keys[key], key, raw, lineno)
    # NOTE: alternate spellings collapse onto one canonical field
    if key in ("rtt_ms", "rtt_s"):
        key, value = "rtt", (value / 1000.0 if key == "rtt_ms" else value)
    elif key == "capacity_gb":
        key, value = "capacity_bytes", value * GIGABYTE
    if key in target:
        raise ConfigError("key '{}' given twice".format(key), lineno)
    target[key] = value
    lines[path + (key,)] = lineno


def parse_document(text:str) -> ConfigDocument:
    """
        parses the line-oriented config grammar into a ConfigDocument and
        validates it against CONFIG_SCHEMA

        raises ConfigError carrying the line number of the offending entry
    """
    data = {"clusters": [], "links": []}
    lines = {}
    section = None
    target = None
    path = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue

        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", lineno)
            words = line[1:-1].split()
            if not words:
                raise ConfigError("empty section header", lineno)
            section, args = words[0], words[1:]
            if section not in SECTION_KEYS:
                raise ConfigError("unknown section '{}'".format(section), lineno)
            if len(args) != SECTION_ARITY.get(section, 0):
                raise ConfigError("section '{}' takes {} argument(s)".format(
                                    section, SECTION_ARITY.get(section, 0)), lineno)
            if section == "cluster":
                path = ("clusters", len(data["clusters"]))
                target = {"name": args[0], "nodes": [], "link": {}}
                data["clusters"].append(target)
                lines[path] = lineno
            elif section == "link":
                path = ("links", len(data["links"]))
                target = {"clusters": list(args), "link": {}}
                data["links"].append(target)
                lines[path] = lineno
            else:
                if section in data:
                    raise ConfigError("section '{}' given twice".format(section), lineno)
                path = (section,)
                target = data[section] = {}
                if section == "replication":
                    target["targets"] = {}
                lines[path] = lineno
            continue

        if section is None:
            raise ConfigError("entry outside of any section", lineno)

        tokens = line.split()
        if section == "cluster" and tokens[0] == "node":
            if len(tokens) < 2 or "=" in tokens[1]:
                raise ConfigError("node entry needs a name", lineno)
            node_path = path + ("nodes", len(target["nodes"]))
            node = {"name": tokens[1]}
            lines[node_path] = lineno
            for token in tokens[2:]:
                _assign(node, NODE_KEYS, token, lineno, lines, node_path)
            target["nodes"].append(node)
        elif section == "replication" and tokens[0] == "target":
            if len(tokens) != 2:
                raise ConfigError("target entry looks like 'target <cluster>=<node>'", lineno)
            cluster, node = _split_pair(tokens[1], lineno)
            if cluster in target["targets"]:
                raise ConfigError("target for cluster '{}' given twice".format(cluster), lineno)
            target["targets"][cluster] = node
            lines[path + ("targets", cluster)] = lineno
        elif section in ("cluster", "link"):
            for token in tokens:
                _assign(target["link"], SECTION_KEYS[section], token, lineno, lines, path + ("link",))
        else:
            for token in tokens:
                _assign(target, SECTION_KEYS[section], token, lineno, lines, path)

    document = ConfigDocument(data, lines)
    _validate(document)
    return document


def _validate(document:ConfigDocument) -> None:
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = list(validator.iter_errors(document.data))
    if not errors:
        return
    located = sorted(
        ((document.line_of(*error.absolute_path) or 0, list(error.absolute_path), error.message) for error in errors),
        key=lambda item: (item[0], [str(_) for _ in item[1]]),
        )
    lineno, path, message = located[0]
    field = ".".join(str(_) for _ in path if not isinstance(_, int)) or "config"
    raise ConfigError("{}: {}".format(field, message), lineno or None)


# create formatter
formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger.setLevel(Config.DEBUG_LEVEL)
ch.setLevel(Config.DEBUG_LEVEL)
ch.setFormatter(formatter)
logger.addHandler(ch)
