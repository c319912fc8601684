#  utils.py
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

import hashlib
import logging
import math
import random
import typing

import yaml


logger = logging.getLogger("mediogrid")


def substream(seed: int, label: str) -> random.Random:
    """Returns a generator for one labeled consumer of the run seed.

    Streams of different labels are independent, so adding a consumer never
    shifts the draws of another."""
    digest = hashlib.sha256("{}/{}".format(seed, label).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fmt_time(t: float) -> str:
    return "{:.9f}".format(t)


def fmt_float(value: float) -> str:
    """shortest text that parses back to the same float"""
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def parse_p_range(text: str) -> typing.List[int]:
    """Parses '1..30', '1,5,10' or a mix like '1..4,8'. An empty string is an empty range."""
    values = []
    text = text.strip()
    if not text:
        return values
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            low, high = part.split("..", 1)
            low, high = int(low), int(high)
            if low < 1 or high < low:
                raise ValueError("invalid stream range '{}'".format(part))
            values.extend(range(low, high + 1))
        else:
            value = int(part)
            if value < 1:
                raise ValueError("stream count must be >= 1, got {}".format(value))
            values.append(value)
    return values


def parse_window(text: str) -> typing.Optional[typing.Tuple[float, float]]:
    """Parses 'T0:T1' into a half-open window; 'all' returns None."""
    if text.strip().lower() == "all":
        return None
    try:
        start, end = text.split(":", 1)
        start, end = float(start), float(end)
    except ValueError:
        raise ValueError("window must look like T0:T1, got '{}'".format(text))
    if not (math.isfinite(start) and math.isfinite(end)) or not start < end:
        raise ValueError("window start must be before its end, got '{}'".format(text))
    return (start, end)


def yaml_dump(data: dict) -> str:
    return yaml.safe_dump(data, default_flow_style=False, sort_keys=True)


def yaml_load(data, _file: bool = False) -> dict:
    if _file:
        with open(data, "r") as _f:
            return yaml.safe_load(_f)
    else:
        return yaml.safe_load(data)
