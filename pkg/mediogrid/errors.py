#  errors.py
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

__all__ = [
        "MedioGridError", "ConfigError", "TopologyError",
        "CatalogError", "DuplicateEntryError", "UnknownEntryError",
        "TransferError", "CapacityError", "UnsatisfiableRequestError",
        "CodecError", "SourceRegressionError", "UnknownMetricError",
        "JobTreeError", "SchedulingError", "SnapshotError",
        ]

import typing


class MedioGridError(Exception):
    """base class of every error raised by mediogrid"""


class ConfigError(MedioGridError, ValueError):
    """config text could not be parsed or failed validation"""

    def __init__(self, message: str, lineno: typing.Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = "line {}: {}".format(lineno, message)
        super().__init__(message)


class TopologyError(MedioGridError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class CatalogError(MedioGridError): pass


class DuplicateEntryError(CatalogError, ValueError): pass


class UnknownEntryError(CatalogError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class TransferError(MedioGridError, ValueError): pass


class CapacityError(MedioGridError): pass


class UnsatisfiableRequestError(MedioGridError): pass


class CodecError(MedioGridError, ValueError): pass


class SourceRegressionError(MedioGridError, ValueError): pass


class UnknownMetricError(MedioGridError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class JobTreeError(MedioGridError, ValueError): pass


class SchedulingError(MedioGridError):
    """an event was scheduled before the current simulation time"""


class SnapshotError(CatalogError, ValueError):
    """a catalog snapshot line could not be read back"""

    def __init__(self, message: str, lineno: typing.Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = "line {}: {}".format(lineno, message)
        super().__init__(message)
