"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: :class:`DataError` -> 2,
:class:`GeometryError` -> 3.
"""


class OvpcError(Exception):
    """Base class for every error raised by this package."""


class DataError(OvpcError):
    """Malformed or non-finite input data (files, clouds)."""


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyCloudError(DataError):
    pass


class OrderingError(DataError):
    """Scan timestamps pushed out of order."""


class GeometryError(OvpcError):
    """Pipeline failure caused by the geometry of the input."""


class SizeError(GeometryError):
    pass


class DegeneracyError(GeometryError):
    def __init__(self, message, dimension=None):
        self.dimension = dimension
        super().__init__(message)


class StructuralError(GeometryError):
    """Inconsistent mesh / label structure."""


class DomainError(GeometryError, ValueError):
    pass


class StateError(OvpcError):
    """Operation invoked on an object in the wrong state (e.g. empty buffer)."""
