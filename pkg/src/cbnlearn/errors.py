"""Exception types raised across the package."""


class CbnError(Exception):
    """Base class for all package errors."""


class CyclicGraph(CbnError):
    pass


class UnknownVariable(CbnError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LatentWithParents(CbnError):
    pass


class InvalidModel(CbnError, ValueError):
    """Malformed diagram, CPT, query or model file."""


class CardinalityMismatch(CbnError, ValueError):
    pass


class StateOutOfRange(CbnError, IndexError):
    pass


class ScopeNotCovered(CbnError):
    pass


class ZeroProbabilityEvidence(CbnError, ZeroDivisionError):
    pass


class TooLarge(CbnError, MemoryError):
    pass


class UnsupportedSize(CbnError, ValueError):
    pass


class DegenerateData(CbnError, ValueError):
    pass


class ShapeMismatch(CbnError, ValueError):
    pass


class ParseError(CbnError, ValueError):
    pass
