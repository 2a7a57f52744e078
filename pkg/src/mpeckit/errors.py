"""Exception hierarchy.

``InputError`` and its subclasses signal malformed user input (bad files,
bad vectors, inconsistent dimensions) and map to CLI exit code 2.  Every
other ``MpecError`` signals a violated structural assumption discovered
during analysis and maps to exit code 3.  Negative analysis verdicts
(a CQ that fails, a point that is not stationary) are ordinary results,
not exceptions.
"""


class MpecError(Exception):
    """Base class for all toolkit errors."""


class InputError(MpecError):
    """Malformed instance file, point, or command-line argument."""


class DimensionMismatch(InputError):
    pass


class EmptyPolyhedron(MpecError):
    pass


class UnboundedPolytope(MpecError):
    pass


class EnumerationCapExceeded(MpecError):
    pass


class EmptyLowerFeasibleSet(MpecError):
    pass


class InfeasiblePoint(MpecError):
    pass


class EmptyMultiplierSet(MpecError):
    pass


class UnboundedMultiplierSet(MpecError):
    pass


class NoSolution(MpecError):
    pass


class UnsupportedDimension(MpecError):
    pass


class UnsupportedStructure(MpecError):
    pass


class AssumptionViolation(MpecError):
    pass
