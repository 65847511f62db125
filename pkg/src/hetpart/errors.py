"""Exception hierarchy shared by all modules.

``ValidationError`` maps to CLI exit code 1, ``InfeasibleError`` (and its
subclasses) to exit code 2.
"""


class HetpartError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HetpartError):
    """Malformed or inconsistent input."""


class InfeasibleError(HetpartError):
    """No valid assignment exists under the memory constraints."""


class NonPositiveSpecError(ValidationError):
    """A processing unit has speed or memory <= 0."""


class DivisibilityError(ValidationError):
    """Requested unit count cannot be split into the required groups."""


class EmptyTopologyError(ValidationError):
    """A topology with zero processing units was supplied."""


class TooLargeError(ValidationError):
    """Input exceeds the size bound of an exhaustive routine."""


class FormatError(ValidationError):
    """A structured document does not conform to its file format."""


class EdgeCountMismatchError(FormatError):
    """Graph header edge count disagrees with the adjacency lists."""


class AsymmetricAdjacencyError(FormatError):
    """u lists v as neighbor but not vice versa (or with a different weight)."""


class SelfLoopError(FormatError):
    """A vertex lists itself as a neighbor."""


class DuplicateNeighborError(FormatError):
    """A vertex lists the same neighbor more than once."""


class IndexOutOfRangeError(FormatError):
    """A vertex/block index lies outside the declared range."""


class VertexWeightsUnsupportedError(FormatError):
    """Graph file declares vertex weights/sizes; only unit vertex weights are supported."""


class InfeasibleStartError(InfeasibleError):
    """Refinement received a partition that overloads memory and cannot be repaired."""
