"""Exception types shared across the package."""


class GeoNNError(Exception):
    """Base class for all errors raised by this package."""


class TooFewVertices(GeoNNError):
    """Polygon input has fewer than three vertices."""


class DegenerateVertex(GeoNNError):
    """Polygon input contains consecutive duplicate vertices."""


class SelfIntersecting(GeoNNError):
    """Polygon boundary crosses itself."""


class PointOutsidePolygon(GeoNNError):
    """A query or site point lies outside the polygon."""


class PointOnBoundary(GeoNNError):
    """A site lies on the polygon boundary where it is not allowed."""


class IndexOutOfRange(GeoNNError, IndexError):
    """Index past the end of a path or bisector vertex sequence."""


class DegenerateGeometry(GeoNNError):
    """Input configuration violates a non-degeneracy precondition."""


class GeneralPositionViolation(GeoNNError):
    """Two sites are equidistant (beyond tolerance) where a strict order is required."""


class Tie(GeoNNError):
    """A nearest-neighbor decision could not be resolved within tolerance."""


class DuplicateId(GeoNNError):
    """Insert with an id that is already live."""


class UnknownId(GeoNNError):
    """Delete of an id that is not live."""


class UnsupportedInMode(GeoNNError):
    """Operation not available in the structure's update mode."""


class EmptyStructure(GeoNNError):
    """Query against a structure holding no live sites."""


class MalformedTimeline(GeoNNError):
    """Offline op sequence is inconsistent (delete without insert, duplicate ids)."""
