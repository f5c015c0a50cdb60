"""Dynamic geodesic nearest-neighbor searching in a static simple polygon."""

from .errors import (
    DegenerateGeometry,
    DegenerateVertex,
    DuplicateId,
    EmptyStructure,
    GeneralPositionViolation,
    GeoNNError,
    IndexOutOfRange,
    MalformedTimeline,
    PointOnBoundary,
    PointOutsidePolygon,
    SelfIntersecting,
    Tie,
    TooFewVertices,
    UnknownId,
    UnsupportedInMode,
)
from .geometry import (
    DecompositionNode,
    Diagonal,
    Point,
    Polygon,
    ToleranceConfig,
    balanced_decomposition,
    orientation,
    triangulate,
    validate_polygon,
)

__all__ = [
    "DecompositionNode",
    "Diagonal",
    "Point",
    "Polygon",
    "ToleranceConfig",
    "balanced_decomposition",
    "orientation",
    "triangulate",
    "validate_polygon",
    "GeoNNError",
    "SelfIntersecting",
    "DegenerateVertex",
    "TooFewVertices",
    "PointOutsidePolygon",
    "PointOnBoundary",
    "IndexOutOfRange",
    "DegenerateGeometry",
    "GeneralPositionViolation",
    "Tie",
    "DuplicateId",
    "UnknownId",
    "UnsupportedInMode",
    "EmptyStructure",
    "MalformedTimeline",
]

__version__ = "0.1.0"
