"""Affine-invariant measure for multi-component shapes."""

from .errors import (
    DegenerateHistogramError,
    DegenerateShapeError,
    ImageFormatError,
    MCShapeError,
    NoComponentsError,
    OverlappingComponentsError,
    SingularMapError,
)
from .geometry import (
    AffineMap,
    CentralMoments,
    NormalizedMoments,
    PolygonSet,
    RasterMask,
    RawMoments,
    apply_affine_polygon,
    apply_affine_raster,
    central_from_raw,
    central_moments,
    exact_moments,
    normalized_from_central,
    polygon_raw_moments,
    raster_raw_moments,
    rasterize_polygon,
)
from .invariants import (
    MeasureReport,
    MultiComponentShape,
    affine_invariant_A,
    component_term,
    measure_M,
    shape_A,
)

__version__ = "0.1.0"
