"""The affine moment invariant A and the multi-component measure M."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateShapeError, OverlappingComponentsError
from .geometry import (
    CentralMoments,
    NormalizedMoments,
    PolygonSet,
    RasterMask,
    exact_moments,
    rasterize_polygon,
)

A_SLACK = 1e-15


def affine_invariant_A(mu: NormalizedMoments) -> float:
    """``mu20 * mu02 - mu11**2``, unchanged by any nonsingular affine map."""
    a = mu.mu20 * mu.mu02 - mu.mu11 * mu.mu11
    if -A_SLACK <= a < 0.0:
        return 0.0
    return a


def component_term(c: CentralMoments) -> float:
    """``M20 * M02 - M11**2``, i.e. ``area**4 * A`` of the same shape."""
    prod = c.M20 * c.M02
    t = prod - c.M11 * c.M11
    if t < 0.0 and t >= -1e-12 * max(1.0, prod):
        return 0.0
    return t


def _exact_A(m) -> Fraction:
    # A from exact moments about any point; the centroid shift cancels exactly
    a, m10, m01, m20, m11, m02 = m
    M20 = m20 - m10 * m10 / a
    M02 = m02 - m01 * m01 / a
    M11 = m11 - m10 * m01 / a
    return (M20 * M02 - M11 * M11) / (a * a * a * a)


def _checked_moments(shape):
    m = exact_moments(shape)
    if not m[0] > 0:
        raise DegenerateShapeError(f"non-positive area {float(m[0])!r}")
    return m


def shape_A(shape) -> float:
    """A of a polygon set or raster, evaluated exactly and rounded once.

    The determinant cancels badly for elongated shapes (such as the image of a
    compact shape under a nearly singular map), so float moments are not enough
    to keep A affine invariant to 1e-10.
    """
    return float(_exact_A(_checked_moments(shape)))


@dataclass(frozen=True, eq=False)
class MultiComponentShape:
    """Ordered, pairwise area-disjoint components of one shape.

    Components are all polygon sets or all raster masks; a component may itself
    be disconnected.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DegenerateShapeError("a multi-component shape needs at least one component")
        kinds = {type(c) for c in comps}
        if len(kinds) != 1 or not kinds <= {PolygonSet, RasterMask}:
            raise TypeError("components must be all PolygonSet or all RasterMask")
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def kind(self) -> type:
        return type(self.components[0])

    def merged(self) -> "MultiComponentShape":
        """The same region re-declared as a single component."""
        if self.kind is PolygonSet:
            rings = tuple(r for c in self.components for r in c.rings)
            return MultiComponentShape((PolygonSet(rings),))
        return MultiComponentShape((_merge_rasters(self.components),))

    def permuted(self, order: Sequence[int]) -> "MultiComponentShape":
        return MultiComponentShape(tuple(self.components[i] for i in order))


def _merge_rasters(masks: Sequence[RasterMask]) -> RasterMask:
    x0 = min(m.origin[0] for m in masks)
    y0 = min(m.origin[1] for m in masks)
    offs = []
    for m in masks:
        dx, dy = m.origin[0] - x0, m.origin[1] - y0
        if dx != int(dx) or dy != int(dy):
            raise ValueError("raster components are not on a common pixel lattice")
        offs.append((int(dx), int(dy)))
    w = max(dx + m.width for (dx, _), m in zip(offs, masks))
    h = max(dy + m.height for (_, dy), m in zip(offs, masks))
    grid = np.zeros((h, w), dtype=bool)
    for (dx, dy), m in zip(offs, masks):
        grid[dy:dy + m.height, dx:dx + m.width] |= m.grid
    return RasterMask(grid, (x0, y0))


@dataclass(frozen=True)
class ComponentEntry:
    area: float
    A: float


@dataclass(frozen=True)
class MeasureReport:
    n: int
    area_total: float
    per_component: tuple
    A_union: float
    M: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "area_total": self.area_total,
            "components": [{"area": c.area, "A": c.A} for c in self.per_component],
            "A_union": self.A_union,
            "M": self.M,
        }

    def to_json(self) -> str:
        from .report import dumps

        return dumps(self.to_dict())


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("MCSHAPE_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def check_overlap(s: MultiComponentShape, resolution: float = 64.0) -> None:
    """Raise if two components claim the same pixel of a shared lattice.

    Polygons are rendered at ``resolution`` pixels per unit against a common
    anchor; rasters are compared pixel-for-pixel.
    """
    if s.n < 2:
        return
    if s.kind is PolygonSet:
        xs = [c.bounds for c in s.components]
        anchor = (min(b[0] for b in xs), min(b[1] for b in xs))
        masks = [rasterize_polygon(c, resolution, anchor) for c in s.components]
    else:
        masks = list(s.components)
    total = sum(m.count for m in masks)
    if _merge_rasters(masks).count != total:
        raise OverlappingComponentsError("components overlap")


def measure_M(s: MultiComponentShape, *, validate_overlap: bool = False,
              overlap_resolution: float = 64.0, threads: int | None = None) -> MeasureReport:
    """Multi-component measure with a per-component breakdown.

    ``M = A(union) - sum_i (area_i / area_total)**4 * A(S_i)``.  Union moments
    are the sum of component moments, so components must not overlap.
    Everything is computed in exact rational arithmetic from the input
    coordinates and rounded once, which makes the result independent of
    component order and of the thread count.
    """
    if validate_overlap:
        check_overlap(s, overlap_resolution)
    comps = s.components
    nt = _threads(threads)
    try:
        if nt > 1 and len(comps) > 1:
            with ThreadPoolExecutor(max_workers=nt) as pool:
                raws = list(pool.map(_checked_moments, comps))
        else:
            raws = [_checked_moments(c) for c in comps]
    except DegenerateShapeError as exc:
        raise DegenerateShapeError(f"degenerate component: {exc}") from exc

    comp_A = [_exact_A(m) for m in raws]
    union = tuple(sum(col) for col in zip(*raws))
    area = union[0]
    a_union = _exact_A(union)
    M = a_union - sum((m[0] / area) ** 4 * A for m, A in zip(raws, comp_A))
    return MeasureReport(
        n=len(comps),
        area_total=float(area),
        per_component=tuple(ComponentEntry(float(m[0]), float(A)) for m, A in zip(raws, comp_A)),
        A_union=float(a_union),
        M=float(M),
    )
