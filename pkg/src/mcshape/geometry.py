"""Shape representations and exact moments up to order two.

Coordinates follow image convention: x grows to the right (columns), y grows
downward (rows), origin at the grid corner.  A raster pixel ``(i, j)`` is the
closed unit square ``[x0 + i, x0 + i + 1] x [y0 + j, y0 + j + 1]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateShapeError, SingularMapError

# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


def _as_ring(vertices) -> np.ndarray:
    ring = np.array(vertices, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise ValueError("a ring must be a sequence of (x, y) pairs")
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]  # explicit closing vertex
    if len(ring) < 3:
        raise DegenerateShapeError("a ring needs at least 3 distinct vertices")
    if not np.all(np.isfinite(ring)):
        raise ValueError("ring vertices must be finite")
    ring.setflags(write=False)
    return ring


def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise rings (in x/y axes order)."""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * math.fsum(x * np.roll(y, -1) - np.roll(x, -1) * y)


@dataclass(frozen=True, eq=False)
class PolygonSet:
    """A planar region bounded by one or more closed rings.

    Outer rings run counter-clockwise, holes clockwise; the region's moments are
    the signed sums of the ring contributions.
    """

    rings: tuple

    def __post_init__(self):
        rings = tuple(_as_ring(r) for r in self.rings)
        if not rings:
            raise DegenerateShapeError("a polygon set needs at least one ring")
        object.__setattr__(self, "rings", rings)

    @classmethod
    def from_vertices(cls, *rings) -> "PolygonSet":
        return cls(tuple(rings))

    @property
    def signed_area(self) -> float:
        return math.fsum(ring_signed_area(r) for r in self.rings)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        pts = np.vstack(self.rings)
        return (float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))

    @property
    def n_vertices(self) -> int:
        return sum(len(r) for r in self.rings)

    def to_json_obj(self) -> dict:
        return {"rings": [r.tolist() for r in self.rings]}

    def __eq__(self, other):
        if not isinstance(other, PolygonSet):
            return NotImplemented
        if len(self.rings) != len(other.rings):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.rings, other.rings))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RasterMask:
    """Boolean occupancy grid, row-major ``grid[row, col]``, placed at ``origin``."""

    grid: np.ndarray
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=bool)
        if grid.ndim != 2:
            raise ValueError("raster grid must be two-dimensional")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.grid))

    def pixel_centers(self) -> np.ndarray:
        """(N, 2) array of occupied pixel centers in row-major order."""
        rows, cols = np.nonzero(self.grid)
        return np.column_stack([self.origin[0] + cols + 0.5, self.origin[1] + rows + 0.5])

    def __eq__(self, other):
        if not isinstance(other, RasterMask):
            return NotImplemented
        return self.origin == other.origin and np.array_equal(self.grid, other.grid)

    __hash__ = None


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawMoments:
    """Geometric moments up to order two, taken about ``reference``.

    With the default reference ``(0, 0)`` these are the plain moments
    ``m_pq = integral of x^p y^q``.
    """

    m00: float
    m10: float
    m01: float
    m20: float
    m11: float
    m02: float
    reference: tuple = field(default=(0.0, 0.0))

    def about(self, reference: Sequence[float]) -> "RawMoments":
        """Re-express the moments about another reference point (parallel-axis shift)."""
        rx, ry = float(reference[0]), float(reference[1])
        dx = self.reference[0] - rx
        dy = self.reference[1] - ry
        if dx == 0.0 and dy == 0.0:
            return RawMoments(self.m00, self.m10, self.m01, self.m20, self.m11, self.m02, (rx, ry))
        m00 = self.m00
        return RawMoments(
            m00,
            self.m10 + dx * m00,
            self.m01 + dy * m00,
            math.fsum([self.m20, 2.0 * dx * self.m10, dx * dx * m00]),
            math.fsum([self.m11, dx * self.m01, dy * self.m10, dx * dy * m00]),
            math.fsum([self.m02, 2.0 * dy * self.m01, dy * dy * m00]),
            (rx, ry),
        )


def sum_raw_moments(parts: Iterable[RawMoments], reference: Sequence[float]) -> RawMoments:
    """Moments of a disjoint union; correctly rounded, so independent of order."""
    shifted = [p.about(reference) for p in parts]
    if not shifted:
        raise DegenerateShapeError("no parts to sum")
    return RawMoments(
        *(math.fsum(getattr(p, k) for p in shifted) for k in ("m00", "m10", "m01", "m20", "m11", "m02")),
        reference=(float(reference[0]), float(reference[1])),
    )


@dataclass(frozen=True)
class CentralMoments:
    a: float
    xc: float
    yc: float
    M20: float
    M11: float
    M02: float


@dataclass(frozen=True)
class NormalizedMoments:
    mu20: float
    mu11: float
    mu02: float


ExactMoments = tuple  # (m00, m10, m01, m20, m11, m02) as Fractions


def _dyadic(values: Sequence[float]) -> tuple[list[int], int]:
    """Integers ``N`` and a shift ``k`` with ``values[i] == N[i] / 2**k`` exactly."""
    ratios = [float(v).as_integer_ratio() for v in values]
    k = max(d.bit_length() - 1 for _, d in ratios)
    return [n << (k - d.bit_length() + 1) for n, d in ratios], k


def _shift_exact(m: ExactMoments, u: tuple[Fraction, Fraction]) -> ExactMoments:
    """Moments taken in coordinates relative to ``u``, re-expressed about (0, 0)."""
    m00, m10, m01, m20, m11, m02 = m
    ux, uy = u
    return (
        m00,
        m10 + ux * m00,
        m01 + uy * m00,
        m20 + 2 * ux * m10 + ux * ux * m00,
        m11 + ux * m01 + uy * m10 + ux * uy * m00,
        m02 + 2 * uy * m01 + uy * uy * m00,
    )


def _polygon_exact(p: PolygonSet) -> ExactMoments:
    # Green's theorem over every edge, on the exact dyadic values of the vertices
    ints, k = _dyadic(np.concatenate(p.rings).ravel().tolist())
    s0 = s1 = s2 = s3 = s4 = s5 = 0
    pos = 0
    for ring in p.rings:
        n = len(ring)
        xs = ints[2 * pos:2 * (pos + n):2]
        ys = ints[2 * pos + 1:2 * (pos + n):2]
        pos += n
        for x0, y0, x1, y1 in zip(xs, ys, xs[1:] + xs[:1], ys[1:] + ys[:1]):
            c = x0 * y1 - x1 * y0
            s0 += c
            s1 += (x0 + x1) * c
            s2 += (y0 + y1) * c
            s3 += (x0 * x0 + x0 * x1 + x1 * x1) * c
            s4 += (x0 * y1 + 2 * x0 * y0 + 2 * x1 * y1 + x1 * y0) * c
            s5 += (y0 * y0 + y0 * y1 + y1 * y1) * c
    d2, d3, d4 = 1 << 2 * k, 1 << 3 * k, 1 << 4 * k
    return (Fraction(s0, 2 * d2), Fraction(s1, 6 * d3), Fraction(s2, 6 * d3),
            Fraction(s3, 12 * d4), Fraction(s4, 24 * d4), Fraction(s5, 12 * d4))


def _raster_exact(r: RasterMask) -> ExactMoments:
    grid = r.grid
    rows_any = np.flatnonzero(grid.any(axis=1))
    cols_any = np.flatnonzero(grid.any(axis=0))
    if rows_any.size == 0:
        raise DegenerateShapeError("raster mask has no occupied pixels")
    j0, j1 = int(rows_any[0]), int(rows_any[-1]) + 1
    i0, i1 = int(cols_any[0]), int(cols_any[-1]) + 1
    sub = grid[j0:j1, i0:i1]

    col_counts = sub.sum(axis=0, dtype=np.int64).tolist()
    row_counts = sub.sum(axis=1, dtype=np.int64).tolist()
    idx_i = np.arange(sub.shape[1], dtype=np.int64)
    row_isum = (sub.astype(np.int64) @ idx_i).tolist()  # per row: sum of column indices

    n = sum(col_counts)
    si = sum(i * c for i, c in enumerate(col_counts))
    sii = sum(i * i * c for i, c in enumerate(col_counts))
    sj = sum(j * c for j, c in enumerate(row_counts))
    sjj = sum(j * j * c for j, c in enumerate(row_counts))
    sij = sum(j * s for j, s in enumerate(row_isum))

    # integral over [i, i+1]: x -> i + 1/2, x^2 -> i^2 + i + 1/3
    local = (Fraction(n), Fraction(2 * si + n, 2), Fraction(2 * sj + n, 2),
             Fraction(3 * (sii + si) + n, 3), Fraction(4 * sij + 2 * (si + sj) + n, 4),
             Fraction(3 * (sjj + sj) + n, 3))
    corner = (Fraction(r.origin[0]) + i0, Fraction(r.origin[1]) + j0)
    return _shift_exact(local, corner)


def exact_moments(shape) -> ExactMoments:
    """``(m00, m10, m01, m20, m11, m02)`` about (0, 0) as exact rationals.

    Float coordinates are taken at their exact binary values, so the only
    rounding left is whatever the caller does with the result.
    """
    if isinstance(shape, PolygonSet):
        return _polygon_exact(shape)
    if isinstance(shape, RasterMask):
        return _raster_exact(shape)
    raise TypeError(f"unsupported shape type {type(shape).__name__}")


def _rounded(m: ExactMoments, reference: Sequence[float]) -> RawMoments:
    rx, ry = float(reference[0]), float(reference[1])
    shifted = _shift_exact(m, (-Fraction(rx), -Fraction(ry)))
    return RawMoments(*(float(v) for v in shifted), reference=(rx, ry))


def polygon_raw_moments(p: PolygonSet, reference: Sequence[float] = (0.0, 0.0)) -> RawMoments:
    """Moments of the region bounded by ``p.rings`` about ``reference``, correctly rounded."""
    m = _polygon_exact(p)
    if not m[0] > 0:
        raise DegenerateShapeError(f"polygon has non-positive net area {float(m[0])!r}")
    return _rounded(m, reference)


def raster_raw_moments(r: RasterMask, reference: Sequence[float] = (0.0, 0.0)) -> RawMoments:
    """Moments of the union of occupied unit squares about ``reference``, correctly rounded.

    Every pixel contributes the integral of x^p y^q over its square; index sums
    are accumulated as Python integers.
    """
    return _rounded(_raster_exact(r), reference)


def raw_moments(shape, reference: Sequence[float] = (0.0, 0.0)) -> RawMoments:
    if isinstance(shape, PolygonSet):
        return polygon_raw_moments(shape, reference)
    if isinstance(shape, RasterMask):
        return raster_raw_moments(shape, reference)
    raise TypeError(f"unsupported shape type {type(shape).__name__}")


def shape_corner(shape) -> tuple[float, float]:
    """Lower-left (min x, min y) corner of a shape's extent."""
    if isinstance(shape, PolygonSet):
        b = shape.bounds
        return b[0], b[1]
    return shape.origin


def central_from_raw(m: RawMoments) -> CentralMoments:
    if not m.m00 > 0.0:
        raise DegenerateShapeError(f"non-positive area {m.m00!r}")
    a = m.m00
    dx = m.m10 / a
    dy = m.m01 / a
    M20 = m.m20 - m.m10 * dx
    M02 = m.m02 - m.m01 * dy
    M11 = m.m11 - m.m10 * dy
    # rounding can push a vanishing variance a few ulps below zero
    return CentralMoments(a, m.reference[0] + dx, m.reference[1] + dy,
                          max(M20, 0.0), M11, max(M02, 0.0))


def central_moments(shape) -> CentralMoments:
    """Central moments of a polygon set or raster, conditioned about its own corner."""
    return central_from_raw(raw_moments(shape, shape_corner(shape)))


def normalized_from_central(c: CentralMoments) -> NormalizedMoments:
    if not c.a > 0.0:
        raise DegenerateShapeError(f"non-positive area {c.a!r}")
    a2 = c.a * c.a
    return NormalizedMoments(c.M20 / a2, c.M11 / a2, c.M02 / a2)


# ---------------------------------------------------------------------------
# Affine maps
# ---------------------------------------------------------------------------

SINGULAR_DET = 1e-12


@dataclass(frozen=True)
class AffineMap:
    """``(x, y) -> (j11 x + j12 y + tx, j21 x + j22 y + ty)``."""

    j11: float
    j12: float
    j21: float
    j22: float
    tx: float = 0.0
    ty: float = 0.0

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineMap":
        return cls(1.0, 0.0, 0.0, 1.0, tx, ty)

    @classmethod
    def scaling(cls, sx: float, sy: float | None = None) -> "AffineMap":
        return cls(sx, 0.0, 0.0, sx if sy is None else sy)

    @classmethod
    def rotation(cls, theta: float) -> "AffineMap":
        c, s = math.cos(theta), math.sin(theta)
        return cls(c, -s, s, c)

    @property
    def det(self) -> float:
        return self.j11 * self.j22 - self.j12 * self.j21

    def check(self) -> None:
        if not abs(self.det) > SINGULAR_DET:
            raise SingularMapError(f"affine map is singular (det={self.det!r})")

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([self.j11 * x + self.j12 * y + self.tx,
                         self.j21 * x + self.j22 * y + self.ty], axis=-1)

    def inverse(self) -> "AffineMap":
        self.check()
        d = self.det
        i11, i12, i21, i22 = self.j22 / d, -self.j12 / d, -self.j21 / d, self.j11 / d
        return AffineMap(i11, i12, i21, i22,
                         -(i11 * self.tx + i12 * self.ty),
                         -(i21 * self.tx + i22 * self.ty))

    def then(self, other: "AffineMap") -> "AffineMap":
        """Composition: apply ``self`` first, then ``other``."""
        o = other
        return AffineMap(
            o.j11 * self.j11 + o.j12 * self.j21, o.j11 * self.j12 + o.j12 * self.j22,
            o.j21 * self.j11 + o.j22 * self.j21, o.j21 * self.j12 + o.j22 * self.j22,
            o.j11 * self.tx + o.j12 * self.ty + o.tx, o.j21 * self.tx + o.j22 * self.ty + o.ty,
        )


def apply_affine_polygon(p: PolygonSet, t: AffineMap) -> PolygonSet:
    """Map every vertex; orientation-reversing maps also reverse ring order."""
    t.check()
    flip = t.det < 0
    rings = []
    for ring in p.rings:
        mapped = t.apply(ring)
        rings.append(mapped[::-1] if flip else mapped)
    return PolygonSet(tuple(rings))


def apply_affine_raster(r: RasterMask, t: AffineMap, out_width: int, out_height: int,
                        out_origin: Sequence[float] = (0.0, 0.0)) -> RasterMask:
    """Nearest-neighbour resampling of ``r`` under ``t`` by inverse mapping.

    Each output pixel is occupied iff the preimage of its center falls in an
    occupied source pixel.  This is an approximation; affine invariance is
    exact only on the polygon path.
    """
    inv = t.inverse()
    if out_width < 1 or out_height < 1:
        raise ValueError("output raster must be at least 1x1")
    jj, ii = np.mgrid[0:out_height, 0:out_width]
    centers = np.stack([out_origin[0] + ii + 0.5, out_origin[1] + jj + 0.5], axis=-1)
    src = inv.apply(centers)
    si = np.floor(src[..., 0] - r.origin[0]).astype(np.int64)
    sj = np.floor(src[..., 1] - r.origin[1]).astype(np.int64)
    inside = (si >= 0) & (si < r.width) & (sj >= 0) & (sj < r.height)
    out = np.zeros((out_height, out_width), dtype=bool)
    out[inside] = r.grid[sj[inside], si[inside]]
    if not out.any():
        raise DegenerateShapeError("affine image of the raster is empty in the output frame")
    return RasterMask(out, (float(out_origin[0]), float(out_origin[1])))


# ---------------------------------------------------------------------------
# Point membership and rasterization
# ---------------------------------------------------------------------------

_BRUTE_EDGE_LIMIT = 64


def points_in_polygon(p: PolygonSet, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Even-odd membership of points ``(x, y)`` in ``p`` (holes excluded).

    Uses the half-open crossing rule ``ylo <= y < yhi`` so that points on shared
    horizontal boundaries are assigned to exactly one side.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    edges = []
    for ring in p.rings:
        nxt = np.roll(ring, -1, axis=0)
        keep = ring[:, 1] != nxt[:, 1]
        edges.append(np.hstack([ring[keep], nxt[keep]]))
    e = np.vstack(edges)
    inside = np.zeros(x.shape, dtype=bool)
    if len(e) <= _BRUTE_EDGE_LIMIT:
        for x1, y1, x2, y2 in e:
            ylo, yhi = (y1, y2) if y1 < y2 else (y2, y1)
            xi = x1 + (y - y1) * ((x2 - x1) / (y2 - y1))
            inside ^= (y >= ylo) & (y < yhi) & (x < xi)
        return inside
    # many edges: sort points by y so each edge touches one contiguous slice
    order = np.argsort(y, kind="stable")
    ys, xs = y[order], x[order]
    flags = np.zeros(x.shape, dtype=bool)
    ylo = np.minimum(e[:, 1], e[:, 3])
    yhi = np.maximum(e[:, 1], e[:, 3])
    lo = np.searchsorted(ys, ylo, side="left")
    hi = np.searchsorted(ys, yhi, side="left")
    for (x1, y1, x2, y2), a, b in zip(e, lo, hi):
        if a == b:
            continue
        xi = x1 + (ys[a:b] - y1) * ((x2 - x1) / (y2 - y1))
        flags[a:b] ^= xs[a:b] < xi
    inside[order] = flags
    return inside


def rasterize_polygon(p: PolygonSet, resolution: float,
                      anchor: Sequence[float] | None = None) -> RasterMask:
    """Render ``p`` at ``resolution`` pixels per unit by pixel-center sampling.

    The pixel lattice has a corner at world point ``anchor`` (default: the
    polygon's bounding-box corner).  The returned mask lives in pixel units,
    with origin given as integer pixel offsets from ``anchor``; masks rendered
    against the same anchor therefore share one lattice.
    """
    xmin, ymin, xmax, ymax = p.bounds
    ax, ay = (xmin, ymin) if anchor is None else (float(anchor[0]), float(anchor[1]))
    i0 = math.floor((xmin - ax) * resolution)
    j0 = math.floor((ymin - ay) * resolution)
    i1 = math.ceil((xmax - ax) * resolution)
    j1 = math.ceil((ymax - ay) * resolution)
    w, h = max(i1 - i0, 1), max(j1 - j0, 1)
    jj, ii = np.mgrid[j0:j0 + h, i0:i0 + w]
    cx = ax + (ii + 0.5) / resolution
    cy = ay + (jj + 0.5) / resolution
    grid = points_in_polygon(p, cx, cy).reshape(h, w)
    return RasterMask(grid, (float(i0), float(j0)))


def disk_polygon(radius: float, n_vertices: int, center: Sequence[float] = (0.0, 0.0)) -> PolygonSet:
    """Regular n-gon inscribed in a circle, counter-clockwise."""
    theta = np.arange(n_vertices) * (2.0 * math.pi / n_vertices)
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    return PolygonSet((pts,))


def rectangle_polygon(x0: float, y0: float, x1: float, y1: float) -> PolygonSet:
    return PolygonSet(([(x0, y0), (x1, y0), (x1, y1), (x0, y1)],))


def disk_mask(radius: float, center: Sequence[float] | None = None) -> RasterMask:
    """Pixels whose centers lie strictly inside a circle; ``radius`` in pixels."""
    size = int(math.ceil(2 * radius)) + 2
    cx, cy = (size / 2.0, size / 2.0) if center is None else center
    jj, ii = np.mgrid[0:size, 0:size]
    grid = (ii + 0.5 - cx) ** 2 + (jj + 0.5 - cy) ** 2 < radius * radius
    return RasterMask(grid)


# ---------------------------------------------------------------------------
# Polygon file format
# ---------------------------------------------------------------------------


def polygons_from_json(obj: dict) -> list[PolygonSet]:
    """Parse ``{"components": [{"rings": [[[x, y], ...], ...]}, ...]}``."""
    try:
        comps = obj["components"]
        return [PolygonSet(tuple(c["rings"])) for c in comps]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed polygon document: {exc}") from exc


def load_polygons(path: str | Path) -> list[PolygonSet]:
    with open(path) as fh:
        return polygons_from_json(json.load(fh))


def dump_polygons(components: Sequence[PolygonSet], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump({"components": [c.to_json_obj() for c in components]}, fh)
