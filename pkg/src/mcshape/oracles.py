"""Independent checks of the squared-triangle-area identities.

Three routes, none of which reuses the closed-form moment path it verifies:

* Monte Carlo estimation of the expected squared area of a triangle whose
  vertices are drawn uniformly from a shape;
* exact enumeration of all ordered point pairs/triples of a finite point set;
* a high-resolution raster rendering of polygon components.

Random streams: chunk ``k`` of a Monte Carlo run draws from
``PCG64(SeedSequence(seed, spawn_key=(k,)))``, i.e. the ``k``-th child of
``SeedSequence(seed).spawn``.  Chunks have a fixed size and are reduced in
index order, so the estimate depends only on ``(shape, n, seed)`` and never on
the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateShapeError
from .geometry import (
    PolygonSet,
    RasterMask,
    central_from_raw,
    normalized_from_central,
    points_in_polygon,
    rasterize_polygon,
    raw_moments,
    shape_corner,
)
from .invariants import MultiComponentShape, MeasureReport, _threads, affine_invariant_A, measure_M

CHUNK = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int
    acceptance_ratio: float | None = None

    def z_score(self, expected: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.mean == expected else math.inf
        return (self.mean - expected) / self.std_error


def chunk_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))


def _sample_polygon(p: PolygonSet, n: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Rejection sampling in the bounding box; returns points and candidates consumed."""
    xmin, ymin, xmax, ymax = p.bounds
    out = []
    have = 0
    consumed = 0
    guess = 0.5
    while have < n:
        need = n - have
        batch = int(need / guess * 1.1) + 16
        pts = rng.random((batch, 2))
        pts[:, 0] = xmin + pts[:, 0] * (xmax - xmin)
        pts[:, 1] = ymin + pts[:, 1] * (ymax - ymin)
        hits = np.flatnonzero(points_in_polygon(p, pts[:, 0], pts[:, 1]))
        guess = max(len(hits) / batch, 0.01)
        if len(hits) >= need:
            hits = hits[:need]
            consumed += int(hits[-1]) + 1
        else:
            consumed += batch
        out.append(pts[hits])
        have += len(hits)
    return np.vstack(out), consumed


def _sample_raster(r: RasterMask, n: int, rng: np.random.Generator) -> np.ndarray:
    rows, cols = np.nonzero(r.grid)
    pick = rng.integers(0, len(rows), size=n)
    off = rng.random((n, 2))
    return np.column_stack([r.origin[0] + cols[pick] + off[:, 0],
                            r.origin[1] + rows[pick] + off[:, 1]])


def _sample(shape, n: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    if isinstance(shape, PolygonSet):
        return _sample_polygon(shape, n, rng)
    if isinstance(shape, RasterMask):
        if shape.count == 0:
            raise DegenerateShapeError("raster mask has no occupied pixels")
        return _sample_raster(shape, n, rng), n
    raise TypeError(f"unsupported shape type {type(shape).__name__}")


def sample_uniform(shape, n: int, seed: int) -> np.ndarray:
    """``n`` points drawn uniformly from ``shape`` (chunked like the estimator)."""
    parts = []
    for k in range(math.ceil(n / CHUNK)):
        m = min(CHUNK, n - k * CHUNK)
        parts.append(_sample(shape, m, chunk_rng(seed, k))[0])
    return np.vstack(parts)


def squared_triangle_areas(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared areas of triangles with vertex arrays ``a``, ``b``, ``c`` of shape (m, 2)."""
    ux, uy = a[:, 0] - c[:, 0], a[:, 1] - c[:, 1]
    vx, vy = b[:, 0] - c[:, 0], b[:, 1] - c[:, 1]
    cross = ux * vy - uy * vx
    return cross * cross / 4.0


def mc_expected_sq_area(shape, n: int, seed: int, threads: int | None = None) -> McEstimate:
    """Monte Carlo mean of the squared area of a random triangle in ``shape``.

    The three vertices are independent and uniform over the shape.  The
    estimand equals ``1.5 * area**2 * A(shape)``.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    raw_moments(shape, shape_corner(shape))  # raises on zero area
    cx, cy = shape_corner(shape)
    n_chunks = math.ceil(n / CHUNK)

    def run(k: int):
        m = min(CHUNK, n - k * CHUNK)
        pts, drawn = _sample(shape, 3 * m, chunk_rng(seed, k))
        pts = pts - (cx, cy)
        v = squared_triangle_areas(pts[0::3], pts[1::3], pts[2::3])
        mean = float(v.mean())
        return m, mean, float(((v - mean) ** 2).sum()), drawn

    nt = _threads(threads)
    if nt > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=nt) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(k) for k in range(n_chunks)]

    # Chan et al. pairwise combination, in chunk order
    count, mean, m2 = 0, 0.0, 0.0
    drawn = 0
    for m, mu, s2, d in parts:
        tot = count + m
        delta = mu - mean
        mean += delta * m / tot
        m2 += s2 + delta * delta * count * m / tot
        count = tot
        drawn += d
    var = m2 / (count - 1)
    acceptance = 3 * n / drawn if isinstance(shape, PolygonSet) else None
    return McEstimate(mean, math.sqrt(var / count), n, seed, acceptance)


def expected_sq_area(shape) -> float:
    """Closed-form ``1.5 * area**2 * A`` for the Monte Carlo estimand."""
    cm = central_from_raw(raw_moments(shape, shape_corner(shape)))
    return 1.5 * cm.a * cm.a * affine_invariant_A(normalized_from_central(cm))


def discrete_tuple_sum(points, order: int) -> float:
    """Brute-force sum of squared triangle areas over ordered tuples.

    ``order=3``: all N**3 ordered triples ``(A, B, C)``.
    ``order=2``: all N**2 ordered pairs ``(P, Q)`` forming a triangle with the
    centroid, in centroid-centred coordinates.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("need at least one point")
    if order == 2:
        c = pts - pts.mean(axis=0)
        x, y = c[:, 0], c[:, 1]
        cross = x[:, None] * y[None, :] - y[:, None] * x[None, :]
        return float(np.sum(cross * cross)) / 4.0
    if order == 3:
        total = []
        for p in pts:
            d = pts - p
            cross = d[:, 0][:, None] * d[:, 1][None, :] - d[:, 1][:, None] * d[:, 0][None, :]
            total.append(float(np.sum(cross * cross)))
        return math.fsum(total) / 4.0
    raise ValueError("order must be 2 or 3")


def discrete_moment_side(points, order: int) -> float:
    """Moment form the tuple sum must equal.

    With discrete central moments ``Mpq = sum (x - xbar)^p (y - ybar)^q``:
    order 2 gives ``(M20 M02 - M11^2) / 2``, order 3 gives
    ``(3N / 2) (M20 M02 - M11^2)``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("need at least one point")
    c = pts - pts.mean(axis=0)
    m20 = math.fsum(c[:, 0] ** 2)
    m02 = math.fsum(c[:, 1] ** 2)
    m11 = math.fsum(c[:, 0] * c[:, 1])
    det = m20 * m02 - m11 * m11
    if order == 2:
        return det / 2.0
    if order == 3:
        return 1.5 * len(pts) * det
    raise ValueError("order must be 2 or 3")


def highres_raster_oracle(s: MultiComponentShape, resolution: float) -> MeasureReport:
    """Measure the polygon shape ``s`` again after rendering it to pixels.

    All components are rendered on one lattice anchored at the union's bounding
    box corner, so disjoint polygons yield disjoint masks.
    """
    if resolution < 4:
        raise ValueError("resolution must be at least 4 pixels per unit")
    if s.kind is not PolygonSet:
        raise TypeError("the raster oracle takes polygon components")
    bounds = [c.bounds for c in s.components]
    anchor = (min(b[0] for b in bounds), min(b[1] for b in bounds))
    masks = []
    for i, c in enumerate(s.components):
        m = rasterize_polygon(c, resolution, anchor)
        if m.count == 0:
            raise DegenerateShapeError(f"component {i} rasterizes to zero pixels")
        masks.append(m)
    return measure_M(MultiComponentShape(tuple(masks)))
