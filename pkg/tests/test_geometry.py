import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mcshape.errors import DegenerateShapeError, SingularMapError
from mcshape.geometry import (
    AffineMap,
    PolygonSet,
    RasterMask,
    apply_affine_polygon,
    apply_affine_raster,
    central_from_raw,
    central_moments,
    disk_mask,
    disk_polygon,
    dump_polygons,
    load_polygons,
    normalized_from_central,
    points_in_polygon,
    polygon_raw_moments,
    raster_raw_moments,
    rasterize_polygon,
)
from mcshape.invariants import shape_A

from conftest import square, star_polygon

UNIT_SQUARE = PolygonSet(([(0, 0), (1, 0), (1, 1), (0, 1)],))
TRIANGLE = PolygonSet(([(0, 0), (1, 0), (0, 1)],))
KEYS = ("m00", "m10", "m01", "m20", "m11", "m02")


def moments_tuple(m):
    return tuple(getattr(m, k) for k in KEYS)


def triangle_moment_oracle(p, q):
    # direct double integral over 0 <= y <= 1 - x
    val, _ = integrate.dblquad(lambda y, x: x ** p * y ** q, 0, 1, 0, lambda x: 1 - x,
                               epsabs=1e-14, epsrel=1e-14)
    return val


# values frozen from the dblquad oracle above (exact rationals)
TRIANGLE_RAW = (Fraction(1, 2), Fraction(1, 6), Fraction(1, 6),
                Fraction(1, 12), Fraction(1, 24), Fraction(1, 12))


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_triangle_oracle_matches_frozen_values():
    got = [triangle_moment_oracle(int(k[1]), int(k[2])) for k in KEYS]
    assert got == pytest.approx([float(f) for f in TRIANGLE_RAW], rel=1e-12)


def test_unit_square_moments():
    m = polygon_raw_moments(UNIT_SQUARE)
    assert moments_tuple(m) == pytest.approx((1, 0.5, 0.5, 1 / 3, 1 / 4, 1 / 3), rel=1e-15)


def test_triangle_moments():
    m = polygon_raw_moments(TRIANGLE)
    assert moments_tuple(m) == pytest.approx([float(f) for f in TRIANGLE_RAW], rel=1e-15)


def test_triangle_moments_match_raster_oracle():
    r = 512
    mask = rasterize_polygon(TRIANGLE, r, (0, 0))
    rm = raster_raw_moments(mask)
    scaled = [getattr(rm, k) / r ** (int(k[1]) + int(k[2]) + 2) for k in KEYS]
    assert scaled == pytest.approx([float(f) for f in TRIANGLE_RAW], rel=5e-3)


def test_square_with_hole():
    outer = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    hole = [(-0.5, -0.5), (-0.5, 0.5), (0.5, 0.5), (0.5, -0.5)]  # clockwise
    m = polygon_raw_moments(PolygonSet((outer, hole)))
    # side-2 square minus side-1 square: 16/12 - 1/12
    assert m.m00 == pytest.approx(3.0, rel=1e-15)
    assert m.m20 == pytest.approx(15 / 12, rel=1e-15)
    assert m.m11 == pytest.approx(0.0, abs=1e-15)


def test_orientation_reversed_polygon_is_degenerate():
    with pytest.raises(DegenerateShapeError):
        polygon_raw_moments(PolygonSet(([(0, 0), (0, 1), (1, 1), (1, 0)],)))


def test_ring_needs_three_vertices():
    with pytest.raises(DegenerateShapeError):
        PolygonSet(([(0, 0), (1, 0)],))


def test_explicit_closing_vertex_is_dropped():
    p = PolygonSet(([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)],))
    assert p == UNIT_SQUARE


def test_single_pixel_equals_unit_square():
    m = raster_raw_moments(RasterMask(np.ones((1, 1), bool)))
    assert moments_tuple(m) == moments_tuple(polygon_raw_moments(UNIT_SQUARE))


def test_full_2x2_mask():
    m = raster_raw_moments(RasterMask(np.ones((2, 2), bool)))
    assert (m.m00, m.m10, m.m01) == (4.0, 4.0, 4.0)
    assert m.m20 == 16 / 3


def test_full_3x3_central():
    c = central_from_raw(raster_raw_moments(RasterMask(np.ones((3, 3), bool))))
    assert c.M20 == pytest.approx(6.75, rel=1e-15)  # s^4 / 12
    assert c.M11 == 0.0


def test_empty_mask_is_degenerate():
    with pytest.raises(DegenerateShapeError):
        raster_raw_moments(RasterMask(np.zeros((3, 3), bool)))


def test_raster_origin_offsets_moments():
    a = raster_raw_moments(RasterMask(np.ones((1, 1), bool), origin=(3, -2)))
    b = polygon_raw_moments(square(3.5, -1.5))
    assert moments_tuple(a) == pytest.approx(moments_tuple(b), rel=1e-15)


def test_central_unit_square():
    c = central_from_raw(polygon_raw_moments(UNIT_SQUARE))
    assert (c.a, c.xc, c.yc) == (1.0, 0.5, 0.5)
    assert c.M20 == pytest.approx(1 / 12, rel=1e-15)
    assert c.M11 == pytest.approx(0.0, abs=1e-16)
    assert c.M02 == pytest.approx(1 / 12, rel=1e-15)


def test_central_translated_square_identical():
    c0 = central_moments(UNIT_SQUARE)
    c1 = central_moments(apply_affine_polygon(UNIT_SQUARE, AffineMap.translation(10, 10)))
    assert (c1.M20, c1.M11, c1.M02) == (c0.M20, c0.M11, c0.M02)
    assert (c1.xc, c1.yc) == (10.5, 10.5)


def test_central_triangle():
    c = central_from_raw(polygon_raw_moments(TRIANGLE))
    assert c.M20 == pytest.approx(1 / 36, rel=1e-14)
    assert c.M11 == pytest.approx(-1 / 72, rel=1e-14)
    assert c.M02 == pytest.approx(1 / 36, rel=1e-14)


def test_central_rejects_zero_area():
    from mcshape.geometry import RawMoments

    with pytest.raises(DegenerateShapeError):
        central_from_raw(RawMoments(0, 0, 0, 0, 0, 0))


def test_normalized_examples():
    n = normalized_from_central(central_moments(UNIT_SQUARE))
    assert n.mu20 == pytest.approx(1 / 12, rel=1e-15)
    assert n.mu11 == pytest.approx(0.0, abs=1e-16)
    n3 = normalized_from_central(central_moments(RasterMask(np.ones((3, 3), bool))))
    assert n3.mu20 == pytest.approx(1 / 12, rel=1e-15)
    nt = normalized_from_central(central_moments(TRIANGLE))
    assert nt.mu20 == pytest.approx(1 / 9, rel=1e-14)


def test_far_translation_keeps_precision():
    # moments are integrated about the bounding-box corner
    p = apply_affine_polygon(TRIANGLE, AffineMap.translation(1e6, -3e6))
    c = central_moments(p)
    assert c.M20 == pytest.approx(1 / 36, rel=1e-9)
    assert c.M11 == pytest.approx(-1 / 72, rel=1e-9)


# --- affine maps ------------------------------------------------------------


def test_identity_map_polygon():
    assert apply_affine_polygon(UNIT_SQUARE, AffineMap.identity()) == UNIT_SQUARE


def test_shear_gives_parallelogram():
    p = apply_affine_polygon(UNIT_SQUARE, AffineMap(1, 1, 0, 1))
    assert p.rings[0].tolist() == [[0, 0], [1, 0], [2, 1], [1, 1]]
    assert shape_A(p) == pytest.approx(1 / 144, rel=1e-14)


def test_reflection_reverses_rings():
    p = apply_affine_polygon(UNIT_SQUARE, AffineMap(-1, 0, 0, 1))
    assert p.signed_area == pytest.approx(1.0)


def test_singular_map_rejected():
    with pytest.raises(SingularMapError):
        apply_affine_polygon(UNIT_SQUARE, AffineMap(1, 2, 2, 4))
    with pytest.raises(SingularMapError):
        apply_affine_raster(RasterMask(np.ones((2, 2))), AffineMap(0, 0, 0, 0), 4, 4)


def test_inverse_and_compose():
    t = AffineMap(2, 1, -0.5, 3, 4, -1)
    u = t.then(t.inverse())
    assert [u.j11, u.j12, u.j21, u.j22, u.tx, u.ty] == pytest.approx([1, 0, 0, 1, 0, 0], abs=1e-14)


def test_identity_raster():
    grid = np.zeros((5, 6), bool)
    grid[1:4, 2:5] = True
    grid[0, 0] = True
    r = RasterMask(grid)
    assert apply_affine_raster(r, AffineMap.identity(), 6, 5) == r


def test_rotate_l_shape_preserves_pixels():
    grid = np.zeros((6, 4), bool)
    grid[:, 0] = True
    grid[5, :] = True
    r = RasterMask(grid)
    # 90 degrees (x, y) -> (-y, x), shifted back into frame
    t = AffineMap(0, -1, 1, 0, tx=6, ty=0)
    out = apply_affine_raster(r, t, 6, 4)
    assert out.count == r.count
    assert np.array_equal(out.grid, np.rot90(grid, k=-1))


def test_scaled_disk_raster_A_close():
    r = disk_mask(5.0)  # fits a 12x12 frame
    out = apply_affine_raster(r, AffineMap.scaling(3.0), 36, 36)
    assert shape_A(out) == pytest.approx(shape_A(r), rel=5e-2)


def test_raster_affine_empty_output():
    r = RasterMask(np.ones((2, 2)))
    with pytest.raises(DegenerateShapeError):
        apply_affine_raster(r, AffineMap.translation(100, 100), 4, 4)


# --- invariants / properties ------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_translation_invariance(seed, tx, ty):
    p = star_polygon(np.random.default_rng(seed), 9)
    c0 = central_moments(p)
    c1 = central_moments(apply_affine_polygon(p, AffineMap.translation(tx, ty)))
    for k in ("M20", "M11", "M02"):
        a, b = getattr(c0, k), getattr(c1, k)
        assert abs(a - b) <= 1e-12 * max(abs(c0.M20), abs(c0.M02))


@pytest.mark.parametrize("dx,dy", [(3, 0), (-7, 11), (250, 1000)])
def test_raster_integer_translation_exact(dx, dy):
    grid = np.random.default_rng(1).random((20, 30)) < 0.4
    c0 = central_moments(RasterMask(grid))
    c1 = central_moments(RasterMask(grid, origin=(dx, dy)))
    assert (c0.M20, c0.M11, c0.M02) == (c1.M20, c1.M11, c1.M02)


@pytest.mark.parametrize("lam", [0.1, 2.0, 17.0])
def test_scale_invariance(lam, rng):
    for _ in range(20):
        p = star_polygon(rng, 11, (rng.uniform(-5, 5), rng.uniform(-5, 5)))
        n0 = normalized_from_central(central_moments(p))
        n1 = normalized_from_central(central_moments(apply_affine_polygon(p, AffineMap.scaling(lam))))
        assert n1.mu20 == pytest.approx(n0.mu20, rel=1e-12)
        assert n1.mu02 == pytest.approx(n0.mu02, rel=1e-12)
        assert n1.mu11 == pytest.approx(n0.mu11, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("shape", [(1, 1), (7, 13), (64, 33)])
def test_full_mask_equals_covering_rectangle(shape):
    h, w = shape
    r = raster_raw_moments(RasterMask(np.ones((h, w)), origin=(2.0, -5.0)))
    p = polygon_raw_moments(PolygonSet(([(2, -5), (2 + w, -5), (2 + w, -5 + h), (2, -5 + h)],)))
    assert moments_tuple(r) == pytest.approx(moments_tuple(p), rel=1e-12)


def _raster_errors(disk, r):
    ref = polygon_raw_moments(disk, (-2, -2))
    rm = raster_raw_moments(rasterize_polygon(disk, r, (-2, -2)))
    return [abs(getattr(rm, k) / r ** (int(k[1]) + int(k[2]) + 2) - getattr(ref, k)) / abs(getattr(ref, k))
            for k in KEYS]


def test_raster_convergence_doublings():
    disk = disk_polygon(1.0, 4096)
    errs = [_raster_errors(disk, r) for r in (16, 32, 64, 128, 256)]
    for coarse, fine in zip(errs, errs[1:]):
        assert all(f < c for f, c in zip(fine, coarse))


def test_raster_convergence_long_range():
    for center in [(0, 0), (0.3, 0.7), (0.123, 0.456)]:
        disk = disk_polygon(1.0, 4096, center)
        coarse, fine = _raster_errors(disk, 16), _raster_errors(disk, 1024)
        assert all(f * 20 < c for f, c in zip(fine, coarse))


def test_psd_on_random_polygons(rng):
    for _ in range(1000):
        p = star_polygon(rng, int(rng.integers(3, 20)), (rng.uniform(-10, 10), rng.uniform(-10, 10)),
                         rmin=0.01, rmax=rng.uniform(0.02, 5))
        c = central_moments(p)
        eps = 1e-12 * max(1.0, c.M20 * c.M02)
        assert c.M20 >= 0 and c.M02 >= 0
        assert c.M20 * c.M02 - c.M11 ** 2 >= -eps


# --- membership, rasterization, files ---------------------------------------


def test_points_in_polygon_with_hole():
    outer = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    hole = [(-0.5, -0.5), (-0.5, 0.5), (0.5, 0.5), (0.5, -0.5)]
    p = PolygonSet((outer, hole))
    inside = points_in_polygon(p, np.array([0.0, 0.75, 1.5, -0.9]), np.array([0.0, 0.0, 0.0, 0.9]))
    assert inside.tolist() == [False, True, False, True]


def test_points_in_polygon_paths_agree(rng):
    disk = disk_polygon(1.0, 200)  # > 64 edges: sorted-slab path
    x, y = rng.uniform(-1.2, 1.2, (2, 5000))
    from mcshape import geometry

    fast = points_in_polygon(disk, x, y)
    saved = geometry._BRUTE_EDGE_LIMIT
    geometry._BRUTE_EDGE_LIMIT = 10_000
    try:
        brute = points_in_polygon(disk, x, y)
    finally:
        geometry._BRUTE_EDGE_LIMIT = saved
    assert np.array_equal(fast, brute)


def test_rasterize_axis_aligned_square_exact():
    m = rasterize_polygon(square(0.5, 0.5), 8, (0, 0))
    assert m.count == 64
    assert m.origin == (0.0, 0.0)


def test_polygon_json_roundtrip(tmp_path):
    comps = [square(-1, 0), PolygonSet(([(-1, -1), (1, -1), (1, 1), (-1, 1)],
                                       [(-0.5, -0.5), (-0.5, 0.5), (0.5, 0.5), (0.5, -0.5)]))]
    path = tmp_path / "p.json"
    dump_polygons(comps, path)
    assert load_polygons(path) == comps


def test_disk_polygon_A():
    assert shape_A(disk_polygon(3.0, 4096)) == pytest.approx(1 / (16 * math.pi ** 2), rel=1e-9)
