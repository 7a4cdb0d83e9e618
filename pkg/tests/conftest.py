import math

import numpy as np
import pytest

from mcshape.geometry import AffineMap, PolygonSet, rectangle_polygon


def square(cx, cy, side=1.0):
    h = side / 2.0
    return rectangle_polygon(cx - h, cy - h, cx + h, cy + h)


def star_polygon(rng, n_vertices, center=(0.0, 0.0), rmin=0.3, rmax=1.0):
    """Random simple polygon, star-shaped about ``center``.

    One jittered angle per sector of width 2*pi/n keeps every angular gap
    below pi (for n >= 4), so ``center`` stays in the kernel.
    """
    theta = (np.arange(n_vertices) + rng.uniform(0.0, 0.9, n_vertices)) * (2 * math.pi / n_vertices)
    r = rng.uniform(rmin, rmax, n_vertices)
    pts = np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])
    return PolygonSet((pts,))


def random_components(rng, n, spacing=2.5):
    """``n`` star polygons in distinct cells of a grid, so they are disjoint."""
    cols = math.ceil(math.sqrt(n))
    out = []
    for k in range(n):
        cx, cy = (k % cols) * spacing, (k // cols) * spacing
        out.append(star_polygon(rng, int(rng.integers(3, 12)), (cx, cy), 0.2, 1.0))
    return out


def random_affine(rng, lo=-3.0, hi=3.0, min_det=0.1):
    while True:
        j = rng.uniform(lo, hi, 4)
        t = rng.uniform(-10, 10, 2)
        m = AffineMap(*j, *t)
        if abs(m.det) >= min_det:
            return m


BAND_MEANS = (40, 115, 190, 250)


def band_image(rng, size=512, means=BAND_MEANS, sigma=8.0):
    """Vertical intensity bands with Gaussian noise; returns (uint8 pixels, truth band index)."""
    k = len(means)
    truth = np.broadcast_to((np.arange(size) * k) // size, (size, size)).copy()
    noisy = np.asarray(means, dtype=float)[truth] + rng.normal(0.0, sigma, truth.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8), truth


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
