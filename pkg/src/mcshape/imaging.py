"""Grayscale segmentation into label images, and label images into shapes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateHistogramError, NoComponentsError
from .geometry import RasterMask
from .invariants import MultiComponentShape


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("gray image must be a non-empty 2-D array")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("gray values must lie in 0..255")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabelImage:
    labels: np.ndarray  # non-negative integers, shape (height, width)
    background_label: int = 0

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError("label image must be 2-D")
        if lab.size and lab.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", lab.astype(np.int64, copy=False))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def foreground_labels(self) -> list[int]:
        return [int(v) for v in np.unique(self.labels) if v != self.background_label]

    def __eq__(self, other):
        if not isinstance(other, LabelImage):
            return NotImplemented
        return (self.background_label == other.background_label
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


def median_filter(g: GrayImage, window: int = 3) -> GrayImage:
    """Square-window median with edge replication at the borders."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 3, got {window}")
    return GrayImage(ndimage.median_filter(g.pixels, size=window, mode="nearest"))


def _class_score_table(hist: np.ndarray) -> np.ndarray:
    """``T[a, b] = S**2 / P`` for the intensity band of cumulative indices (a, b].

    ``P`` and ``S`` are the pixel count and intensity sum of the band; empty
    bands get ``-inf`` so they never win.
    """
    cnt = np.concatenate([[0], np.cumsum(hist, dtype=np.int64)])
    s = np.concatenate([[0], np.cumsum(hist * np.arange(256, dtype=np.int64), dtype=np.int64)])
    P = (cnt[None, :] - cnt[:, None]).astype(np.float64)
    S = (s[None, :] - s[:, None]).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = np.where(P > 0, S * S / P, -np.inf)
    return T


def otsu_thresholds(hist, classes: int) -> tuple[int, ...]:
    """Exhaustive multi-level Otsu on a 256-bin histogram.

    Maximises the between-class variance over all ascending threshold tuples
    ``t1 < ... < t_{k-1}``; class ``c`` holds intensities ``t_{c-1} < v <= t_c``.
    Ties go to the lexicographically smallest tuple.
    """
    hist = np.asarray(hist, dtype=np.int64)
    if hist.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    if classes not in (2, 3, 4):
        raise ValueError("classes must be 2, 3 or 4")
    if np.count_nonzero(hist) < classes:
        raise DegenerateHistogramError(
            f"histogram has {np.count_nonzero(hist)} populated bins, need at least {classes}")
    T = _class_score_table(hist)
    # cumulative boundary b = t + 1 runs over 1..255
    best, best_t = -np.inf, None
    if classes == 2:
        score = T[0, 1:256] + T[1:256, 256]
        i = int(np.argmax(score))  # first maximiser = smallest threshold
        return (i,)
    if classes == 3:
        b = np.arange(1, 256)
        score = T[0, b][:, None] + T[b[:, None], b[None, :]] + T[b, 256][None, :]
        score[np.tril_indices(len(b))] = -np.inf  # need b1 < b2
        flat = int(np.argmax(score))  # row-major first = lexicographically smallest
        b1, b2 = divmod(flat, len(b))
        return (b1, b2)
    # classes == 4: loop over the middle boundary, vectorise the outer two
    for b2 in range(2, 255):
        b1 = np.arange(1, b2)
        b3 = np.arange(b2 + 1, 256)
        score = (T[0, b1] + T[b1, b2])[:, None] + (T[b2, b3] + T[b3, 256])[None, :]
        flat = int(np.argmax(score))
        val = score.flat[flat]
        i, k = divmod(flat, len(b3))
        cand = (int(b1[i]) - 1, b2 - 1, int(b3[k]) - 1)
        if best_t is None or val > best or (val == best and cand < best_t):
            best, best_t = val, cand
    return best_t


def multi_otsu(g: GrayImage, classes: int, background_class: int = 0) -> tuple[tuple[int, ...], LabelImage]:
    """k-class Otsu segmentation.

    Returns the ``k - 1`` thresholds and a label image where the class with
    index ``background_class`` (0 = darkest band) becomes label 0 and the
    remaining classes get labels ``1..k-1`` in ascending intensity order.
    """
    if not 0 <= background_class < classes:
        raise ValueError("background_class must index one of the classes")
    hist = np.bincount(g.pixels.ravel(), minlength=256)
    thresholds = otsu_thresholds(hist, classes)
    cls = np.searchsorted(np.asarray(thresholds), g.pixels, side="left")
    lut = np.empty(classes, dtype=np.int64)
    nxt = 1
    for c in range(classes):
        if c == background_class:
            lut[c] = 0
        else:
            lut[c] = nxt
            nxt += 1
    return thresholds, LabelImage(lut[cls], background_label=0)


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def connected_components(mask: RasterMask, connectivity: int = 8) -> LabelImage:
    """Label maximal connected pixel groups ``1..n`` in row-major first-encounter order."""
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    lab, n = ndimage.label(mask.grid, structure=_STRUCTURES[connectivity])
    if n:
        # enforce first-encounter numbering independently of the labeller
        flat = lab.ravel()
        nz = flat[flat > 0]
        _, first = np.unique(nz, return_index=True)
        order = np.unique(nz)[np.argsort(first)]
        remap = np.zeros(n + 1, dtype=np.int64)
        remap[order] = np.arange(1, n + 1)
        lab = remap[lab]
    return LabelImage(lab.astype(np.int64), background_label=0)


def label_to_components(li: LabelImage) -> MultiComponentShape:
    """One raster component per foreground label, ascending by label value.

    Each component is cropped to its bounding box; origins keep it on the
    image's pixel lattice.
    """
    labels = li.foreground_labels()
    if not labels:
        raise NoComponentsError("no components: label image has only background")
    masks = []
    for lab in labels:
        sel = li.labels == lab
        rows = np.flatnonzero(sel.any(axis=1))
        cols = np.flatnonzero(sel.any(axis=0))
        sub = sel[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        masks.append(RasterMask(sub, (float(cols[0]), float(rows[0]))))
    return MultiComponentShape(tuple(masks))


def label_counts(li: LabelImage) -> dict[int, int]:
    vals, cnt = np.unique(li.labels, return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, cnt)}


__all__ = [
    "GrayImage", "LabelImage", "median_filter", "otsu_thresholds", "multi_otsu",
    "connected_components", "label_to_components", "label_counts",
]
