"""Image files: PGM (P2/P5) read and write, PNG read.

Label images are stored as PGM whose gray value is the label, so at most 255
labels fit in one file.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import ImageFormatError
from .imaging import GrayImage, LabelImage

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Parse ``magic width height maxval``; returns them plus the offset after maxval."""
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if not m:
            raise ImageFormatError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError("non-numeric PGM header field") from None
    if w < 1 or h < 1:
        raise ImageFormatError(f"invalid PGM size {w}x{h}")
    if maxval < 1 or maxval > 65535:
        raise ImageFormatError(f"invalid PGM maxval {maxval}")
    if maxval > 255:
        raise ImageFormatError(f"unsupported bit depth: maxval {maxval} > 255")
    return magic, w, h, maxval, pos


def parse_pgm(data: bytes) -> np.ndarray:
    magic, w, h, maxval, pos = _header(data)
    if magic == b"P5":
        start = pos + 1  # exactly one whitespace byte ends the header
        body = data[start:start + w * h]
        if len(body) != w * h:
            raise ImageFormatError("truncated P5 pixel data")
        px = np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()
    elif magic == b"P2":
        body = re.sub(rb"#[^\n]*", b"", data[pos:])
        try:
            vals = [int(t) for t in body.split()]
        except ValueError:
            raise ImageFormatError("non-numeric P2 pixel data") from None
        if len(vals) < w * h:
            raise ImageFormatError("truncated P2 pixel data")
        px = np.array(vals[: w * h], dtype=np.int64).reshape(h, w)
    else:
        raise ImageFormatError(f"unsupported PNM magic {magic!r}")
    if px.max() > maxval or px.min() < 0:
        raise ImageFormatError("pixel value exceeds maxval")
    return px.astype(np.uint8)


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        mode = im.mode
        if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise ImageFormatError(f"unsupported bit depth: PNG mode {mode}")
        if mode == "L":
            return np.asarray(im, dtype=np.uint8).copy()
        if mode == "1":
            return np.asarray(im.convert("L"), dtype=np.uint8).copy()
        if mode == "LA":
            return np.asarray(im, dtype=np.uint8)[..., 0].copy()
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(gray + 0.5), 0, 255).astype(np.uint8)


def read_image(path, as_labels: bool = False, background_label: int = 0):
    """Read a PGM or PNG as a ``GrayImage`` (or ``LabelImage`` if ``as_labels``)."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(PNG_SIGNATURE):
        px = _read_png(path)
    elif data[:2] in (b"P2", b"P5"):
        px = parse_pgm(data)
    else:
        raise ImageFormatError(f"{path}: not a PGM (P2/P5) or PNG file")
    if as_labels:
        return LabelImage(px.astype(np.int64), background_label=background_label)
    return GrayImage(px)


def encode_pgm(px: np.ndarray, plain: bool = False) -> bytes:
    h, w = px.shape
    header = f"{'P2' if plain else 'P5'}\n{w} {h}\n255\n".encode()
    if plain:
        rows = (" ".join(str(int(v)) for v in row) for row in px)
        return header + ("\n".join(rows) + "\n").encode()
    return header + np.ascontiguousarray(px, dtype=np.uint8).tobytes()


def write_gray(path, g: GrayImage, plain: bool = False) -> None:
    Path(path).write_bytes(encode_pgm(g.pixels, plain))


def write_label(path, li: LabelImage, plain: bool = False) -> None:
    lab = li.labels
    if lab.size and (lab.max() > 255 or lab.min() < 0):
        raise ImageFormatError(f"label {int(lab.max())} out of range for an 8-bit PGM")
    Path(path).write_bytes(encode_pgm(lab.astype(np.uint8), plain))
