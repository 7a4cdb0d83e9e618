import numpy as np
import pytest
from PIL import Image

from mcshape.errors import ImageFormatError
from mcshape.imaging import GrayImage, LabelImage
from mcshape.pnm import encode_pgm, parse_pgm, read_image, write_gray, write_label


def test_p2_round_trip(tmp_path):
    src = tmp_path / "in.pgm"
    src.write_bytes(b"P2\n2 2\n255\n0 1\n2 3\n")
    g = read_image(src)
    assert g.pixels.tolist() == [[0, 1], [2, 3]]
    out = tmp_path / "out.pgm"
    write_gray(out, g, plain=True)
    assert out.read_bytes() == src.read_bytes()
    # our writer's output is a fixed point of read -> write
    again = tmp_path / "again.pgm"
    write_gray(again, read_image(out), plain=True)
    assert again.read_bytes() == out.read_bytes()


def test_p2_with_comments_and_loose_whitespace():
    data = b"P2 # plain\n# size follows\n2 2\n255\n0 1 2\n\n3\n"
    assert parse_pgm(data).tolist() == [[0, 1], [2, 3]]


def test_p5_round_trip(tmp_path, rng):
    px = rng.integers(0, 256, (7, 5)).astype(np.uint8)
    p = tmp_path / "x.pgm"
    write_gray(p, GrayImage(px))
    data = p.read_bytes()
    assert data.startswith(b"P5\n5 7\n255\n")
    assert np.array_equal(read_image(p).pixels, px)
    write_gray(tmp_path / "y.pgm", read_image(p))
    assert (tmp_path / "y.pgm").read_bytes() == data


def test_low_maxval_keeps_raw_values():
    assert parse_pgm(b"P2\n3 1\n15\n0 7 15\n").tolist() == [[0, 7, 15]]


def test_maxval_65535_unsupported():
    with pytest.raises(ImageFormatError, match="bit depth"):
        parse_pgm(b"P2\n1 1\n65535\n1000\n")


@pytest.mark.parametrize("data", [
    b"P2\n2\n",                      # truncated header
    b"P2\nx 2\n255\n0 0\n",          # non-numeric
    b"P5\n2 2\n255\n\x00",           # truncated body
    b"P2\n2 1\n255\n0 300\n",        # value > maxval
    b"P3\n1 1\n255\n0 0 0\n",        # unsupported magic
    b"P2\n0 1\n255\n",               # empty image
])
def test_malformed_pgm(data):
    with pytest.raises(ImageFormatError):
        parse_pgm(data)


def test_unknown_file_type(tmp_path):
    p = tmp_path / "x.txt"
    p.write_bytes(b"hello")
    with pytest.raises(ImageFormatError):
        read_image(p)


def test_png_rgb_conversion(tmp_path):
    rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]]], dtype=np.uint8)
    p = tmp_path / "c.png"
    Image.fromarray(rgb, "RGB").save(p)
    assert read_image(p).pixels.tolist() == [[76, 150, 29, 255]]


def test_png_gray(tmp_path, rng):
    px = rng.integers(0, 256, (6, 4)).astype(np.uint8)
    p = tmp_path / "g.png"
    Image.fromarray(px, "L").save(p)
    assert np.array_equal(read_image(p).pixels, px)


def test_png_16bit_unsupported(tmp_path):
    p = tmp_path / "d.png"
    Image.fromarray(np.full((2, 2), 40000, dtype=np.uint16)).save(p)
    with pytest.raises(ImageFormatError, match="bit depth"):
        read_image(p)


def test_label_round_trip(tmp_path):
    lab = np.array([[0, 3], [7, 255]])
    p = tmp_path / "l.pgm"
    write_label(p, LabelImage(lab))
    li = read_image(p, as_labels=True)
    assert isinstance(li, LabelImage)
    assert li.labels.tolist() == lab.tolist()


def test_label_out_of_range(tmp_path):
    with pytest.raises(ImageFormatError):
        write_label(tmp_path / "l.pgm", LabelImage(np.array([[0, 256]])))


def test_plain_encoding_one_row_per_line():
    assert encode_pgm(np.array([[1, 2, 3], [4, 5, 6]], dtype=np.uint8), plain=True) == \
        b"P2\n3 2\n255\n1 2 3\n4 5 6\n"
