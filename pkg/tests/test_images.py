import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smartlid.images import (
    ColorImage,
    GrayImage,
    ImageFormatError,
    encode_pnm,
    read_image,
    write_image,
)


def test_p5_decode_known_bytes(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 85, 170, 255]))
    image = read_image(path)
    assert isinstance(image, GrayImage)
    assert image.width == 2 and image.height == 2
    assert list(image.data) == [0, 85, 170, 255]


def test_p6_round_trip(tmp_path):
    px = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    image = ColorImage(px, colorspace="RGB")
    path = tmp_path / "tiny.ppm"
    write_image(image, path)
    back = read_image(path)
    assert isinstance(back, ColorImage)
    assert back.data == image.data
    assert path.read_bytes() == encode_pnm(image)


def test_header_comments_and_whitespace(tmp_path):
    path = tmp_path / "weird.pgm"
    path.write_bytes(b"P5 # comment\n# another\n 3\t1 \n255\n" + bytes([7, 8, 9]))
    image = read_image(path)
    assert image.width == 3 and image.height == 1
    assert list(image.data) == [7, 8, 9]


def test_unsupported_bit_depth(tmp_path):
    path = tmp_path / "deep.ppm"
    path.write_bytes(b"P6\n1 1\n65535\n" + bytes(6))
    with pytest.raises(ImageFormatError, match="unsupported bit depth"):
        read_image(path)


def test_bad_magic_and_truncation(tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P3\n1 1\n255\n0")
    with pytest.raises(ImageFormatError, match="magic"):
        read_image(bad)
    short = tmp_path / "short.pgm"
    short.write_bytes(b"P5\n2 2\n255\n\x00\x01")
    with pytest.raises(ImageFormatError, match="raster"):
        read_image(short)


def test_invariants():
    with pytest.raises(ValueError):
        GrayImage(np.zeros((2, 2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        ColorImage(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        ColorImage(np.zeros((2, 2, 3), dtype=np.uint8), colorspace="XYZ")


@settings(max_examples=40, deadline=None)
@given(
    w=st.integers(1, 17),
    h=st.integers(1, 17),
    color=st.booleans(),
    seed=st.integers(0, 2**31),
)
def test_round_trip_lossless_any_size(tmp_path_factory, w, h, color, seed):
    rng = np.random.default_rng(seed)
    path = tmp_path_factory.mktemp("pnm") / "img.pnm"
    if color:
        image = ColorImage(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
    else:
        image = GrayImage(rng.integers(0, 256, (h, w), dtype=np.uint8))
    write_image(image, path)
    back = read_image(path)
    assert back.data == image.data
    assert (back.width, back.height) == (w, h)
