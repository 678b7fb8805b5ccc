"""Raster image carriers and portable graymap/pixmap (P5/P6) file I/O.

PNM was picked as the on-disk carrier because it is bit-exact and needs no
codec: write followed by read returns identical data for every image.
"""

import os
from dataclasses import dataclass, field

import numpy as np

COLORSPACES = ("BGR", "RGB", "YUV", "HSV")


class ImageFormatError(ValueError):
    """Malformed or unsupported PNM content."""


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image; pixels is a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2:
            raise ValueError("GrayImage pixels must be 2-D")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> bytes:
        """Row-major intensity bytes, length width*height."""
        return self.pixels.tobytes()


@dataclass(frozen=True)
class ColorImage:
    """8-bit three-channel image with an explicit colorspace tag."""

    pixels: np.ndarray
    colorspace: str = "RGB"

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("ColorImage pixels must be (height, width, 3)")
        if self.colorspace not in COLORSPACES:
            raise ValueError(f"unknown colorspace tag {self.colorspace!r}")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> bytes:
        """Row-major channel-triplet bytes, length 3*width*height."""
        return self.pixels.tobytes()


def _read_pnm_tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Parse `count` whitespace-separated header integers, skipping # comments.

    Returns the integers and the offset of the first raster byte.
    """
    tokens: list[int] = []
    i = 0
    n = len(buf)
    while len(tokens) < count:
        if i >= n:
            raise ImageFormatError("truncated PNM header")
        c = buf[i : i + 1]
        if c == b"#":
            while i < n and buf[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        elif c.isdigit():
            j = i
            while j < n and buf[j : j + 1].isdigit():
                j += 1
            tokens.append(int(buf[i:j]))
            i = j
        else:
            raise ImageFormatError(f"unexpected byte {c!r} in PNM header")
    # exactly one whitespace byte separates the header from the raster
    if i >= n or not buf[i : i + 1].isspace():
        raise ImageFormatError("missing whitespace before raster data")
    return tokens, i + 1


def read_image(path: str | os.PathLike) -> GrayImage | ColorImage:
    """Read a P5 (graymap) or P6 (pixmap) file; P6 is tagged RGB."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"not a P5/P6 file (magic {magic!r})")
    (width, height, maxval), offset = _read_pnm_tokens(buf[2:], 3)
    offset += 2
    if maxval != 255:
        raise ImageFormatError(f"unsupported bit depth (maxval {maxval}, want 255)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = buf[offset : offset + expected]
    if len(raster) != expected:
        raise ImageFormatError(
            f"raster has {len(raster)} bytes, expected {expected}"
        )
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return GrayImage(arr.reshape(height, width))
    return ColorImage(arr.reshape(height, width, 3), colorspace="RGB")


def write_image(image: GrayImage | ColorImage, path: str | os.PathLike) -> None:
    """Write a GrayImage as P5 or a ColorImage as P6 (canonical header)."""
    if isinstance(image, GrayImage):
        magic = b"P5"
    elif isinstance(image, ColorImage):
        magic = b"P6"
    else:
        raise TypeError(f"cannot write {type(image).__name__} as PNM")
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.data)


def encode_pnm(image: GrayImage | ColorImage) -> bytes:
    """In-memory PNM bytes, identical to what write_image puts on disk."""
    magic = b"P5" if isinstance(image, GrayImage) else b"P6"
    return magic + f"\n{image.width} {image.height}\n255\n".encode("ascii") + image.data
