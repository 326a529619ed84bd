"""Raster images and binary PPM/PGM file I/O.

Samples are kept as float64 in [0, 1], shaped (height, width, channels) in
row-major, channel-interleaved order. Files are 8-bit binary netpbm: P6 for
RGB, P5 for grayscale; samples map to [0, 1] by dividing by 255.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

BIT_DEPTH = 8
PEAK = 255.0


@dataclass(frozen=True)
class Image:
    """An image as float samples in [0, 1].

    `samples` has shape (height, width, channels) with channels 1 or 3.
    """

    samples: np.ndarray
    bit_depth: int = field(default=BIT_DEPTH)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 2:
            s = s[:, :, np.newaxis]
        if s.ndim != 3 or s.shape[2] not in (1, 3):
            raise ValueError(f"samples must be (h, w, c) with c in (1, 3), got shape {np.shape(self.samples)}")
        if s.shape[0] == 0 or s.shape[1] == 0:
            raise ValueError("empty image")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if s.min() < 0.0 or s.max() > 1.0:
            raise ValueError("samples must lie in [0, 1]")
        object.__setattr__(self, "samples", s)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def to_uint8(self) -> np.ndarray:
        """Samples scaled to the 8-bit integer grid (round half away handled by rint)."""
        return np.rint(self.samples * PEAK).astype(np.uint8)

    @classmethod
    def from_uint8(cls, pixels: np.ndarray) -> "Image":
        return cls(np.asarray(pixels, dtype=np.float64) / PEAK)


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # netpbm tokens are separated by whitespace; '#' starts a comment to end of line
    while pos < len(data):
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated netpbm header")
    return data[start:pos], pos


def load_image(path) -> Image:
    """Read a binary PPM (P6) or PGM (P5) file."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic == b"P6":
        channels = 3
    elif magic == b"P5":
        channels = 1
    else:
        raise ValueError(f"not a binary PPM/PGM file: magic {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        fields.append(int(tok))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ValueError("non-positive image dimensions")
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    count = width * height * channels
    raster = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    if raster.size < count:
        raise ValueError("truncated raster data")
    return Image.from_uint8(raster.reshape(height, width, channels))


def save_image(path, image: Image) -> None:
    """Write `image` as P6 (RGB) or P5 (gray). Writes to a temp file, then renames."""
    magic = b"P6" if image.channels == 3 else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, image.width, image.height)
    payload = header + image.to_uint8().tobytes()
    atomic_write(path, payload)


def atomic_write(path, payload: bytes) -> None:
    """Write bytes to `path` without leaving partial files on failure."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
