"""Grayscale image container, PGM/PNG I/O and local texture primitives.

Images are immutable 8-bit single-channel rasters. PGM (binary P5, maxval
255) is the primary interchange format and round-trips bit-exactly; PNG
support is provided through Pillow for convenience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptFile, InvalidGrid, OutOfBounds, UnsupportedFormat

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster. ``pixels`` is a read-only (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("GrayImage requires a non-empty 2-D array")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("pixel values must be integers")
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def mean(self) -> float:
        """Global average gray level."""
        return float(np.mean(self.pixels, dtype=np.float64))

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


def _parse_pgm(data: bytes) -> GrayImage:
    # Tokenize the header: magic, width, height, maxval. '#' starts a
    # comment running to end of line; any whitespace separates tokens.
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < 4 and i < n:
        c = data[i:i + 1]
        if c in b" \t\r\n\x0b\x0c":
            i += 1
        elif c == b"#":
            j = data.find(b"\n", i)
            i = n if j < 0 else j + 1
        else:
            j = i
            while j < n and data[j:j + 1] not in b" \t\r\n\x0b\x0c#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4:
        raise CorruptFile("truncated PGM header")
    if tokens[0] != b"P5":
        raise UnsupportedFormat(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise CorruptFile("non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise CorruptFile("PGM dimensions must be positive")
    if maxval != 255:
        raise UnsupportedFormat(f"only 8-bit PGM supported (maxval {maxval})")
    # Exactly one whitespace byte separates the header from the payload.
    if i >= n or data[i:i + 1] not in b" \t\r\n\x0b\x0c":
        raise CorruptFile("missing separator after PGM header")
    payload = data[i + 1:]
    if len(payload) != width * height:
        raise CorruptFile(
            f"PGM payload is {len(payload)} bytes, expected {width * height}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(arr.copy())


def load_image(path) -> GrayImage:
    """Load a binary PGM (P5, maxval 255) or an 8-bit grayscale PNG."""
    data = Path(path).read_bytes()
    if data.startswith(b"P5"):
        return _parse_pgm(data)
    if data.startswith(_PNG_MAGIC):
        from PIL import Image

        try:
            with Image.open(path) as im:
                if im.mode != "L":
                    raise UnsupportedFormat(f"PNG mode {im.mode!r}, need 8-bit grayscale (L)")
                arr = np.asarray(im, dtype=np.uint8)
        except UnsupportedFormat:
            raise
        except Exception as exc:
            raise CorruptFile(f"unreadable PNG: {exc}") from exc
        return GrayImage(arr)
    if data.startswith(b"P2") or data.startswith(b"P"):
        raise UnsupportedFormat("only binary (P5) PGM is supported")
    raise UnsupportedFormat("unrecognized image format")


def save_image(img: GrayImage, path) -> None:
    """Write PGM (canonical P5 header) or PNG depending on the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(img.pixels, mode="L").save(path, format="PNG")
        return
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.pixels.tobytes())


def block_edges(extent: int, blocks: int) -> np.ndarray:
    """Start offsets of ``blocks`` consecutive blocks covering [0, extent).

    Block size is extent // blocks; the last block absorbs the remainder so
    every pixel is counted exactly once.
    """
    size = extent // blocks
    return np.arange(blocks) * size


def block_means(img: GrayImage, rows: int, cols: int) -> np.ndarray:
    """Per-block average gray level on a rows x cols partition of the image."""
    if rows < 1 or cols < 1 or rows > img.height or cols > img.width:
        raise InvalidGrid(f"grid {rows}x{cols} does not fit image {img.height}x{img.width}")
    sums, counts = block_sums(img, rows, cols)
    return sums / counts


def block_sums(img: GrayImage, rows: int, cols: int):
    """Exact integer block sums and pixel counts for the same partition as block_means."""
    if rows < 1 or cols < 1 or rows > img.height or cols > img.width:
        raise InvalidGrid(f"grid {rows}x{cols} does not fit image {img.height}x{img.width}")
    r_edges = block_edges(img.height, rows)
    c_edges = block_edges(img.width, cols)
    p = img.pixels.astype(np.int64)
    sums = np.add.reduceat(np.add.reduceat(p, r_edges, axis=0), c_edges, axis=1)
    r_sizes = np.diff(np.append(r_edges, img.height))
    c_sizes = np.diff(np.append(c_edges, img.width))
    counts = np.outer(r_sizes, c_sizes)
    return sums, counts


# Clockwise 8-neighborhood starting at the top-left pixel; bit i of the LBP
# code corresponds to neighbor i (bit 0 = least significant).
_LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp_code(img: GrayImage, x: int, y: int) -> int:
    """8-neighbor local binary pattern at column x, row y (interior pixels only).

    Bit i is set iff neighbor i >= center, neighbors enumerated clockwise
    from the top-left; ties set the bit, so constant regions give 255.
    """
    if not (1 <= x <= img.width - 2 and 1 <= y <= img.height - 2):
        raise OutOfBounds(f"({x}, {y}) is not an interior pixel")
    p = img.pixels
    center = p[y, x]
    code = 0
    for i, (dy, dx) in enumerate(_LBP_OFFSETS):
        if p[y + dy, x + dx] >= center:
            code |= 1 << i
    return code


def lbp_map(img: GrayImage) -> np.ndarray:
    """LBP codes of all interior pixels as a (height-2, width-2) uint8 array."""
    if img.height < 3 or img.width < 3:
        raise OutOfBounds("image has no interior pixels")
    p = img.pixels
    center = p[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for i, (dy, dx) in enumerate(_LBP_OFFSETS):
        nb = p[1 + dy:p.shape[0] - 1 + dy, 1 + dx:p.shape[1] - 1 + dx]
        codes |= ((nb >= center).astype(np.uint8) << i)
    return codes


_TRANSITIONS_LUT = np.array(
    [bin(c ^ (((c << 1) | (c >> 7)) & 0xFF)).count("1") for c in range(256)],
    dtype=np.uint8,
)


def lbp_transitions(codes: np.ndarray) -> np.ndarray:
    """Number of circular 0<->1 transitions of each 8-bit LBP code (0..8)."""
    return _TRANSITIONS_LUT[codes]


def local_mean(img: GrayImage, x: int, y: int, radius: int) -> float:
    """Mean intensity of the (2*radius+1)^2 window around (x, y), center excluded."""
    if radius < 1:
        raise OutOfBounds("radius must be >= 1")
    if not (radius <= x <= img.width - 1 - radius and radius <= y <= img.height - 1 - radius):
        raise OutOfBounds(f"window radius {radius} at ({x}, {y}) exits the image")
    win = img.pixels[y - radius:y + radius + 1, x - radius:x + radius + 1]
    total = int(win.sum(dtype=np.int64)) - int(img.pixels[y, x])
    return total / (win.size - 1)


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError("images must have identical dimensions")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)
