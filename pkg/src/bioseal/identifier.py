"""Content-derived image identifier.

The image is split into a block grid (default 16x16, 256 bits); bit (r, c)
is 1 iff the block's mean gray level is at least the global mean. Comparing
block mean against global mean is invariant to any affine remap a*v + b
with a > 0 as long as no pixel clamps, so the identifier survives contrast
and luminance edits. It is the key that binds commitments and ledger
records to a specific image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGrid
from .imaging import GrayImage, block_sums

DEFAULT_GRID = 16


@dataclass(frozen=True)
class ImageId:
    """Bit vector over the block grid, row-major; length a multiple of 8."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0 or arr.size % 8 != 0:
            raise ValueError("ImageId length must be a positive multiple of 8")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("ImageId bits must be 0 or 1")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        return isinstance(other, ImageId) and np.array_equal(self.bits, other.bits)

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    def to_hex(self) -> str:
        """len/4 hex chars (64 for the default grid); bit 0 = MSB of byte 0."""
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "ImageId":
        raw = bytes.fromhex(text)
        return cls(np.unpackbits(np.frombuffer(raw, dtype=np.uint8)))


def image_identifier(img: GrayImage, grid_rows: int = DEFAULT_GRID,
                     grid_cols: int = DEFAULT_GRID) -> ImageId:
    """Identifier bits from exact integer comparison of block vs global mean.

    mean(block) >= mean(image) is evaluated as
    sum(block) * n_pixels >= sum(image) * n_block_pixels,
    so the result never depends on float rounding.
    """
    if (grid_rows * grid_cols) % 8 != 0:
        raise InvalidGrid("grid must yield a multiple of 8 bits")
    sums, counts = block_sums(img, grid_rows, grid_cols)
    total = int(img.pixels.sum(dtype=np.int64))
    n_pixels = img.height * img.width
    bits = (sums * n_pixels >= total * counts).astype(np.uint8)
    return ImageId(bits.reshape(-1))


def id_distance(a: ImageId, b: ImageId) -> float:
    """Fraction of disagreeing identifier bits."""
    if len(a) != len(b):
        raise ValueError(f"identifiers have lengths {len(a)} and {len(b)}")
    return float(np.count_nonzero(a.bits != b.bits)) / len(a)
