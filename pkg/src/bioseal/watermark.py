"""Blind 64x64-bit watermark: payload framing, embedding, extraction.

One mark bit is carried per tile of a 64x64 partition of the image, at the
tile's center pixel (the anchor): the anchor is pushed above (bit 1) or
below (bit 0) the mean of its surrounding window by a margin modulated by
the tile's LBP non-uniformity. Extraction is the bare sign comparison, so
it needs neither the original image nor any key, and any affine intensity
change a*v + b with a > 0 that clamps no pixel leaves the mark intact.

The 512-bit payload (owner and customer BioCodes) is written 8 times; copy
t occupies mark rows 8t..8t+7 with its columns rotated right by 8t, so the
8 copies of every payload bit land in 8 distinct mark columns and rows. A
border-zeroing crop that kills whole tile rows and columns then costs each
payload bit at most a couple of copies instead of all 8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biohash import BioCode
from .errors import CapacityError, ImageTooSmall
from .imaging import GrayImage, lbp_map, lbp_transitions

MARK_SIZE = 64
PAYLOAD_BITS = 512
COPIES = MARK_SIZE * MARK_SIZE // PAYLOAD_BITS
HALF_BITS = PAYLOAD_BITS // 2
_COPY_ROWS = PAYLOAD_BITS // MARK_SIZE
_MIN_TILE = 4
_RADIUS2_TILE = 5
DEFAULT_STRENGTH = 6

_PBM_HEADER = b"P4\n64 64\n"


@dataclass(frozen=True)
class Mark:
    """64x64 bit matrix."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.shape != (MARK_SIZE, MARK_SIZE):
            raise ValueError(f"Mark must be {MARK_SIZE}x{MARK_SIZE}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("Mark bits must be 0 or 1")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __eq__(self, other) -> bool:
        return isinstance(other, Mark) and np.array_equal(self.bits, other.bits)

    def to_hex(self) -> str:
        """1024 hex chars, rows packed MSB-first in row-major order."""
        return np.packbits(self.bits.reshape(-1)).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "Mark":
        raw = bytes.fromhex(text)
        if len(raw) != MARK_SIZE * MARK_SIZE // 8:
            raise ValueError("Mark hex must encode 4096 bits")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        return cls(bits.reshape(MARK_SIZE, MARK_SIZE))

    def to_pbm(self) -> bytes:
        """Binary PBM (P4); PBM convention: 1 = black."""
        return _PBM_HEADER + np.packbits(self.bits, axis=1).tobytes()

    @classmethod
    def from_pbm(cls, data: bytes) -> "Mark":
        if not data.startswith(_PBM_HEADER):
            raise ValueError("expected a 64x64 binary PBM")
        raw = data[len(_PBM_HEADER):]
        if len(raw) != MARK_SIZE * MARK_SIZE // 8:
            raise ValueError("PBM payload must encode 4096 bits")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8).reshape(MARK_SIZE, 8), axis=1)
        return cls(bits)


@dataclass(frozen=True)
class Payload:
    """Owner and customer BioCodes, 256 bits each."""

    owner: BioCode
    customer: BioCode

    def __post_init__(self):
        if len(self.owner) != HALF_BITS or len(self.customer) != HALF_BITS:
            raise ValueError(f"payload halves must be {HALF_BITS} bits each")

    def bits(self) -> np.ndarray:
        return np.concatenate([self.owner.bits, self.customer.bits])


def build_mark(payload: Payload) -> Mark:
    """Lay the 512 payload bits into the mark 8 times.

    Copy t fills rows 8t..8t+7 row-major, columns rotated right by 8t.
    """
    rows = payload.bits().reshape(_COPY_ROWS, MARK_SIZE)
    blocks = [np.roll(rows, 8 * t, axis=1) for t in range(COPIES)]
    return Mark(np.vstack(blocks))


def decode_mark(mark: Mark):
    """Majority-vote the 8 copies back into a 512-bit payload.

    Returns (bits, confidence): bit j is 1 iff at least 5 of its copies read
    1 (a 4-4 tie gives 0); confidence j = |votes_1 - votes_0| / 8.
    """
    votes = np.zeros(PAYLOAD_BITS, dtype=np.int64)
    for t in range(COPIES):
        block = np.roll(mark.bits[_COPY_ROWS * t:_COPY_ROWS * (t + 1)], -8 * t, axis=1)
        votes += block.reshape(-1)
    bits = (votes > COPIES // 2).astype(np.uint8)
    confidence = np.abs(2 * votes - COPIES) / COPIES
    return bits, confidence


def decode_payload(mark: Mark) -> Payload:
    """Majority-decoded payload as two BioCodes (confidence discarded)."""
    bits, _ = decode_mark(mark)
    return Payload(BioCode(bits[:HALF_BITS]), BioCode(bits[HALF_BITS:]))


def _geometry(height: int, width: int, radius):
    tile_h = height // MARK_SIZE
    tile_w = width // MARK_SIZE
    if tile_h < _MIN_TILE or tile_w < _MIN_TILE:
        raise ImageTooSmall(
            f"image {height}x{width} is below the {_MIN_TILE * MARK_SIZE}px floor"
        )
    auto = 2 if min(tile_h, tile_w) >= _RADIUS2_TILE else 1
    if radius is None:
        radius = auto
    elif radius == 2 and auto < 2:
        raise CapacityError(
            f"radius-2 windows need {_RADIUS2_TILE}px tiles; image {height}x{width} "
            f"has {tile_h}x{tile_w} tiles"
        )
    elif radius not in (1, 2):
        raise ValueError("radius must be 1 or 2")
    anchor_rows = np.arange(MARK_SIZE) * tile_h + tile_h // 2
    anchor_cols = np.arange(MARK_SIZE) * tile_w + tile_w // 2
    return tile_h, tile_w, anchor_rows, anchor_cols, radius


def _summed_area(values: np.ndarray) -> np.ndarray:
    sat = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(values, axis=0, dtype=np.float64), axis=1, out=sat[1:, 1:])
    return sat


def _box_sums(sat, r0, r1, c0, c1):
    # Rectangle sums [r0, r1) x [c0, c1) for vectors of bounds, all pairs.
    return (sat[r1[:, None], c1[None, :]] - sat[r0[:, None], c1[None, :]]
            - sat[r1[:, None], c0[None, :]] + sat[r0[:, None], c0[None, :]])


def _anchor_means(pixels: np.ndarray, anchor_rows, anchor_cols, radius) -> np.ndarray:
    """Window means around every anchor, center pixel excluded, as a 64x64 grid."""
    sat = _summed_area(pixels)
    r0, r1 = anchor_rows - radius, anchor_rows + radius + 1
    c0, c1 = anchor_cols - radius, anchor_cols + radius + 1
    sums = _box_sums(sat, r0, r1, c0, c1)
    sums -= pixels[anchor_rows[:, None], anchor_cols[None, :]]
    return sums / ((2 * radius + 1) ** 2 - 1)


def _tile_nonuniformity(img: GrayImage, tile_h: int, tile_w: int) -> np.ndarray:
    """Mean LBP transition count per tile, normalized to [0, 1].

    Computed over each tile's pixels that have LBP codes (the image rim has
    none); tiles partition the image with the remainder folded into the
    last row/column of tiles.
    """
    trans = lbp_transitions(lbp_map(img)).astype(np.float64)
    sat = _summed_area(trans)

    def bounds(count, tile, extent):
        starts = np.arange(count) * tile
        ends = np.append(starts[1:], extent)
        # Pixel row p has its LBP code at map row p-1; clip to the interior.
        lo = np.maximum(starts, 1) - 1
        hi = np.minimum(ends, extent - 1) - 1
        return lo, hi

    r0, r1 = bounds(MARK_SIZE, tile_h, img.height)
    c0, c1 = bounds(MARK_SIZE, tile_w, img.width)
    sums = _box_sums(sat, r0, r1, c0, c1)
    counts = np.outer(r1 - r0, c1 - c0)
    return sums / counts / 8.0


def embed(img: GrayImage, mark: Mark, base_strength: int = DEFAULT_STRENGTH,
          radius: int | None = None) -> GrayImage:
    """Write one mark bit per tile at the tile-center anchor.

    The margin for tile (r, c) is delta = base_strength * (1 + u) with u the
    tile's LBP non-uniformity from the unmodified image: busier texture both
    hides and demands a stronger push. Bit 1 raises the anchor to at least
    ceil(mean + delta), bit 0 lowers it to at most floor(mean - delta);
    anchors already past the target are left alone. Only the 4096 anchor
    pixels can change, and values clamp to [0, 255] (a clamped anchor can
    lose its margin, which is why round-trip guarantees assume headroom).

    The window radius is 2 when tiles are at least 5px, else 1; forcing
    radius=2 below that raises CapacityError. Anchors sit at least one tile
    apart, so no anchor falls inside another's window and the means seen at
    extract time equal the ones used here.
    """
    if base_strength < 1:
        raise ValueError("base_strength must be at least 1")
    tile_h, tile_w, rows, cols, radius = _geometry(img.height, img.width, radius)
    pixels = img.pixels.astype(np.float64)
    means = _anchor_means(pixels, rows, cols, radius)
    delta = base_strength * (1.0 + _tile_nonuniformity(img, tile_h, tile_w))

    anchors = pixels[rows[:, None], cols[None, :]]
    raised = np.maximum(anchors, np.ceil(means + delta))
    lowered = np.minimum(anchors, np.floor(means - delta))
    new_vals = np.where(mark.bits == 1, raised, lowered)
    new_vals = np.clip(new_vals, 0, 255)

    out = img.pixels.copy()
    out[rows[:, None], cols[None, :]] = new_vals.astype(np.uint8)
    return GrayImage(out)


def extract(img: GrayImage, radius: int | None = None) -> Mark:
    """Read the mark back: bit = 1 iff anchor >= window mean (blind, key-free)."""
    _, _, rows, cols, radius = _geometry(img.height, img.width, radius)
    pixels = img.pixels.astype(np.float64)
    means = _anchor_means(pixels, rows, cols, radius)
    anchors = pixels[rows[:, None], cols[None, :]]
    return Mark((anchors >= means).astype(np.uint8))
