import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioseal.errors import InvalidGrid
from bioseal.identifier import ImageId, id_distance, image_identifier
from bioseal.imaging import GrayImage

from conftest import carrier


def identifier_ref(img: GrayImage, rows: int, cols: int):
    """Loop oracle: exact integer block/global mean comparison."""
    h, w = img.pixels.shape
    bh, bw = h // rows, w // cols
    total = int(img.pixels.sum(dtype=np.int64))
    n = h * w
    bits = []
    for r in range(rows):
        for c in range(cols):
            y1 = h if r == rows - 1 else (r + 1) * bh
            x1 = w if c == cols - 1 else (c + 1) * bw
            blk = img.pixels[r * bh:y1, c * bw:x1].astype(np.int64)
            bits.append(1 if int(blk.sum()) * n >= total * blk.size else 0)
    return bits


def test_constant_image_is_all_ones():
    img = GrayImage(np.full((32, 32), 99, dtype=np.uint8))
    assert image_identifier(img).bits.tolist() == [1] * 256


def test_two_by_two_hand_example():
    # top half 255, bottom half 0; global mean sits between
    px = np.zeros((8, 8), dtype=np.uint8)
    px[:4] = 255
    img = GrayImage(px)
    ident = image_identifier(img, grid_rows=2, grid_cols=4)
    assert ident.bits.tolist() == [1, 1, 1, 1, 0, 0, 0, 0]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_loop_oracle(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    img = GrayImage(rng.integers(0, 256, size=(37, 29), dtype=np.uint8))
    ident = image_identifier(img, grid_rows=4, grid_cols=4)
    assert ident.bits.tolist() == identifier_ref(img, 4, 4)


def test_affine_invariance_without_clamping():
    img = carrier(0)
    base = image_identifier(img)
    # a*v + b kept inside [0, 255]: carrier range is [57, 199]
    for a, b in [(1.25, -20), (0.5, 30), (1.0, 40), (0.75, 10)]:
        remap = np.clip(np.floor(img.pixels * a + b + 0.5), 0, 255).astype(np.uint8)
        assert float(remap.min()) > 0 and float(remap.max()) < 255
        assert image_identifier(GrayImage(remap)) == base


def test_exact_tie_counts_as_one():
    # blocks alternate 10/20 -> global mean 15; a third value making a
    # block mean exactly equal to the global mean must set the bit
    px = np.array([[10, 20, 10, 20], [20, 10, 20, 10]], dtype=np.uint8)
    ident = image_identifier(GrayImage(np.kron(px, np.ones((4, 2), np.uint8))),
                             grid_rows=2, grid_cols=4)
    assert ident.bits.tolist() == [0, 1, 0, 1, 1, 0, 1, 0]
    tie = GrayImage(np.full((8, 8), 15, dtype=np.uint8))
    assert image_identifier(tie, grid_rows=2, grid_cols=4).bits.tolist() == [1] * 8


def test_grid_must_give_whole_bytes():
    img = GrayImage(np.zeros((16, 16), dtype=np.uint8))
    with pytest.raises(InvalidGrid):
        image_identifier(img, grid_rows=3, grid_cols=3)
    # 2x4 = 8 bits is fine
    assert len(image_identifier(img, grid_rows=2, grid_cols=4)) == 8


def test_hex_round_trip():
    ident = image_identifier(carrier(1))
    assert len(ident.to_hex()) == 64
    assert ImageId.from_hex(ident.to_hex()) == ident
    assert ident.to_bytes() == bytes.fromhex(ident.to_hex())


def test_id_distance():
    a = ImageId(np.zeros(16, dtype=np.uint8))
    bits = np.zeros(16, dtype=np.uint8)
    bits[:4] = 1
    assert id_distance(a, ImageId(bits)) == 0.25
    assert id_distance(a, a) == 0.0
    with pytest.raises(ValueError):
        id_distance(a, ImageId(np.zeros(8, dtype=np.uint8)))


def test_identifier_differs_across_carriers():
    ids = [image_identifier(carrier(i)) for i in range(4)]
    for i in range(4):
        for j in range(i + 1, 4):
            assert id_distance(ids[i], ids[j]) > 0.2
