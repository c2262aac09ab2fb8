"""Cancelable binary templates from real feature vectors.

A secret 32-byte seed expands (via SplitMix64 on a SHA-256 digest of the
seed) into m pseudo-random n-vectors, which are orthonormalized and used
to project the feature vector; each projection is thresholded to produce
one bit. Changing the seed yields a statistically independent code, which
is what makes a leaked template revocable.

The projection basis is computed with plain numpy reductions (no BLAS
matmul) so that a given (seed, n, m) reproduces bit-identical bases from
run to run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import InvalidDims, LengthMismatch, RankDeficiency

SEED_BYTES = 32
_PRNG_DOMAIN = b"bioseal/prng/v1"
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_DEGENERATE_NORM = 1e-10
_MAX_RETRIES = 16


@dataclass(frozen=True)
class BioCode:
    """Fixed-length bit string produced by seeded projection of a feature vector."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("BioCode requires a non-empty 1-D bit array")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("BioCode bits must be 0 or 1")
        if arr.size % 8 != 0:
            raise ValueError("BioCode length must be a multiple of 8")
        arr = arr.copy()  # never freeze the caller's buffer
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        return isinstance(other, BioCode) and np.array_equal(self.bits, other.bits)

    def to_hex(self) -> str:
        """Lowercase hex, len(self)/4 chars; bit 0 = MSB of the first byte."""
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "BioCode":
        raw = bytes.fromhex(text)
        return cls(np.unpackbits(np.frombuffer(raw, dtype=np.uint8)))


def _check_seed(seed: bytes) -> bytes:
    seed = bytes(seed)
    if len(seed) != SEED_BYTES:
        raise ValueError(f"seed must be {SEED_BYTES} bytes, got {len(seed)}")
    return seed


def prng_uniform(seed: bytes, count: int, offset: int = 0) -> np.ndarray:
    """`count` deterministic floats in [-1, 1) from a SplitMix64 stream.

    The stream state is the first 8 bytes (big-endian) of
    SHA-256(domain || seed); draw i depends only on (seed, offset + i), so
    any segment of the stream can be generated independently.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    digest = hashlib.sha256(_PRNG_DOMAIN + _check_seed(seed)).digest()
    state0 = np.uint64(int.from_bytes(digest[:8], "big"))
    with np.errstate(over="ignore"):
        idx = np.arange(offset, offset + count, dtype=np.uint64)
        z = state0 + (idx + np.uint64(1)) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    # Top 53 bits -> [0, 1), then affine map onto [-1, 1).
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 * 2.0 - 1.0


def _project_coeffs(basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Row-wise <b_k, v> without BLAS: elementwise product + pairwise sum.
    return (basis * v).sum(axis=1)


def _subtract_projections(basis: np.ndarray, coeffs: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - (coeffs[:, None] * basis).sum(axis=0)


@lru_cache(maxsize=64)
def _basis_cached(seed: bytes, n: int, m: int) -> np.ndarray:
    rows = np.empty((m, n), dtype=np.float64)
    offset = 0
    built = 0
    failures = 0
    while built < m:
        v = prng_uniform(seed, n, offset)
        offset += n
        if built:
            b = rows[:built]
            # Classical Gram-Schmidt, two passes: the second pass removes the
            # residual correlation the first leaves behind at fp precision.
            u = _subtract_projections(b, _project_coeffs(b, v), v)
            u = _subtract_projections(b, _project_coeffs(b, u), u)
        else:
            u = v.copy()
        norm = float(np.sqrt((u * u).sum()))
        if norm < _DEGENERATE_NORM:
            failures += 1
            if failures >= _MAX_RETRIES:
                raise RankDeficiency(
                    f"could not draw {m} independent directions in R^{n} "
                    f"({failures} degenerate candidates in a row)"
                )
            continue
        failures = 0
        rows[built] = u / norm
        built += 1
    rows.setflags(write=False)
    return rows


def generate_projection(seed: bytes, n: int, m: int) -> np.ndarray:
    """m orthonormal rows of length n, a pure function of the seed.

    Candidates whose Gram-Schmidt residual is numerically zero (norm below
    1e-10) are discarded and replaced from further PRNG output;
    RankDeficiency is raised only after 16 consecutive degenerate
    candidates. The returned array is read-only and cached per (seed, n, m).
    """
    if n < 1 or m < 1 or m > n:
        raise InvalidDims(f"need 1 <= m <= n, got n={n} m={m}")
    return _basis_cached(_check_seed(seed), n, m)


def biohash(features, seed: bytes, m: int = 256, t: float = 0.0) -> BioCode:
    """Project the features onto the seeded orthonormal basis and binarize.

    Bit i is 1 iff <F, V_i> >= t. The default t = 0 makes the code invariant
    to positive rescaling of the feature vector. `features` may be a raw
    vector or anything with a ``features`` attribute.
    """
    f = np.asarray(getattr(features, "features", features), dtype=np.float64)
    if f.ndim != 1:
        raise InvalidDims("feature vector must be 1-D")
    if not np.all(np.isfinite(f)):
        raise ValueError("feature vector contains non-finite values")
    if m > f.size:
        raise InvalidDims(f"m={m} exceeds feature length {f.size}")
    basis = generate_projection(seed, f.size, m)
    proj = _project_coeffs(basis, f)
    return BioCode((proj >= t).astype(np.uint8))


def hamming(a: BioCode, b: BioCode) -> int:
    """Number of differing bit positions."""
    if len(a) != len(b):
        raise LengthMismatch(f"codes have lengths {len(a)} and {len(b)}")
    return int(np.count_nonzero(a.bits != b.bits))


def normalized_distance(a: BioCode, b: BioCode) -> float:
    """hamming / m, in [0, 1]."""
    return hamming(a, b) / len(a)


class VerifyResult(NamedTuple):
    accepted: bool
    distance: float


def verify(a: BioCode, b: BioCode, threshold: float = 0.25) -> VerifyResult:
    """Accept iff the normalized Hamming distance is at or below threshold.

    Equality accepts; the boundary is inclusive by definition here.
    """
    d = normalized_distance(a, b)
    return VerifyResult(d <= threshold, d)
