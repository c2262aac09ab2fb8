"""Gabor texture descriptor for fingerprint images.

A bank of scales x orientations Gabor filters is applied in the frequency
domain to the image (bilinearly resized to a fixed working size, mean
removed); for each filter the mean and standard deviation of the response
magnitude form two features. Defaults give 16 x 16 x 2 = 512 features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ImageTooSmall
from .imaging import GrayImage

WORK_SIZE = 128
FREQ_LOW = 0.05
FREQ_HIGH = 0.4
_MIN_INPUT = 32
_SQRT_2LN2 = math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class FingerCode:
    """Real feature vector of length 2 * scales * orientations."""

    features: np.ndarray
    source_id: str | None = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.features, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("FingerCode requires a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FingerCode entries must be finite")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "features", arr)

    def __len__(self) -> int:
        return self.features.size

    def __eq__(self, other) -> bool:
        return isinstance(other, FingerCode) and np.array_equal(self.features, other.features)


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Center-aligned bilinear resample to (out_h, out_w), float64 output."""
    src = np.asarray(pixels, dtype=np.float64)
    in_h, in_w = src.shape

    def axis_coords(n_out, n_in):
        # Sample at pixel centers of the output grid mapped into the input.
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1.0)
        lo = np.floor(pos).astype(np.int64)
        lo = np.minimum(lo, n_in - 2) if n_in > 1 else np.zeros_like(lo)
        return lo, pos - lo

    ry, fy = axis_coords(out_h, in_h)
    rx, fx = axis_coords(out_w, in_w)
    top = src[ry][:, rx] * (1 - fx) + src[ry][:, rx + 1] * fx
    bot = src[ry + 1][:, rx] * (1 - fx) + src[ry + 1][:, rx + 1] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


@lru_cache(maxsize=8)
def _filter_bank(size: int, scales: int, orientations: int) -> np.ndarray:
    """(scales, orientations, size, size) frequency-domain Gabor transfer functions.

    Center frequencies are log-spaced over [FREQ_LOW, FREQ_HIGH] cycles/pixel
    with radial bandwidths chosen so adjacent scales meet at half amplitude;
    angular bandwidth likewise spans pi/orientations at half amplitude. Each
    filter covers a single half-plane lobe, so the spatial response is
    complex and its magnitude gives a local texture energy envelope.
    """
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    rho = np.hypot(fx, fy)
    phi = np.arctan2(fy, fx)

    if scales > 1:
        a = (FREQ_HIGH / FREQ_LOW) ** (1.0 / (scales - 1))
        centers = FREQ_LOW * a ** np.arange(scales)
        sigma_r = (a - 1.0) * centers / ((a + 1.0) * _SQRT_2LN2)
    else:
        centers = np.array([FREQ_HIGH])
        sigma_r = np.array([FREQ_HIGH / (2.0 * _SQRT_2LN2)])
    sigma_t = (math.pi / (2.0 * orientations)) / _SQRT_2LN2

    bank = np.empty((scales, orientations, size, size), dtype=np.float64)
    for s in range(scales):
        radial = np.exp(-((rho - centers[s]) ** 2) / (2.0 * sigma_r[s] ** 2))
        for o in range(orientations):
            theta = math.pi * o / orientations
            delta = np.mod(phi - theta + math.pi, 2.0 * math.pi) - math.pi
            g = radial * np.exp(-(delta ** 2) / (2.0 * sigma_t ** 2))
            g[0, 0] = 0.0
            bank[s, o] = g
    bank.setflags(write=False)
    return bank


def extract_fingercode(img: GrayImage, scales: int = 16, orientations: int = 16) -> FingerCode:
    """Texture features: per filter, [mean, std] of response magnitude.

    Output layout interleaves the pair per filter, orientation fastest:
    index 2*(s*orientations + o) is the mean, the next entry the std.
    The working image has its mean subtracted first, so a global intensity
    offset leaves the features unchanged.
    """
    if img.height < _MIN_INPUT or img.width < _MIN_INPUT:
        raise ImageTooSmall(f"need at least {_MIN_INPUT}x{_MIN_INPUT}, got {img.height}x{img.width}")
    if scales < 1 or orientations < 1:
        raise ValueError("scales and orientations must be positive")
    work = resize_bilinear(img.pixels, WORK_SIZE, WORK_SIZE)
    work -= work.mean()
    spectrum = np.fft.fft2(work)
    bank = _filter_bank(WORK_SIZE, scales, orientations)

    features = np.empty(2 * scales * orientations, dtype=np.float64)
    idx = 0
    for s in range(scales):
        for o in range(orientations):
            mag = np.abs(np.fft.ifft2(spectrum * bank[s, o]))
            features[idx] = mag.mean()
            features[idx + 1] = mag.std()
            idx += 2
    return FingerCode(features)
