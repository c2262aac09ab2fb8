"""Deterministic parameterized image alterations for robustness evaluation.

Every attack preserves image dimensions and is a pure function of
(image, spec): noise-like attacks draw from a PCG64 generator seeded by
spec.rng_seed, so a spec reproduces the same altered image byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fftpack import dct, idct

from .errors import ConfigError, InvalidLevel
from .imaging import GrayImage

# ITU-T T.81 Annex K luminance quantization table.
_JPEG_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

# kind -> (parameter name, inclusive range)
KINDS = {
    "contrast": ("alpha", (0.25, 2.0)),
    "luminance": ("beta", (-64.0, 64.0)),
    "crop": ("f", (0.0, 1.0)),
    "tamper": ("f", (0.0, 1.0)),
    "gaussian_noise": ("sigma", (0.0, 32.0)),
    "salt_pepper": ("d", (0.0, 0.1)),
    "jpeg": ("q", (10.0, 100.0)),
}
_EXCLUSIVE_LOW = {"crop", "tamper"}


@dataclass(frozen=True)
class AttackSpec:
    """One alteration: kind, its level, and an rng seed where randomness is involved."""

    kind: str
    level: float
    rng_seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidLevel(f"unknown attack kind {self.kind!r}")
        name, (lo, hi) = KINDS[self.kind]
        level = float(self.level)
        if not (lo <= level <= hi) or (self.kind in _EXCLUSIVE_LOW and level == lo):
            raise InvalidLevel(f"{self.kind}: {name}={level} outside allowed range")

    def label(self) -> str:
        name, _ = KINDS[self.kind]
        text = f"{self.kind}:{name}={self.level:g}"
        if self.rng_seed is not None:
            text += f",seed={self.rng_seed}"
        return text


def parse_attack(text: str) -> AttackSpec:
    """Parse 'kind:param=value[,seed=N]', e.g. 'jpeg:q=80' or 'crop:f=0.75'."""
    kind, sep, rest = text.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown attack kind {kind!r}")
    name, _ = KINDS[kind]
    level = None
    seed = None
    if sep:
        for part in rest.split(","):
            key, eq, value = part.partition("=")
            key = key.strip()
            if not eq:
                raise ConfigError(f"malformed attack parameter {part!r}")
            try:
                if key in (name, "level"):
                    level = float(value)
                elif key == "seed":
                    seed = int(value)
                else:
                    raise ConfigError(f"attack {kind!r} takes {name!r} or 'seed', not {key!r}")
            except ValueError as exc:
                raise ConfigError(f"bad value in {part!r}: {exc}") from exc
    if level is None:
        raise ConfigError(f"attack {kind!r} needs {name}=<value>")
    return AttackSpec(kind, level, seed)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def _clamp_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0, 255).astype(np.uint8)


def _rng(spec: AttackSpec) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(spec.rng_seed or 0))


def _contrast(p: np.ndarray, alpha: float) -> np.ndarray:
    return _clamp_u8(_round_half_up(128.0 + alpha * (p.astype(np.float64) - 128.0)))


def _luminance(p: np.ndarray, beta: float) -> np.ndarray:
    return _clamp_u8(_round_half_up(p.astype(np.float64) + beta))


def _central_extent(extent: int, f: float) -> tuple[int, int]:
    keep = max(1, int(round(extent * math.sqrt(f))))
    start = (extent - keep) // 2
    return start, keep


def _crop(p: np.ndarray, f: float) -> np.ndarray:
    # Keep the central sqrt(f) band of each axis (area fraction f), zero the
    # border; dimensions stay fixed so blind extraction stays aligned.
    h, w = p.shape
    top, keep_h = _central_extent(h, f)
    left, keep_w = _central_extent(w, f)
    out = np.zeros_like(p)
    out[top:top + keep_h, left:left + keep_w] = p[top:top + keep_h, left:left + keep_w]
    return out


def _tamper(p: np.ndarray, f: float, spec: AttackSpec) -> np.ndarray:
    h, w = p.shape
    rect_h = max(1, int(round(h * math.sqrt(f))))
    rect_w = max(1, int(round(w * math.sqrt(f))))
    rng = _rng(spec)
    top = int(rng.integers(0, h - rect_h + 1))
    left = int(rng.integers(0, w - rect_w + 1))
    out = p.copy()
    out[top:top + rect_h, left:left + rect_w] = 128
    return out


def _gaussian(p: np.ndarray, sigma: float, spec: AttackSpec) -> np.ndarray:
    noise = _rng(spec).normal(0.0, sigma, size=p.shape) if sigma > 0 else 0.0
    return _clamp_u8(_round_half_up(p.astype(np.float64) + noise))


def _salt_pepper(p: np.ndarray, d: float, spec: AttackSpec) -> np.ndarray:
    out = p.copy()
    if d > 0:
        u = _rng(spec).random(p.shape)
        out[u < d / 2] = 0
        out[(u >= d / 2) & (u < d)] = 255
    return out


def _jpeg(p: np.ndarray, q: float) -> np.ndarray:
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    table = np.clip(np.floor((_JPEG_LUMA * scale + 50.0) / 100.0), 1, 255)
    h, w = p.shape
    ph, pw = -h % 8, -w % 8
    x = np.pad(p.astype(np.float64), ((0, ph), (0, pw)), mode="edge") - 128.0
    bh, bw = x.shape[0] // 8, x.shape[1] // 8
    blocks = x.reshape(bh, 8, bw, 8).transpose(0, 2, 1, 3)
    coef = dct(dct(blocks, axis=-1, norm="ortho"), axis=-2, norm="ortho")
    coef = np.round(coef / table) * table
    rec = idct(idct(coef, axis=-2, norm="ortho"), axis=-1, norm="ortho")
    rec = rec.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)[:h, :w] + 128.0
    return _clamp_u8(_round_half_up(rec))


def apply_attack(img: GrayImage, spec: AttackSpec) -> GrayImage:
    """Apply one attack; output has the same dimensions as the input."""
    p = img.pixels
    if spec.kind == "contrast":
        out = _contrast(p, spec.level)
    elif spec.kind == "luminance":
        out = _luminance(p, spec.level)
    elif spec.kind == "crop":
        out = _crop(p, spec.level)
    elif spec.kind == "tamper":
        out = _tamper(p, spec.level, spec)
    elif spec.kind == "gaussian_noise":
        out = _gaussian(p, spec.level, spec)
    elif spec.kind == "salt_pepper":
        out = _salt_pepper(p, spec.level, spec)
    elif spec.kind == "jpeg":
        out = _jpeg(p, spec.level)
    else:
        raise InvalidLevel(f"unknown attack kind {spec.kind!r}")
    return GrayImage(out)
