"""Synthetic evaluation corpus: carrier images and fingerprint-like patterns.

Carriers are 512x512 textured fields built so the robustness benchmark can
exercise every attack without hidden fragility:

- intensities stay inside [57, 199], so contrast up to alpha=1.5 and
  luminance up to |beta|=32 clamp nothing even after embedding pushes
  anchors by up to ~13 gray levels;
- a broadband fine texture keeps mid/high DCT bins active, which is what
  lets single-anchor adjustments survive JPEG quantization;
- every identifier block mean is forced at least ID_MARGIN gray levels away
  from the global mean, so mild attacks never flip identifier bits (a
  flipped bit avalanches through the commitment and destroys the customer
  seed; the margin makes that a property of the attack, not of luck).

Fingerprints are oriented ridge fields: each user owns a (frequency,
orientation) pair spread out across users; samples of one user share the
pair up to small jitter, elastic warp and noise, giving tight same-user
FingerCode clusters and well-separated users.
"""

from __future__ import annotations

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from .errors import MissingFixture
from .fingercode import extract_fingercode
from .imaging import GrayImage, save_image

CARRIER_SIZE = 512
CARRIER_LO = 57
CARRIER_HI = 199
ID_MARGIN = 4.5
ID_GRID = 16

FP_SIZE = 256
N_USERS = 16
N_SAMPLES = 6
OWNER_USER = "owner"

def _rng(stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream))


def enforce_identifier_margins(pixels: np.ndarray, margin: float = ID_MARGIN,
                               lo: int = CARRIER_LO, hi: int = CARRIER_HI,
                               grid: int = ID_GRID, max_rounds: int = 500) -> np.ndarray:
    """Nudge identifier blocks until every block mean clears the global mean.

    Blocks whose mean sits within `margin` gray levels of the global mean
    get +-1 per round (away from the mean, ties upward), values clipped to
    [lo, hi]; the loop reconverges because the global mean barely moves.
    """
    h, w = pixels.shape
    bh, bw = h // grid, w // grid
    n_b = bh * bw
    n = h * w
    a = pixels.astype(np.int64)
    for _ in range(max_rounds):
        blocks = a.reshape(grid, bh, grid, bw)
        sums = blocks.sum(axis=(1, 3))
        total = a.sum()
        # mean_b - mean = (sums*n - total*n_b) / (n_b*n), in gray levels.
        diff = sums * n - total * n_b
        violating = np.abs(diff) < margin * n_b * n
        if not violating.any():
            break
        push = np.where(diff >= 0, 1, -1) * violating
        a = np.clip(a + np.kron(push, np.ones((bh, bw), dtype=np.int64)), lo, hi)
    else:
        raise MissingFixture("identifier margin enforcement did not converge")
    return a.astype(np.uint8)


def identifier_margin(img: GrayImage, grid: int = ID_GRID) -> float:
    """Smallest |block mean - global mean| over the identifier grid."""
    h, w = img.pixels.shape
    bh, bw = h // grid, w // grid
    blocks = img.pixels.astype(np.int64).reshape(grid, bh, grid, bw)
    sums = blocks.sum(axis=(1, 3))
    total = int(img.pixels.sum(dtype=np.int64))
    diff = np.abs(sums * (h * w) - total * (bh * bw))
    return float(diff.min()) / (bh * bw * h * w)


def make_carrier(index: int, size: int = CARRIER_SIZE, lo: int = CARRIER_LO,
                 hi: int = CARRIER_HI) -> GrayImage:
    """Deterministic textured carrier; index selects the whole composition.

    Low-frequency waves and blobs give each image structure; an unsmoothed
    noise field (std 16) supplies the broadband texture. The default [lo,
    hi] window leaves headroom for embedding plus contrast alpha=1.5 with
    zero clamped pixels; widen it to build fixtures that do clamp.
    """
    rng = _rng(1000 + index)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64) / size

    field = np.full((size, size), 128.0)
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.5, size=2)
        phase = rng.uniform(0.0, 2.0 * math.pi, size=2)
        amp = rng.uniform(5.0, 7.0)
        field += amp * np.cos(2 * math.pi * fx * x + phase[0])
        field += amp * np.cos(2 * math.pi * fy * y + phase[1])
    for _ in range(4):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        rad = rng.uniform(0.08, 0.2)
        amp = rng.uniform(-10.0, 10.0)
        field += amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * rad * rad))

    noise = rng.uniform(-1.0, 1.0, size=(size, size))
    field += np.clip(noise * (16.0 / noise.std()), -40.0, 40.0)
    base = np.clip(np.floor(field + 0.5), lo, hi).astype(np.uint8)
    return GrayImage(enforce_identifier_margins(base, lo=lo, hi=hi))


def user_names(n_users: int = N_USERS) -> list[str]:
    return [f"u{idx:02d}" for idx in range(n_users)]


def _user_params(n_users: int):
    """Per-user (orientation, frequency, bend) spread out so users separate.

    Orientations are evenly spaced over [0, pi); frequencies are log-spaced
    and assigned through a stride permutation so neighbors in angle land far
    apart in frequency. The upper frequency stays below 0.17 c/px: feature
    extraction halves a 256px print to its 128px working size, doubling the
    effective frequency, and anything past ~0.33 c/px there would alias and
    collapse distinct users onto near-identical feature vectors.
    Index n_users belongs to the owner.
    """
    total = n_users + 1
    perm = (np.arange(total) * 7) % total
    thetas = math.pi * (np.arange(total) + 0.5) / total
    freqs = 0.045 * (0.165 / 0.045) ** (perm / max(total - 1, 1))
    bends = 4.0 + 3.0 * ((np.arange(total) * 5) % total) / total
    return thetas, freqs, bends


def make_fingerprint(user_index: int, sample: int, size: int = FP_SIZE,
                     n_users: int = N_USERS) -> GrayImage:
    """Ridge pattern for one capture: user picks the pattern, sample jitters it."""
    thetas, freqs, bends = _user_params(n_users)
    theta, freq, bend = thetas[user_index], freqs[user_index], bends[user_index]

    rng = _rng(7_000_000 + 1000 * user_index + sample)
    theta = theta + rng.uniform(-0.018, 0.018)
    freq = freq * (1.0 + rng.uniform(-0.012, 0.012))
    phase0 = rng.uniform(0.0, 2.0 * math.pi)

    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    # Gentle elastic warp: low-frequency displacement of the coordinates.
    warp_amp = rng.uniform(0.8, 1.6)
    wx = warp_amp * np.sin(2 * math.pi * y / size * rng.uniform(1.0, 2.0)
                           + rng.uniform(0, 2 * math.pi))
    wy = warp_amp * np.sin(2 * math.pi * x / size * rng.uniform(1.0, 2.0)
                           + rng.uniform(0, 2 * math.pi))
    xs, ys = x + wx, y + wy

    u = xs * math.cos(theta) + ys * math.sin(theta)
    v = -xs * math.sin(theta) + ys * math.cos(theta)
    phase = 2 * math.pi * freq * (u + bend * np.sin(2 * math.pi * v / 180.0)) + phase0
    ridges = 128.0 + 45.0 * np.cos(phase)
    ridges += rng.normal(0.0, 4.0, size=ridges.shape)
    return GrayImage(np.clip(np.floor(ridges + 0.5), 0, 255).astype(np.uint8))


def write_fingercode_row(writer, user: str, sample: int, features: np.ndarray) -> None:
    writer.writerow([user, sample] + [repr(float(v)) for v in features])


def generate_corpus(outdir, n_carriers: int = 20, n_users: int = N_USERS,
                    n_samples: int = N_SAMPLES) -> dict:
    """Write carriers, fingerprint images, and the labeled FingerCode CSV.

    Layout: carriers/carrier_NN.pgm, fingerprints/<user>_sK.pgm, and
    fingercodes.csv with rows (user, sample, f0..f511); the provider's own
    prints appear under user 'owner'.
    """
    outdir = Path(outdir)
    carriers_dir = outdir / "carriers"
    prints_dir = outdir / "fingerprints"
    carriers_dir.mkdir(parents=True, exist_ok=True)
    prints_dir.mkdir(parents=True, exist_ok=True)

    carrier_paths = []
    for i in range(n_carriers):
        path = carriers_dir / f"carrier_{i:02d}.pgm"
        save_image(make_carrier(i), path)
        carrier_paths.append(path)

    csv_path = outdir / "fingercodes.csv"
    with open(csv_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "sample"] + [f"f{i}" for i in range(512)])
        for uidx, user in enumerate(user_names(n_users) + [OWNER_USER]):
            real_idx = uidx if user != OWNER_USER else n_users
            for s in range(n_samples):
                img = make_fingerprint(real_idx, s, n_users=n_users)
                save_image(img, prints_dir / f"{user}_s{s}.pgm")
                write_fingercode_row(writer, user, s, extract_fingercode(img).features)

    return {"carriers": carrier_paths, "fingerprints": prints_dir, "fingercodes": csv_path}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Generate the synthetic evaluation corpus (carriers, "
                    "fingerprints, FingerCode CSV)."
    )
    parser.add_argument("outdir", help="output directory")
    parser.add_argument("--carriers", type=int, default=20)
    parser.add_argument("--users", type=int, default=N_USERS)
    parser.add_argument("--samples", type=int, default=N_SAMPLES)
    args = parser.parse_args(argv)
    paths = generate_corpus(args.outdir, args.carriers, args.users, args.samples)
    print(f"wrote {len(paths['carriers'])} carriers and {paths['fingercodes']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
