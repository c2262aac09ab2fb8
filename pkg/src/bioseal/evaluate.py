"""Robustness benchmark: EBR and EER over a grid of attacks.

Each fixture carrier is sold once to a rotating customer, attacked at every
grid point, and measured three ways: mark survival (EBR between embedded
and extracted mark), identifier stability (fraction of flipped identifier
bits), and verification quality (EER over genuine and impostor distances
computed exactly as verify_usage would, from the attacked image).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import AttackSpec, apply_attack, parse_attack
from .biohash import biohash, normalized_distance
from .errors import ConfigError, EmptyScores, MissingFixture
from .identifier import id_distance, image_identifier
from .imaging import load_image
from .protocol import commitment, customer_seed, make_sale, otp
from .watermark import Mark, decode_payload, extract

DEFAULT_PASSWORD = b"correct horse"
DEFAULT_MASTER_SEED = bytes(range(32))


def ebr(original: Mark, decoded: Mark) -> float:
    """Error bit rate: fraction of the 4096 mark bits that differ."""
    return float(np.count_nonzero(original.bits != decoded.bits)) / original.bits.size


@dataclass(frozen=True)
class ScoreSet:
    """Genuine and impostor verification distances, all in [0, 1]."""

    genuine: tuple
    impostor: tuple

    def __post_init__(self):
        g = tuple(float(v) for v in self.genuine)
        i = tuple(float(v) for v in self.impostor)
        if any(not (0.0 <= v <= 1.0) for v in g + i):
            raise ValueError("scores must lie in [0, 1]")
        object.__setattr__(self, "genuine", g)
        object.__setattr__(self, "impostor", i)


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold_at_eer: float


def compute_eer(scores: ScoreSet) -> EerResult:
    """Equal error rate of a distance-based verifier.

    Sweeping the acceptance threshold t over the sorted unique scores,
    FAR(t) = fraction of impostor scores <= t and FRR(t) = fraction of
    genuine scores > t. FAR rises with t, FRR falls; the EER is where they
    meet, linearly interpolated between the two bracketing sweep points
    (the sweep starts from a virtual point FAR=0, FRR=1 below all scores).
    """
    if not scores.genuine or not scores.impostor:
        raise EmptyScores("both genuine and impostor scores are required")
    genuine = np.sort(np.asarray(scores.genuine, dtype=np.float64))
    impostor = np.sort(np.asarray(scores.impostor, dtype=np.float64))
    thresholds = np.unique(np.concatenate([genuine, impostor]))

    far = np.searchsorted(impostor, thresholds, side="right") / impostor.size
    frr = 1.0 - np.searchsorted(genuine, thresholds, side="right") / genuine.size
    far = np.concatenate([[0.0], far])
    frr = np.concatenate([[1.0], frr])
    sweep_t = np.concatenate([[thresholds[0]], thresholds])

    # First sweep index where the rising FAR has caught up with FRR.
    idx = int(np.argmax(far >= frr))
    if idx == 0:
        return EerResult(float(far[0]), float(sweep_t[0]))
    d_far = far[idx] - far[idx - 1]
    d_frr = frr[idx] - frr[idx - 1]
    denom = d_far - d_frr
    if denom == 0.0:
        s = 0.0
    else:
        s = (frr[idx - 1] - far[idx - 1]) / denom
    eer = far[idx - 1] + s * d_far
    t_at = sweep_t[idx - 1] + s * (sweep_t[idx] - sweep_t[idx - 1])
    return EerResult(float(eer), float(t_at))


@dataclass(frozen=True)
class EvalConfig:
    """Inputs of one benchmark run; everything that affects the CSV is here."""

    images: Path
    fingercodes: Path
    attack_grid: tuple
    thresholds: int = 64
    master_seed: bytes = DEFAULT_MASTER_SEED
    password: bytes = DEFAULT_PASSWORD
    strength: int = 6
    owner_user: str = "owner"

    def __post_init__(self):
        if not self.attack_grid:
            raise ConfigError("attack grid is empty")
        if self.thresholds < 2:
            raise ConfigError("thresholds must be at least 2")
        object.__setattr__(self, "images", Path(self.images))
        object.__setattr__(self, "fingercodes", Path(self.fingercodes))
        object.__setattr__(self, "attack_grid", tuple(self.attack_grid))


def default_grid() -> tuple:
    """The stock attack grid: a clean baseline plus all seven alterations."""
    specs = [AttackSpec("contrast", 1.0)]
    specs += [AttackSpec("contrast", a) for a in (0.5, 0.75, 1.25, 1.5)]
    specs += [AttackSpec("luminance", b) for b in (-64, -32, -16, 16, 32, 64)]
    specs += [AttackSpec("crop", f) for f in (0.9, 0.75, 0.5)]
    specs += [AttackSpec("tamper", f, 1) for f in (0.05, 0.1, 0.25)]
    specs += [AttackSpec("gaussian_noise", s, 2) for s in (2, 4, 8, 16)]
    specs += [AttackSpec("salt_pepper", d, 3) for d in (0.01, 0.02, 0.05, 0.1)]
    specs += [AttackSpec("jpeg", q) for q in (100, 95, 90, 80, 60, 40, 20)]
    return tuple(specs)


def load_config(path) -> EvalConfig:
    """Read the declarative JSON config (see README for the schema)."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        grid = tuple(parse_attack(a) for a in obj["attacks"]) if "attacks" in obj \
            else default_grid()
        return EvalConfig(
            images=obj["images"],
            fingercodes=obj["fingercodes"],
            attack_grid=grid,
            thresholds=int(obj.get("thresholds", 64)),
            master_seed=bytes.fromhex(obj["master_seed_hex"])
            if "master_seed_hex" in obj else DEFAULT_MASTER_SEED,
            password=obj.get("password", DEFAULT_PASSWORD.decode("ascii")).encode("utf-8"),
            strength=int(obj.get("strength", 6)),
            owner_user=obj.get("owner_user", "owner"),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad config field: {exc}") from exc


@dataclass(frozen=True)
class EvalRow:
    attack_kind: str
    level: float
    mean_ebr: float
    std_ebr: float
    eer: float
    n_genuine: int
    n_impostor: int
    identifier_flip_rate: float


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    score_sets: tuple = field(compare=False)

    def to_csv(self) -> str:
        lines = ["attack_kind,level,mean_ebr,std_ebr,eer,n_genuine,n_impostor,"
                 "identifier_flip_rate"]
        for r in self.rows:
            lines.append(
                f"{r.attack_kind},{r.level:g},{r.mean_ebr:.6f},{r.std_ebr:.6f},"
                f"{r.eer:.6f},{r.n_genuine},{r.n_impostor},{r.identifier_flip_rate:.6f}"
            )
        return "\n".join(lines) + "\n"


def load_fingercode_csv(path) -> dict:
    """Labeled corpus CSV (user, sample, f0..) -> {user: [vector per sample]}."""
    import csv as _csv

    users: dict[str, list] = {}
    try:
        with open(path, newline="", encoding="ascii") as fh:
            reader = _csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:2] != ["user", "sample"]:
                raise ConfigError(f"{path}: expected header user,sample,f0,...")
            for row in reader:
                if not row:
                    continue
                user, sample = row[0], int(row[1])
                vec = np.array([float(v) for v in row[2:]], dtype=np.float64)
                users.setdefault(user, []).append((sample, vec))
    except OSError as exc:
        raise MissingFixture(f"cannot read fingercodes: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad fingercode row in {path}: {exc}") from exc
    return {
        user: [vec for _, vec in sorted(entries)] for user, entries in users.items()
    }


def run_evaluation(cfg: EvalConfig) -> EvalReport:
    """Benchmark the full pipeline over the attack grid; deterministic.

    Per carrier: one sale (k=1) to customer user i mod U, enrolled with
    that user's sample 0. Per (attack, carrier): EBR between the embedded
    and extracted mark, identifier bit-flip fraction, then verification
    scores against the decoded customer half with the customer seed rebuilt
    from the attacked image (exactly the verify_usage path). Genuine scores
    probe the enrolled user's remaining samples; impostor scores probe the
    following users, one sample each, keeping the two sets the same size.
    """
    carrier_paths = sorted(Path(cfg.images).glob("*.pgm"))
    if not carrier_paths:
        raise MissingFixture(f"no .pgm carriers under {cfg.images}")
    corpus = load_fingercode_csv(cfg.fingercodes)
    if cfg.owner_user not in corpus:
        raise ConfigError(f"owner user {cfg.owner_user!r} missing from corpus")
    customers = sorted(u for u in corpus if u != cfg.owner_user)
    if not customers:
        raise ConfigError("corpus has no customer users")

    owner_fc = corpus[cfg.owner_user][0]
    otp_1 = otp(cfg.master_seed, 1)

    sales = []
    for i, path in enumerate(carrier_paths):
        img = load_image(path)
        user = customers[i % len(customers)]
        marked, record, mark = make_sale(
            img, owner_fc, corpus[user][0], cfg.password, cfg.master_seed,
            k=1, base_strength=cfg.strength, issued_at="1970-01-01T00:00:00Z",
        )
        sales.append((marked, record, mark, user, i % len(customers)))

    rows = []
    score_sets = []
    for spec in cfg.attack_grid:
        ebrs = []
        flips = []
        genuine = []
        impostor = []
        for marked, record, mark, user, uidx in sales:
            attacked = apply_attack(marked, spec)
            extracted = extract(attacked)
            ebrs.append(ebr(mark, extracted))
            attacked_id = image_identifier(attacked)
            flips.append(id_distance(attacked_id, record.image_id))

            half = decode_payload(extracted).customer
            seed = customer_seed(commitment(otp_1, attacked_id), cfg.password)
            samples = corpus[user]
            for probe in samples[1:]:
                genuine.append(normalized_distance(biohash(probe, seed), half))
            for t in range(len(samples) - 1):
                other = customers[(uidx + 1 + t) % len(customers)]
                if other == user:
                    continue
                probe = corpus[other][t % len(corpus[other])]
                impostor.append(normalized_distance(biohash(probe, seed), half))

        scores = ScoreSet(tuple(genuine), tuple(impostor))
        score_sets.append(scores)
        rows.append(
            EvalRow(
                attack_kind=spec.kind,
                level=float(spec.level),
                mean_ebr=float(np.mean(ebrs)),
                std_ebr=float(np.std(ebrs)),
                eer=compute_eer(scores).eer,
                n_genuine=len(genuine),
                n_impostor=len(impostor),
                identifier_flip_rate=float(np.mean(flips)),
            )
        )
    return EvalReport(tuple(rows), tuple(score_sets))
