"""Ownership and right-of-use protocol.

The provider holds a 32-byte master seed. For the k-th sale of an image,
the one-time value otp(seed, k) = H^k(seed) seeds the owner BioCode, and
H(otp XOR image_identifier) is a commitment binding the sale to that exact
image without revealing the seed; hashed together with the customer's
password it seeds the customer BioCode. Both codes go into the embedded
mark. Verification recomputes a code from a fresh fingerprint capture and
compares it to the corresponding decoded mark half.

Sales are appended to a JSON-lines ledger, one record per line, never
rewritten; an advisory lock serializes concurrent appends.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .biohash import SEED_BYTES, BioCode, biohash, normalized_distance
from .errors import CorruptFile, InvalidK, LedgerWriteError, LengthMismatch, NoMarkReadable
from .identifier import ImageId, image_identifier
from .imaging import GrayImage
from .watermark import HALF_BITS, Payload, build_mark, decode_payload, embed, extract

DEFAULT_THRESHOLD = 0.25


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def otp(seed: bytes, k: int) -> bytes:
    """k-fold hash chain H^k(seed), H = SHA-256; knowing H^k gives H^(k+1) but not H^(k-1)."""
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    value = bytes(seed)
    for _ in range(k):
        value = _sha256(value)
    return value


def commitment(otp_value: bytes, img_id: ImageId) -> bytes:
    """H(otp XOR identifier); ties a sale to one image without exposing the otp chain."""
    if len(otp_value) != SEED_BYTES:
        raise LengthMismatch(f"otp value must be {SEED_BYTES} bytes")
    id_bytes = img_id.to_bytes()
    if len(id_bytes) != SEED_BYTES:
        raise LengthMismatch(f"identifier must be {8 * SEED_BYTES} bits")
    mixed = bytes(a ^ b for a, b in zip(otp_value, id_bytes))
    return _sha256(mixed)


def customer_seed(commitment_value: bytes, password: bytes) -> bytes:
    """Seed for the customer BioCode: H(commitment || password), two-factor by construction."""
    return _sha256(commitment_value + bytes(password))


@dataclass(frozen=True)
class SaleRecord:
    image_id: ImageId
    k: int
    owner_biocode: BioCode
    customer_biocode: BioCode
    issued_at: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "image_id": self.image_id.to_hex(),
                "k": self.k,
                "owner_biocode": self.owner_biocode.to_hex(),
                "customer_biocode": self.customer_biocode.to_hex(),
                "issued_at": self.issued_at,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "SaleRecord":
        try:
            obj = json.loads(line)
            return cls(
                image_id=ImageId.from_hex(obj["image_id"]),
                k=int(obj["k"]),
                owner_biocode=BioCode.from_hex(obj["owner_biocode"]),
                customer_biocode=BioCode.from_hex(obj["customer_biocode"]),
                issued_at=str(obj["issued_at"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptFile(f"bad ledger line: {exc}") from exc


class SaleLedger:
    """Append-only JSON-lines sale register backed by a file.

    Records are only ever appended; reading re-parses the file so several
    processes can share one ledger. Appends take an advisory lock.
    """

    def __init__(self, path):
        self.path = Path(path)

    def records(self) -> list[SaleRecord]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text(encoding="ascii").splitlines():
            if line.strip():
                out.append(SaleRecord.from_json(line))
        return out

    def for_image(self, img_id: ImageId) -> list[SaleRecord]:
        """Records for one image, ascending k."""
        return sorted(
            (r for r in self.records() if r.image_id == img_id), key=lambda r: r.k
        )

    def next_k(self, img_id: ImageId) -> int:
        ks = [r.k for r in self.records() if r.image_id == img_id]
        return max(ks) + 1 if ks else 1

    def append(self, record: SaleRecord) -> None:
        import fcntl

        try:
            with open(self.path, "a", encoding="ascii") as fh:
                fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
                try:
                    fh.write(record.to_json() + "\n")
                    fh.flush()
                finally:
                    fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
        except OSError as exc:
            raise LedgerWriteError(f"cannot append to {self.path}: {exc}") from exc


def _rfc3339_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_sale(img: GrayImage, owner_fc, customer_fc, password: bytes, master_seed: bytes,
              k: int, base_strength: int = 6, m: int = HALF_BITS,
              issued_at: str | None = None):
    """Build the k-th sale of `img` without touching any ledger.

    Returns (watermarked image, SaleRecord, Mark). The owner BioCode depends
    only on (owner_fc, seed, k), never on the image; the customer BioCode is
    bound to image, k and password via the commitment.
    """
    img_id = image_identifier(img)
    otp_k = otp(master_seed, k)
    owner_code = biohash(owner_fc, otp_k, m)
    cust_seed = customer_seed(commitment(otp_k, img_id), password)
    customer_code = biohash(customer_fc, cust_seed, m)
    mark = build_mark(Payload(owner_code, customer_code))
    marked = embed(img, mark, base_strength)
    record = SaleRecord(
        image_id=img_id,
        k=k,
        owner_biocode=owner_code,
        customer_biocode=customer_code,
        issued_at=issued_at if issued_at is not None else _rfc3339_now(),
    )
    return marked, record, mark


def issue(img: GrayImage, owner_fc, customer_fc, password: bytes, master_seed: bytes,
          ledger: SaleLedger, base_strength: int = 6, m: int = HALF_BITS,
          issued_at: str | None = None):
    """Watermark one sale of `img` and register it.

    k is one past the highest existing k for this image (1 for the first
    sale). Returns (watermarked image, appended SaleRecord).
    """
    k = ledger.next_k(image_identifier(img))
    marked, record, _ = make_sale(
        img, owner_fc, customer_fc, password, master_seed, k, base_strength, m, issued_at
    )
    ledger.append(record)
    return marked, record


def _decoded_half(suspect: GrayImage, which: str) -> BioCode:
    payload = decode_payload(extract(suspect))
    half = payload.owner if which == "owner" else payload.customer
    if np.all(half.bits == half.bits[0]):
        raise NoMarkReadable(f"decoded {which} half is constant; no usable mark")
    return half


@dataclass(frozen=True)
class OwnershipResult:
    matched: bool
    k: int | None
    distance: float | None


@dataclass(frozen=True)
class UsageResult:
    matched: bool
    distance: float


def verify_ownership(suspect: GrayImage, owner_fc, master_seed: bytes,
                     ledger: SaleLedger, threshold: float = DEFAULT_THRESHOLD,
                     m: int = HALF_BITS) -> OwnershipResult:
    """Does the suspect image carry a mark issued by this owner?

    The suspect's identifier selects candidate sale records; if an attack
    altered the identifier and nothing matches, every record is tried. For
    each candidate k the owner BioCode is recomputed from the owner's
    fingerprint and otp(master_seed, k) and compared to the decoded owner
    half of the extracted mark; the best (k, distance) wins.
    """
    half = _decoded_half(suspect, "owner")
    records = ledger.records()
    if not records:
        return OwnershipResult(False, None, None)
    suspect_id = image_identifier(suspect)
    candidates = [r for r in records if r.image_id == suspect_id] or records
    best_k = None
    best_d = None
    for k in sorted({r.k for r in candidates}):
        cand = biohash(owner_fc, otp(master_seed, k), m)
        d = normalized_distance(cand, half)
        if best_d is None or d < best_d:
            best_k, best_d = k, d
    return OwnershipResult(best_d <= threshold, best_k, best_d)


def verify_usage(suspect: GrayImage, customer_fc, password: bytes, otp_value: bytes,
                 threshold: float = DEFAULT_THRESHOLD, m: int = HALF_BITS) -> UsageResult:
    """Does the suspect image carry this customer's right-of-use mark?

    The provider supplies otp_value for the sale in question (the customer
    alone cannot run this); the customer supplies fingerprint and password.
    The customer seed is rebuilt from the suspect's own identifier, so the
    check binds customer, password and image at once.
    """
    half = _decoded_half(suspect, "customer")
    seed = customer_seed(commitment(otp_value, image_identifier(suspect)), password)
    cand = biohash(customer_fc, seed, m)
    d = normalized_distance(cand, half)
    return UsageResult(d <= threshold, d)
