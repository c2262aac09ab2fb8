"""Biometric image watermarking toolkit.

Embeds cancelable biometric templates (BioCodes) of an image's owner and
customer into the image as a blind 64x64 watermark, verifies ownership and
right of use from fresh fingerprint captures, and benchmarks robustness
(error bit rate, equal error rate) under a grid of image alterations.
"""

from .attacks import AttackSpec, apply_attack, parse_attack
from .biohash import (
    BioCode,
    VerifyResult,
    biohash,
    generate_projection,
    hamming,
    normalized_distance,
    verify,
)
from .errors import *  # noqa: F401,F403
from .evaluate import (
    EvalConfig,
    EvalReport,
    EvalRow,
    EerResult,
    ScoreSet,
    compute_eer,
    default_grid,
    ebr,
    load_config,
    run_evaluation,
)
from .fingercode import FingerCode, extract_fingercode
from .identifier import ImageId, id_distance, image_identifier
from .imaging import (
    GrayImage,
    block_means,
    lbp_code,
    lbp_map,
    load_image,
    local_mean,
    psnr,
    save_image,
)
from .protocol import (
    OwnershipResult,
    SaleLedger,
    SaleRecord,
    UsageResult,
    commitment,
    customer_seed,
    issue,
    make_sale,
    otp,
    verify_ownership,
    verify_usage,
)
from .watermark import Mark, Payload, build_mark, decode_mark, decode_payload, embed, extract

__version__ = "0.1.0"
