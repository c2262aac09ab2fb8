"""Command-line interface: one subcommand per pipeline stage.

Exit codes: 0 on success, 1 when a verification ran fine but did not match,
2 on usage or input errors. Stdout is machine-readable (JSON or CSV);
diagnostics go to stderr. Secrets (master seed, password) come from a flag,
else the environment (BIOSEAL_SEED / BIOSEAL_PASSWORD), else an interactive
prompt; the flag always wins.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from .attacks import apply_attack, parse_attack
from .biohash import SEED_BYTES, biohash
from .errors import BiosealError
from .fingercode import extract_fingercode
from .identifier import image_identifier
from .imaging import load_image, save_image
from .protocol import SaleLedger, issue, verify_ownership, verify_usage
from .watermark import Mark, extract

SEED_ENV = "BIOSEAL_SEED"
PASSWORD_ENV = "BIOSEAL_PASSWORD"


class UsageError(Exception):
    pass


def _resolve_secret(flag_value, env_name, prompt):
    if flag_value is not None:
        return flag_value
    if env_name in os.environ:
        return os.environ[env_name]
    if sys.stdin.isatty():
        return getpass.getpass(prompt)
    raise UsageError(f"missing secret: pass the flag or set {env_name}")


def _seed_bytes(flag_value) -> bytes:
    text = _resolve_secret(flag_value, SEED_ENV, "master seed (hex): ")
    try:
        seed = bytes.fromhex(text)
    except ValueError as exc:
        raise UsageError(f"seed is not valid hex: {exc}") from exc
    if len(seed) != SEED_BYTES:
        raise UsageError(f"seed must be {SEED_BYTES} bytes ({2 * SEED_BYTES} hex chars)")
    return seed


def _password_bytes(flag_value) -> bytes:
    return _resolve_secret(flag_value, PASSWORD_ENV, "password: ").encode("utf-8")


def _read_fingercode(path) -> np.ndarray:
    """One unlabeled CSV row of features, as written by the fingercode command."""
    for line in Path(path).read_text(encoding="ascii").splitlines():
        line = line.strip()
        if line:
            try:
                return np.array([float(v) for v in line.split(",")], dtype=np.float64)
            except ValueError as exc:
                raise UsageError(f"{path}: not a FingerCode CSV row: {exc}") from exc
    raise UsageError(f"{path}: empty FingerCode file")


def _print_json(obj) -> None:
    print(json.dumps(obj))


def _cmd_fingercode(args) -> int:
    fc = extract_fingercode(load_image(args.image))
    row = ",".join(repr(float(v)) for v in fc.features)
    if args.out:
        Path(args.out).write_text(row + "\n", encoding="ascii")
    print(row)
    return 0


def _cmd_biohash(args) -> int:
    features = _read_fingercode(args.fingercode)
    code = biohash(features, _seed_bytes(args.seed_hex), m=args.m, t=args.t)
    print(code.to_hex())
    return 0


def _cmd_id(args) -> int:
    print(image_identifier(load_image(args.image)).to_hex())
    return 0


def _cmd_issue(args) -> int:
    img = load_image(args.image)
    marked, record = issue(
        img,
        _read_fingercode(args.owner_fc),
        _read_fingercode(args.customer_fc),
        _password_bytes(args.password),
        _seed_bytes(args.seed_hex),
        SaleLedger(args.ledger),
        base_strength=args.strength,
        issued_at=args.issued_at,
    )
    save_image(marked, args.out)
    _print_json(
        {
            "image_id": record.image_id.to_hex(),
            "k": record.k,
            "owner_biocode": record.owner_biocode.to_hex(),
            "customer_biocode": record.customer_biocode.to_hex(),
            "issued_at": record.issued_at,
            "output": str(args.out),
        }
    )
    return 0


def _cmd_extract(args) -> int:
    mark = extract(load_image(args.image))
    if args.pbm:
        Path(args.pbm).write_bytes(mark.to_pbm())
    print(mark.to_hex())
    return 0


def _cmd_verify_owner(args) -> int:
    result = verify_ownership(
        load_image(args.image),
        _read_fingercode(args.fingercode),
        _seed_bytes(args.seed_hex),
        SaleLedger(args.ledger),
        threshold=args.threshold,
    )
    _print_json({"matched": result.matched, "k": result.k, "distance": result.distance})
    return 0 if result.matched else 1


def _cmd_verify_user(args) -> int:
    try:
        otp_value = bytes.fromhex(args.otp_hex)
    except ValueError as exc:
        raise UsageError(f"--otp-hex is not valid hex: {exc}") from exc
    result = verify_usage(
        load_image(args.image),
        _read_fingercode(args.fingercode),
        _password_bytes(args.password),
        otp_value,
        threshold=args.threshold,
    )
    _print_json({"matched": result.matched, "distance": result.distance})
    return 0 if result.matched else 1


def _cmd_attack(args) -> int:
    img = load_image(args.image)
    specs = [parse_attack(a) for a in args.attack]
    for spec in specs:
        img = apply_attack(img, spec)
    save_image(img, args.out)
    _print_json({"output": str(args.out), "attacks": [s.label() for s in specs]})
    return 0


def _cmd_evaluate(args) -> int:
    if args.config:
        cfg = ev.load_config(args.config)
        updates = {}
        if args.images:
            updates["images"] = args.images
        if args.fingercodes:
            updates["fingercodes"] = args.fingercodes
        if args.attack:
            updates["attack_grid"] = tuple(parse_attack(a) for a in args.attack)
        if args.thresholds is not None:
            updates["thresholds"] = args.thresholds
        if args.seed_hex is not None:
            updates["master_seed"] = _seed_bytes(args.seed_hex)
        if args.password is not None:
            updates["password"] = args.password.encode("utf-8")
        if args.strength is not None:
            updates["strength"] = args.strength
        if updates:
            import dataclasses

            cfg = dataclasses.replace(cfg, **updates)
    else:
        if not (args.images and args.fingercodes):
            raise UsageError("evaluate needs --config, or --images and --fingercodes")
        grid = tuple(parse_attack(a) for a in args.attack) if args.attack \
            else ev.default_grid()
        cfg = ev.EvalConfig(
            images=args.images,
            fingercodes=args.fingercodes,
            attack_grid=grid,
            thresholds=args.thresholds if args.thresholds is not None else 64,
            master_seed=_seed_bytes(args.seed_hex) if args.seed_hex is not None
            else ev.DEFAULT_MASTER_SEED,
            password=args.password.encode("utf-8") if args.password is not None
            else ev.DEFAULT_PASSWORD,
            strength=args.strength if args.strength is not None else 6,
            owner_user=args.owner_user,
        )
    report = ev.run_evaluation(cfg)
    csv_text = report.to_csv()
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(csv_text, encoding="ascii")
    plots_dir = args.plots_dir
    if plots_dir is None and args.out and not args.no_plots:
        plots_dir = Path(args.out).parent / "plots"
    if plots_dir is not None and not args.no_plots:
        from .plotting import save_report_figures

        save_report_figures(report, plots_dir, bins=cfg.thresholds)
    sys.stdout.write(csv_text)
    return 0


def _cmd_ledger_list(args) -> int:
    records = SaleLedger(args.ledger).records()
    if args.image_id:
        records = [r for r in records if r.image_id.to_hex() == args.image_id.lower()]
    _print_json(
        [
            {
                "image_id": r.image_id.to_hex(),
                "k": r.k,
                "owner_biocode": r.owner_biocode.to_hex(),
                "customer_biocode": r.customer_biocode.to_hex(),
                "issued_at": r.issued_at,
            }
            for r in sorted(records, key=lambda r: (r.image_id.to_hex(), r.k))
        ]
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bioseal",
        description="Biometric image watermarking: issue, verify and benchmark "
                    "ownership/right-of-use marks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fingercode", help="extract the 512-feature texture vector")
    p.add_argument("image")
    p.add_argument("--out", help="also write the CSV row to this file")
    p.set_defaults(func=_cmd_fingercode)

    p = sub.add_parser("biohash", help="seeded projection of a FingerCode to a BioCode")
    p.add_argument("fingercode", help="CSV row file from the fingercode command")
    p.add_argument("--seed-hex", help=f"32-byte seed as hex (else ${SEED_ENV}, else prompt)")
    p.add_argument("--m", type=int, default=256, help="output bits (default 256)")
    p.add_argument("--t", type=float, default=0.0, help="quantization threshold (default 0)")
    p.set_defaults(func=_cmd_biohash)

    p = sub.add_parser("id", help="content-derived 256-bit image identifier")
    p.add_argument("image")
    p.set_defaults(func=_cmd_id)

    p = sub.add_parser("issue", help="watermark a sale and append it to the ledger")
    p.add_argument("image")
    p.add_argument("--owner-fc", required=True, help="owner FingerCode CSV row")
    p.add_argument("--customer-fc", required=True, help="customer FingerCode CSV row")
    p.add_argument("--out", required=True, help="watermarked image path (.pgm/.png)")
    p.add_argument("--ledger", required=True)
    p.add_argument("--seed-hex")
    p.add_argument("--password")
    p.add_argument("--strength", type=int, default=6)
    p.add_argument("--issued-at", help="RFC 3339 timestamp override (default: now)")
    p.set_defaults(func=_cmd_issue)

    p = sub.add_parser("extract", help="blind-extract the 64x64 mark (hex on stdout)")
    p.add_argument("image")
    p.add_argument("--pbm", help="also write the mark as a binary PBM")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("verify-owner", help="test a suspect image against the ledger")
    p.add_argument("image")
    p.add_argument("--fingercode", required=True, help="owner FingerCode CSV row")
    p.add_argument("--ledger", required=True)
    p.add_argument("--seed-hex")
    p.add_argument("--threshold", type=float, default=0.25)
    p.set_defaults(func=_cmd_verify_owner)

    p = sub.add_parser("verify-user", help="test a customer's right of use")
    p.add_argument("image")
    p.add_argument("--fingercode", required=True, help="customer FingerCode CSV row")
    p.add_argument("--otp-hex", required=True, help="per-sale OTP from the provider")
    p.add_argument("--password")
    p.add_argument("--threshold", type=float, default=0.25)
    p.set_defaults(func=_cmd_verify_user)

    p = sub.add_parser("attack", help="apply one or more alterations")
    p.add_argument("image")
    p.add_argument("--attack", action="append", required=True,
                   metavar="KIND:P=V[,seed=N]",
                   help="e.g. jpeg:q=80 or crop:f=0.75 (repeatable, applied in order)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("evaluate", help="run the robustness benchmark (CSV + figures)")
    p.add_argument("--config", help="declarative JSON config; flags override it")
    p.add_argument("--images", help="directory of carrier .pgm fixtures")
    p.add_argument("--fingercodes", help="labeled corpus CSV (user,sample,f0..)")
    p.add_argument("--attack", action="append", metavar="KIND:P=V[,seed=N]",
                   help="grid point (repeatable; default: stock grid)")
    p.add_argument("--thresholds", type=int, help="histogram/sweep resolution (default 64)")
    p.add_argument("--seed-hex")
    p.add_argument("--password")
    p.add_argument("--strength", type=int)
    p.add_argument("--owner-user", default="owner")
    p.add_argument("--out", help="write the CSV here as well as stdout")
    p.add_argument("--plots-dir", help="figure directory (default: <out dir>/plots)")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ledger-list", help="dump ledger records as JSON")
    p.add_argument("--ledger", required=True)
    p.add_argument("--image-id", help="filter by identifier (hex)")
    p.set_defaults(func=_cmd_ledger_list)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BiosealError as exc:
        print(f"error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
