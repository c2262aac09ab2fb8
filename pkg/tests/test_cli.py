import json
import subprocess
import sys

import numpy as np
import pytest

from bioseal.biohash import biohash
from bioseal.cli import dispatch
from bioseal.identifier import image_identifier
from bioseal.imaging import save_image
from bioseal.protocol import otp
from bioseal.watermark import Mark

from conftest import MASTER_SEED, OWNER, PASSWORD, carrier, fingercode
from test_evaluate import small_corpus

SEED_HEX = MASTER_SEED.hex()


def write_fc(path, user, sample):
    vec = fingercode(user, sample)
    path.write_text(",".join(repr(float(v)) for v in vec) + "\n")
    return path


@pytest.fixture
def sale(tmp_path):
    """One issued sale on carrier 0 with all artifacts on disk."""
    img_path = tmp_path / "carrier.pgm"
    save_image(carrier(0), img_path)
    owner_fc = write_fc(tmp_path / "owner.fc", OWNER, 0)
    cust_fc = write_fc(tmp_path / "cust.fc", 2, 0)
    marked_path = tmp_path / "marked.pgm"
    ledger = tmp_path / "ledger.jsonl"
    rc = dispatch([
        "issue", str(img_path),
        "--owner-fc", str(owner_fc), "--customer-fc", str(cust_fc),
        "--out", str(marked_path), "--ledger", str(ledger),
        "--seed-hex", SEED_HEX, "--password", PASSWORD.decode(),
        "--issued-at", "2024-01-01T00:00:00Z",
    ])
    assert rc == 0
    return {
        "image": img_path, "marked": marked_path, "ledger": ledger,
        "owner_fc": owner_fc, "cust_fc": cust_fc, "dir": tmp_path,
    }


def test_id_prints_identifier(tmp_path, capsys):
    img_path = tmp_path / "c.pgm"
    save_image(carrier(1), img_path)
    assert dispatch(["id", str(img_path)]) == 0
    out = capsys.readouterr().out.strip()
    assert out == image_identifier(carrier(1)).to_hex()


def test_fingercode_then_biohash(tmp_path, capsys):
    from bioseal import fixtures as fx

    fp_path = tmp_path / "fp.pgm"
    save_image(fx.make_fingerprint(0, 0), fp_path)
    fc_path = tmp_path / "fp.fc"
    assert dispatch(["fingercode", str(fp_path), "--out", str(fc_path)]) == 0
    printed = capsys.readouterr().out.strip()
    assert fc_path.read_text().strip() == printed
    vec = np.array([float(v) for v in printed.split(",")])
    assert np.array_equal(vec, fingercode(0, 0))

    assert dispatch(["biohash", str(fc_path), "--seed-hex", SEED_HEX]) == 0
    hex_code = capsys.readouterr().out.strip()
    assert hex_code == biohash(fingercode(0, 0), MASTER_SEED).to_hex()


def test_issue_emits_record_json(sale, capsys):
    # the fixture already ran issue; run again on a fresh output to read stdout
    rc = dispatch([
        "issue", str(sale["image"]),
        "--owner-fc", str(sale["owner_fc"]), "--customer-fc", str(sale["cust_fc"]),
        "--out", str(sale["dir"] / "marked2.pgm"), "--ledger", str(sale["ledger"]),
        "--seed-hex", SEED_HEX, "--password", PASSWORD.decode(),
    ])
    assert rc == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["k"] == 2  # second sale of the same image
    assert rec["image_id"] == image_identifier(carrier(0)).to_hex()
    assert len(rec["owner_biocode"]) == 64
    assert rec["owner_biocode"] == biohash(fingercode(OWNER, 0), otp(MASTER_SEED, 2)).to_hex()


def test_verify_owner_positive(sale, capsys):
    rc = dispatch([
        "verify-owner", str(sale["marked"]),
        "--fingercode", str(sale["owner_fc"]), "--ledger", str(sale["ledger"]),
        "--seed-hex", SEED_HEX,
    ])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"matched": True, "k": 1, "distance": 0.0}


def test_verify_owner_negative_exit_1(sale, capsys):
    stranger = write_fc(sale["dir"] / "stranger.fc", 7, 0)
    rc = dispatch([
        "verify-owner", str(sale["marked"]),
        "--fingercode", str(stranger), "--ledger", str(sale["ledger"]),
        "--seed-hex", SEED_HEX,
    ])
    assert rc == 1
    out = json.loads(capsys.readouterr().out)
    assert out["matched"] is False and out["distance"] > 0.25


def test_verify_user_round_trip(sale, capsys):
    rc = dispatch([
        "verify-user", str(sale["marked"]),
        "--fingercode", str(sale["cust_fc"]),
        "--otp-hex", otp(MASTER_SEED, 1).hex(),
        "--password", PASSWORD.decode(),
    ])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["matched"] is True

    rc = dispatch([
        "verify-user", str(sale["marked"]),
        "--fingercode", str(sale["cust_fc"]),
        "--otp-hex", otp(MASTER_SEED, 1).hex(),
        "--password", "not the password",
    ])
    assert rc == 1


def test_attack_then_verify_survives(sale, capsys):
    attacked = sale["dir"] / "attacked.pgm"
    rc = dispatch([
        "attack", str(sale["marked"]),
        "--attack", "jpeg:q=90", "--attack", "luminance:beta=16",
        "--out", str(attacked),
    ])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["attacks"] == ["jpeg:q=90", "luminance:beta=16"]

    rc = dispatch([
        "verify-owner", str(attacked),
        "--fingercode", str(sale["owner_fc"]), "--ledger", str(sale["ledger"]),
        "--seed-hex", SEED_HEX,
    ])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["matched"] is True


def test_extract_hex_and_pbm(sale, capsys, tmp_path):
    pbm_path = tmp_path / "mark.pbm"
    rc = dispatch(["extract", str(sale["marked"]), "--pbm", str(pbm_path)])
    assert rc == 0
    hex_text = capsys.readouterr().out.strip()
    assert len(hex_text) == 1024
    assert Mark.from_pbm(pbm_path.read_bytes()) == Mark.from_hex(hex_text)


def test_ledger_list_and_filter(sale, capsys):
    rc = dispatch(["ledger-list", "--ledger", str(sale["ledger"])])
    assert rc == 0
    records = json.loads(capsys.readouterr().out)
    assert len(records) == 1 and records[0]["k"] == 1

    rc = dispatch(["ledger-list", "--ledger", str(sale["ledger"]),
                   "--image-id", "00" * 32])
    assert rc == 0
    assert json.loads(capsys.readouterr().out) == []


def test_seed_env_fallback(sale, capsys, monkeypatch):
    monkeypatch.setenv("BIOSEAL_SEED", SEED_HEX)
    rc = dispatch([
        "verify-owner", str(sale["marked"]),
        "--fingercode", str(sale["owner_fc"]), "--ledger", str(sale["ledger"]),
    ])
    assert rc == 0


def test_missing_secret_is_usage_error(sale, capsys, monkeypatch):
    monkeypatch.delenv("BIOSEAL_SEED", raising=False)
    monkeypatch.setattr(sys.stdin, "isatty", lambda: False)
    rc = dispatch([
        "verify-owner", str(sale["marked"]),
        "--fingercode", str(sale["owner_fc"]), "--ledger", str(sale["ledger"]),
    ])
    assert rc == 2
    assert "BIOSEAL_SEED" in capsys.readouterr().err


def test_bad_seed_hex_is_usage_error(sale, capsys):
    rc = dispatch([
        "verify-owner", str(sale["marked"]),
        "--fingercode", str(sale["owner_fc"]), "--ledger", str(sale["ledger"]),
        "--seed-hex", "zz",
    ])
    assert rc == 2
    rc = dispatch([
        "verify-owner", str(sale["marked"]),
        "--fingercode", str(sale["owner_fc"]), "--ledger", str(sale["ledger"]),
        "--seed-hex", "ab",
    ])
    assert rc == 2


def test_missing_image_is_error_exit_2(tmp_path, capsys):
    assert dispatch(["id", str(tmp_path / "ghost.pgm")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_attack_spec_exit_2(sale, capsys):
    rc = dispatch(["attack", str(sale["marked"]),
                   "--attack", "spin:x=1", "--out", str(sale["dir"] / "x.pgm")])
    assert rc == 2


def test_too_small_image_reports_bioseal_error(tmp_path, capsys):
    from bioseal.imaging import GrayImage

    small = tmp_path / "small.pgm"
    save_image(GrayImage(np.full((64, 64), 120, dtype=np.uint8)), small)
    rc = dispatch(["extract", str(small)])
    assert rc == 2
    assert "ImageTooSmall" in capsys.readouterr().err


def test_evaluate_cli_with_plots(tmp_path, capsys):
    imgs, fc = small_corpus(tmp_path)
    # nonexistent report/ dir: the CLI must create it, like the plots dir
    out_csv = tmp_path / "report" / "report.csv"
    rc = dispatch([
        "evaluate", "--images", str(imgs), "--fingercodes", str(fc),
        "--attack", "contrast:alpha=1", "--attack", "jpeg:q=90",
        "--out", str(out_csv),
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert out_csv.read_text() == stdout
    lines = stdout.splitlines()
    assert lines[0].startswith("attack_kind,level,")
    assert len(lines) == 3
    assert lines[1].startswith("contrast,1,0.000000,0.000000,")
    plots = out_csv.parent / "plots"
    assert sorted(p.name for p in plots.iterdir()) == [
        "ebr_vs_level.png", "eer_vs_level.png", "score_histogram.png"
    ]


def test_evaluate_cli_no_plots_and_determinism(tmp_path, capsys):
    imgs, fc = small_corpus(tmp_path)
    argv = [
        "evaluate", "--images", str(imgs), "--fingercodes", str(fc),
        "--attack", "salt_pepper:d=0.02,seed=3",
        "--out", str(tmp_path / "r.csv"), "--no-plots",
    ]
    assert dispatch(argv) == 0
    first = capsys.readouterr().out
    assert dispatch(argv) == 0
    assert capsys.readouterr().out == first
    assert not (tmp_path / "plots").exists()


def test_evaluate_cli_config_file(tmp_path, capsys):
    imgs, fc = small_corpus(tmp_path)
    cfg = tmp_path / "eval.json"
    cfg.write_text(json.dumps({
        "images": str(imgs),
        "fingercodes": str(fc),
        "attacks": ["contrast:alpha=1"],
    }))
    rc = dispatch(["evaluate", "--config", str(cfg), "--no-plots"])
    assert rc == 0
    assert "contrast,1,0.000000" in capsys.readouterr().out


def test_evaluate_requires_inputs(capsys):
    assert dispatch(["evaluate", "--no-plots"]) == 2
    assert "evaluate needs" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    img_path = tmp_path / "c.pgm"
    save_image(carrier(0), img_path)
    proc = subprocess.run(
        [sys.executable, "-m", "bioseal.cli", "id", str(img_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == image_identifier(carrier(0)).to_hex()
