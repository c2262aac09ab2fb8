import json

import numpy as np
import pytest

from bioseal.attacks import AttackSpec
from bioseal.errors import ConfigError, EmptyScores, MissingFixture
from bioseal.evaluate import (
    EvalConfig,
    EvalReport,
    EvalRow,
    ScoreSet,
    compute_eer,
    default_grid,
    ebr,
    load_config,
    load_fingercode_csv,
    run_evaluation,
)
from bioseal.imaging import save_image
from bioseal.watermark import Mark

from conftest import carrier, fingercode
from bioseal import fixtures as fx


def test_ebr_counts_bit_flips():
    rng = np.random.Generator(np.random.PCG64(0))
    bits = rng.integers(0, 2, size=(64, 64), dtype=np.uint8)
    a = Mark(bits)
    assert ebr(a, a) == 0.0
    assert ebr(a, Mark(1 - bits)) == 1.0
    one = bits.copy()
    one[5, 7] ^= 1
    assert ebr(a, Mark(one)) == 1 / 4096
    assert ebr(Mark(one), a) == 1 / 4096


def test_score_set_validation():
    ScoreSet((0.0, 1.0), (0.5,))
    with pytest.raises(ValueError):
        ScoreSet((1.1,), (0.5,))
    with pytest.raises(ValueError):
        ScoreSet((0.5,), (-0.01,))


# --- EER -------------------------------------------------------------------


def eer_oracle(genuine, impostor):
    """Exhaustive sweep in plain Python; same crossing/interpolation rule."""
    pts = [(0.0, 1.0)]
    for t in sorted(set(genuine) | set(impostor)):
        far = sum(1 for s in impostor if s <= t) / len(impostor)
        frr = sum(1 for s in genuine if s > t) / len(genuine)
        pts.append((far, frr))
    for i, (far, frr) in enumerate(pts):
        if far >= frr:
            if i == 0:
                return far
            far0, frr0 = pts[i - 1]
            d_far, d_frr = far - far0, frr - frr0
            denom = d_far - d_frr
            s = 0.0 if denom == 0 else (frr0 - far0) / denom
            return far0 + s * d_far
    raise AssertionError("FAR reaches 1 and FRR reaches 0; a crossing must exist")


def test_eer_perfect_separation():
    res = compute_eer(ScoreSet((0.05, 0.1, 0.15), (0.7, 0.8, 0.9)))
    assert res.eer == 0.0


def test_eer_worked_example():
    # FAR catches FRR between t=0.2 (FAR 0, FRR 1/3) and t=0.25 (FAR 1/3,
    # FRR 1/3): crossing interpolates to exactly 1/3 at t=0.25
    res = compute_eer(ScoreSet((0.1, 0.2, 0.3), (0.25, 0.35, 0.45)))
    assert res.eer == pytest.approx(1 / 3, abs=1e-12)
    assert res.threshold_at_eer == pytest.approx(0.25, abs=1e-12)


def test_eer_identical_distributions():
    scores = tuple(np.linspace(0.1, 0.9, 9))
    res = compute_eer(ScoreSet(scores, scores))
    assert res.eer == pytest.approx(0.5, abs=0.06)


def test_eer_swapped_populations_is_high():
    # impostors scoring lower than genuines: the verifier is inverted
    res = compute_eer(ScoreSet((0.7, 0.8, 0.9), (0.1, 0.2, 0.3)))
    assert res.eer == 1.0


def test_eer_requires_scores():
    with pytest.raises(EmptyScores):
        compute_eer(ScoreSet((), (0.5,)))
    with pytest.raises(EmptyScores):
        compute_eer(ScoreSet((0.5,), ()))


def test_eer_matches_oracle_on_random_sets():
    rng = np.random.Generator(np.random.PCG64(42))
    for _ in range(100):
        n_g = int(rng.integers(1, 50))
        n_i = int(rng.integers(1, 50))
        # overlapping populations, quantized so ties across sets do occur
        genuine = np.round(rng.beta(2, 5, n_g), 2)
        impostor = np.round(rng.beta(5, 2, n_i), 2)
        got = compute_eer(ScoreSet(tuple(genuine), tuple(impostor)))
        want = eer_oracle(genuine.tolist(), impostor.tolist())
        assert abs(got.eer - want) <= 1e-12


def test_eer_single_scores():
    assert compute_eer(ScoreSet((0.2,), (0.8,))).eer == 0.0
    assert compute_eer(ScoreSet((0.8,), (0.2,))).eer == 1.0
    # tie: the single threshold accepts both
    assert compute_eer(ScoreSet((0.5,), (0.5,))).eer == pytest.approx(0.5)


# --- config ------------------------------------------------------------------


def test_eval_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        EvalConfig(images=tmp_path, fingercodes=tmp_path / "f.csv", attack_grid=())
    with pytest.raises(ConfigError):
        EvalConfig(images=tmp_path, fingercodes=tmp_path / "f.csv",
                   attack_grid=(AttackSpec("jpeg", 80),), thresholds=1)


def test_default_grid_shape():
    grid = default_grid()
    assert len(grid) == 32
    assert grid[0] == AttackSpec("contrast", 1.0)  # clean baseline first
    kinds = {s.kind for s in grid}
    assert kinds == {"contrast", "luminance", "crop", "tamper",
                     "gaussian_noise", "salt_pepper", "jpeg"}


def test_load_config_full_and_defaults(tmp_path):
    cfg_path = tmp_path / "eval.json"
    cfg_path.write_text(json.dumps({
        "images": "imgs",
        "fingercodes": "fc.csv",
        "attacks": ["jpeg:q=80", "crop:f=0.75"],
        "thresholds": 32,
        "master_seed_hex": "ab" * 32,
        "password": "pw",
        "strength": 7,
        "owner_user": "boss",
    }))
    cfg = load_config(cfg_path)
    assert cfg.attack_grid == (AttackSpec("jpeg", 80), AttackSpec("crop", 0.75))
    assert cfg.master_seed == bytes([0xAB]) * 32
    assert cfg.password == b"pw"
    assert (cfg.thresholds, cfg.strength, cfg.owner_user) == (32, 7, "boss")

    minimal = tmp_path / "min.json"
    minimal.write_text(json.dumps({"images": "imgs", "fingercodes": "fc.csv"}))
    cfg = load_config(minimal)
    assert cfg.attack_grid == default_grid()
    assert cfg.owner_user == "owner"


def test_load_config_errors(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ConfigError):
        load_config(missing)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    incomplete = tmp_path / "inc.json"
    incomplete.write_text(json.dumps({"images": "imgs"}))
    with pytest.raises(ConfigError):
        load_config(incomplete)


def test_load_fingercode_csv(tmp_path):
    path = tmp_path / "fc.csv"
    path.write_text(
        "user,sample,f0,f1\n"
        "ann,1,0.5,1.5\n"
        "ann,0,0.25,1.25\n"
        "bob,0,2.0,3.0\n"
    )
    corpus = load_fingercode_csv(path)
    assert sorted(corpus) == ["ann", "bob"]
    # samples come back ordered by sample index, not file order
    assert np.allclose(corpus["ann"][0], [0.25, 1.25])
    assert np.allclose(corpus["ann"][1], [0.5, 1.5])

    with pytest.raises(MissingFixture):
        load_fingercode_csv(tmp_path / "none.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        load_fingercode_csv(bad)


def test_report_csv_formatting():
    row = EvalRow("jpeg", 80.0, 0.1234567, 0.01, 1 / 3, 100, 100, 0.0)
    report = EvalReport((row,), (ScoreSet((0.1,), (0.9,)),))
    lines = report.to_csv().splitlines()
    assert lines[0] == ("attack_kind,level,mean_ebr,std_ebr,eer,n_genuine,"
                        "n_impostor,identifier_flip_rate")
    assert lines[1] == "jpeg,80,0.123457,0.010000,0.333333,100,100,0.000000"


# --- pipeline ----------------------------------------------------------------


def small_corpus(tmp_path, n_carriers=2, n_users=3, n_samples=3):
    imgs = tmp_path / "imgs"
    imgs.mkdir()
    for i in range(n_carriers):
        save_image(carrier(i), imgs / f"carrier_{i:02d}.pgm")
    rows = ["user,sample," + ",".join(f"f{j}" for j in range(512))]
    names = fx.user_names(n_users) + ["owner"]
    for u, name in enumerate(names):
        uidx = fx.N_USERS if name == "owner" else u
        for s in range(n_samples):
            vec = fingercode(uidx, s)
            rows.append(f"{name},{s}," + ",".join(repr(float(v)) for v in vec))
    fc = tmp_path / "fingercodes.csv"
    fc.write_text("\n".join(rows) + "\n")
    return imgs, fc


def test_run_evaluation_identity_and_jpeg(tmp_path):
    imgs, fc = small_corpus(tmp_path)
    cfg = EvalConfig(
        images=imgs, fingercodes=fc,
        attack_grid=(AttackSpec("contrast", 1.0), AttackSpec("jpeg", 90)),
    )
    report = run_evaluation(cfg)
    assert len(report.rows) == 2
    clean, jpeg = report.rows
    assert clean.attack_kind == "contrast" and clean.level == 1.0
    assert clean.mean_ebr == 0.0 and clean.std_ebr == 0.0
    assert clean.identifier_flip_rate == 0.0
    assert clean.eer == 0.0
    assert clean.n_genuine == clean.n_impostor == 2 * 2  # carriers x (samples-1)
    assert jpeg.mean_ebr < 0.10
    assert jpeg.eer <= 0.10


def test_run_evaluation_deterministic(tmp_path):
    imgs, fc = small_corpus(tmp_path)
    cfg = EvalConfig(
        images=imgs, fingercodes=fc,
        attack_grid=(AttackSpec("contrast", 1.0), AttackSpec("tamper", 0.1, 1)),
    )
    a = run_evaluation(cfg).to_csv()
    b = run_evaluation(cfg).to_csv()
    assert a == b


def test_run_evaluation_missing_fixtures(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    _, fc = small_corpus(tmp_path, n_carriers=1)
    cfg = EvalConfig(images=empty, fingercodes=fc,
                     attack_grid=(AttackSpec("contrast", 1.0),))
    with pytest.raises(MissingFixture):
        run_evaluation(cfg)


def test_run_evaluation_owner_must_exist(tmp_path):
    imgs, fc = small_corpus(tmp_path, n_carriers=1)
    cfg = EvalConfig(images=imgs, fingercodes=fc,
                     attack_grid=(AttackSpec("contrast", 1.0),),
                     owner_user="ghost")
    with pytest.raises(ConfigError):
        run_evaluation(cfg)
