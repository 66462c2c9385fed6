import json

import numpy as np
import pytest
from scipy import stats

import brainage


def test_families():
    assert len(brainage.families) == 10
    assert "GBDT" in brainage.families


def test_feature_measures():
    rng = np.random.default_rng(3)
    white = rng.standard_normal(10000)
    assert abs(brainage.higuchi_fd(white) - 2.0) <= 0.1
    assert abs(brainage.hurst_exponent(white) - 0.5) <= 0.1
    t = np.arange(2500) / 250.0
    assert abs(brainage.higuchi_fd(np.sin(2 * np.pi * 5 * t)) - 1.0) <= 0.05
    p = brainage.band_powers(np.sin(2 * np.pi * 10 * t), 250.0)
    assert set(p) == {"delta", "theta", "alpha", "beta", "omega"}
    assert p["alpha"] >= 50 * p["beta"]
    slope = brainage.psd_regression(np.cumsum(rng.standard_normal(250 * 60)), 250.0, 2.0, 30.0)[1]
    assert abs(slope + 2.0) <= 0.3


def test_spearman_matches_scipy_with_ties():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.integers(0, 4, 15).astype(float)
        b = rng.standard_normal(15)
        rho, degenerate = brainage.spearman(a, b)
        if degenerate:
            continue
        assert abs(rho - stats.spearmanr(a, b).statistic) <= 1e-12


def test_exact_shapley_of_a_linear_model():
    rng = np.random.default_rng(7)
    w = np.array([1.5, -2.0, 0.25, 3.0])
    bg = rng.standard_normal((6, 4))
    x = rng.standard_normal(4)
    phi = brainage.exact_shapley(lambda rows: rows @ w + 1.0, bg, x)
    np.testing.assert_allclose(phi, w * (x - bg.mean(axis=0)), atol=1e-12)


def test_errors_carry_the_code():
    with pytest.raises(brainage.BrainageError, match="length"):
        brainage.spearman([1.0, 2.0], [1.0, 2.0, 3.0])


def test_small_pipeline(tmp_path):
    corpus = tmp_path / "corpus"
    manifest = brainage.synth(corpus, n_subjects=12, channels=32, seed=4, ec_seconds=8.0, eo_seconds=4.0)
    assert len(manifest["subjects"]) == 12

    config = {
        "corpus": "corpus",
        "montage": "corpus/montage.json",
        "regions": "corpus/regions.json",
        "variant": "12-EC",
        "seed": 4,
        "output": "out",
        "models": {"families": ["Lasso", "GBDT"], "budget": 2, "folds": 3},
        "explain": {"background_size": 4, "max_samples": 4},
    }
    (tmp_path / "exp.json").write_text(json.dumps(config))
    m = brainage.run(tmp_path / "exp.json")
    assert [s["name"] for s in m["stages"]] == ["preprocess", "extract", "train", "explain", "agree", "report"]
    again = brainage.run(tmp_path / "exp.json")
    assert all(s["skipped"] for s in again["stages"])

    out = tmp_path / "out"
    fm = brainage.read_features(out / "features" / "features.csv")
    assert fm["rows"].shape == (12, len(fm["columns"]))
    ages = brainage.predict(out / "models" / "Lasso.json", out / "features" / "features.csv")
    assert ages.shape == (12,)

    brainage.summarize([out], tmp_path / "summary.csv")
    header = (tmp_path / "summary.csv").read_text(encoding="utf-8").splitlines()[0].split(",")
    assert header == ["family", "12-EC", "12-EC_mean", "12-EC_std", "best_variant", "best_family"]

    brainage.render("ranked_bars", out / "importance" / "GBDT_band.json", tmp_path / "bars.svg")
    assert "<svg" in (tmp_path / "bars.svg").read_text()
    with pytest.raises(brainage.BrainageError):
        brainage.render("ranked_bars", out / "agreement" / "band.csv", tmp_path / "bad.svg")
    assert not (tmp_path / "bad.svg").exists()
