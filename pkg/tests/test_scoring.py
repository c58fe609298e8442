import numpy as np
import pytest

from stcnet.data import VideoSequence
from stcnet.generator import GeneratorConfig, GeneratorParams
from stcnet.scoring import (
    PSNR_CAP,
    ScoreSeries,
    accumulated_regular_score,
    anomaly_scores,
    normalize_scores,
    predict_video_windows,
    psnr,
)


def test_psnr_known_value():
    x = np.zeros((4, 4))
    x_hat = np.full((4, 4), 0.5)
    # peak 0.5, mse 0.25 -> 10 log10(1) = 0
    assert psnr(x, x_hat) == pytest.approx(0.0, abs=1e-12)
    x_hat[0, 0] = 1.0
    mse = np.mean((x - x_hat) ** 2)
    assert psnr(x, x_hat) == pytest.approx(10 * np.log10(1.0 / mse))


def test_psnr_cap_and_peak_floor():
    x = np.random.default_rng(0).random((3, 3))
    assert psnr(x, x) == PSNR_CAP
    dark = np.zeros((3, 3))
    # peak floor 1e-3 applies when the prediction is all black
    assert psnr(np.full((3, 3), 0.1), dark) == pytest.approx(10 * np.log10(1e-6 / 0.01))
    with pytest.raises(ValueError):
        psnr(np.zeros(3), np.zeros(4))


def test_normalize_endpoints_exact():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = rng.normal(30, 5, size=rng.integers(2, 60))
        s = normalize_scores(p)
        assert s.min() == 0.0 and s.max() == 1.0
        assert np.all((s >= 0) & (s <= 1))
        assert s[p.argmin()] == 0.0 and s[p.argmax()] == 1.0
    np.testing.assert_array_equal(normalize_scores([7.0, 7.0, 7.0]), [0.5, 0.5, 0.5])
    np.testing.assert_array_equal(anomaly_scores([0.0, 0.25, 1.0]), [1.0, 0.75, 0.0])


def tiny_params(context=2, predict=3):
    cfg = GeneratorConfig(num_layers=1, hidden=2, kernel_size=3, patch=2, context=context, predict=predict)
    return GeneratorParams(cfg, np.random.default_rng(0))


def video(T, seed=0, labels=True):
    rng = np.random.default_rng(seed)
    lab = np.zeros(T, dtype=np.int64)
    lab[T // 2 : T // 2 + 3] = 1
    return VideoSequence(rng.random((T, 1, 4, 4)).astype(np.float32), "v", lab if labels else None)


def test_offset_and_boundary_padding():
    params = tiny_params()
    v = video(16)
    starts, preds = predict_video_windows(v, params)
    np.testing.assert_array_equal(starts, np.arange(2, 16 - 3 - 2 + 1))
    for d in (0, 2):
        s = accumulated_regular_score(v, params, offset=d, predictions=(starts, preds))
        assert len(s) == 16
        for n, t in enumerate(starts):
            assert s.psnr[t] == psnr(v.frames[t + d], preds[n, d])
        assert np.all(s.psnr[: starts[0]] == s.psnr[starts[0]])
        assert np.all(s.psnr[starts[-1] + 1 :] == s.psnr[starts[-1]])
        assert s.regular.min() == 0.0 and s.regular.max() == 1.0
        np.testing.assert_array_equal(s.anomaly, 1.0 - s.regular)


def test_offset_bounds_and_short_video():
    params = tiny_params()
    with pytest.raises(ValueError, match="offset"):
        accumulated_regular_score(video(16), params, offset=3)
    with pytest.raises(ValueError, match="at least 7"):
        predict_video_windows(video(6), params)


def test_batching_does_not_change_scores():
    params = tiny_params()
    v = video(20)
    a = accumulated_regular_score(v, params, batch_size=3)
    b = accumulated_regular_score(v, params, batch_size=64)
    np.testing.assert_allclose(a.psnr, b.psnr, rtol=1e-5)


def test_csv_roundtrip(tmp_path):
    s = accumulated_regular_score(video(16), tiny_params())
    s.to_csv(tmp_path / "s.csv")
    r = ScoreSeries.from_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(r.psnr, s.psnr)
    np.testing.assert_array_equal(r.anomaly, s.anomaly)
    np.testing.assert_array_equal(r.label, s.label)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        ScoreSeries.from_csv(tmp_path / "bad.csv")
