import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from sklearn.metrics import roc_auc_score

from stcnet.harness import EvaluationReport, ExportError, delta_p, evaluate, export_artifacts, frame_level_auc
from stcnet.scoring import ScoreSeries, normalize_scores


def test_auc_examples():
    assert frame_level_auc([0.9, 0.1], [1, 0]) == 1.0
    assert frame_level_auc([0.1, 0.9], [1, 0]) == 0.0
    assert frame_level_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_rejects_single_class_and_bad_input():
    with pytest.raises(ValueError, match="both"):
        frame_level_auc([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError):
        frame_level_auc([0.1, 0.2], [0, 1, 1])
    with pytest.raises(ValueError):
        frame_level_auc([0.1, np.nan], [0, 1])


def test_auc_matches_sklearn():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(5, 200)
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = np.round(rng.random(n), 1)  # plenty of ties
        assert frame_level_auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)


def test_auc_monotone_invariance_100_transforms():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, 300)
    scores = rng.random(300)
    base = frame_level_auc(scores, labels)
    for k in range(100):
        a, b = rng.uniform(0.1, 5.0), rng.normal()
        kind = k % 4
        if kind == 0:
            t = a * scores + b
        elif kind == 1:
            t = np.exp(a * scores)
        elif kind == 2:
            t = np.arctan(a * (scores - 0.5))
        else:
            t = scores ** (1 + a)
        assert frame_level_auc(t, labels) == base


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.booleans()), min_size=2, max_size=60))
def test_auc_complement_sums_to_one(pairs):
    scores = np.array([p[0] for p in pairs])
    labels = np.array([int(p[1]) for p in pairs])
    if labels.all() or not labels.any():
        return
    assert frame_level_auc(scores, labels) + frame_level_auc(scores, 1 - labels) == 1.0


def test_delta_p():
    assert delta_p([30.0, 32.0, 28.0], [0, 0, 1]) == pytest.approx(3.0)
    assert delta_p([5.0, 5.0, 5.0, 5.0], [0, 1, 0, 1]) == 0.0
    with pytest.raises(ValueError):
        delta_p([1.0, 2.0], [1, 1])


def make_series(rng, T=40, abnormal=(10, 20), shift=3.0, name="v"):
    labels = np.zeros(T, dtype=np.int64)
    labels[abnormal[0] : abnormal[1]] = 1
    p = rng.normal(30, 1, T) - shift * labels
    reg = normalize_scores(p)
    return ScoreSeries(np.arange(T), p, reg, 1 - reg, labels, source=name)


def test_evaluate_consistency():
    rng = np.random.default_rng(2)
    series = [make_series(rng, name=f"v{k}") for k in range(3)]
    series.append(make_series(rng, abnormal=(0, 0), name="normal"))
    rep = evaluate(series, {"seed": 1})
    scores = np.concatenate([s.anomaly for s in series])
    labels = np.concatenate([s.label for s in series])
    assert rep.auc == frame_level_auc(scores, labels)
    assert rep.per_video_auc["video_03"] is None
    assert rep.macro_auc == pytest.approx(np.mean([rep.per_video_auc[f"video_0{k}"] for k in range(3)]))
    assert rep.n_frames == 160 and rep.n_abnormal == 30 and rep.n_normal == 130
    assert rep.delta_p > 0 and 0 <= rep.auc <= 1
    assert rep.config == {"seed": 1}


def test_export_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    series = [make_series(rng), make_series(rng)]
    rep = evaluate(series)
    perfect = np.zeros((5, 1, 8, 8))
    noisy = np.full((5, 1, 8, 8), 0.25)
    export_artifacts(series, rep, tmp_path, {"video_00": {8: perfect, 20: noisy}})
    back = ScoreSeries.from_csv(tmp_path / "scores" / "video_01.csv")
    np.testing.assert_allclose(back.anomaly, series[1].anomaly, atol=1e-9)
    loaded = EvaluationReport.read(tmp_path / "report.json")
    assert loaded.auc == rep.auc
    assert json.loads((tmp_path / "report.json").read_text())["n_frames"] == 80
    black = np.asarray(Image.open(tmp_path / "error_maps" / "video_00" / "t00008.png"))
    assert black.shape == (8, 8) and not black.any()
    grey = np.asarray(Image.open(tmp_path / "error_maps" / "video_00" / "t00024.png"))
    assert np.all(grey == 64)


def test_export_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rng = np.random.default_rng(4)
    with pytest.raises(ExportError):
        export_artifacts([make_series(rng)], None, blocker / "sub")
