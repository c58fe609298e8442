"""PSNR regular scores with the error-accumulation offset."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numerics as nx
from .data import VideoSequence, WindowSpec, window_starts
from .generator import GeneratorParams, predict_window

PSNR_CAP = 100.0
PEAK_FLOOR = 1e-3
MSE_FLOOR = 1e-10
CSV_HEADER = ("frame_index", "psnr", "regular_score", "anomaly_score", "label")


def psnr(x, x_hat) -> float:
    """10 log10(peak^2 / MSE) with peak = max(max(x_hat), 1e-3); 100 dB when MSE < 1e-10."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"psnr: shape mismatch {x.shape} vs {x_hat.shape}")
    mse = float(np.mean((x - x_hat) ** 2))
    if mse < MSE_FLOOR:
        return PSNR_CAP
    peak = max(float(x_hat.max()), PEAK_FLOOR)
    return min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse))


def normalize_scores(series) -> np.ndarray:
    """Min-max normalize one video's PSNR series to [0, 1]; constant series -> 0.5."""
    p = np.asarray(series, dtype=np.float64)
    if p.size == 0:
        raise ValueError("normalize_scores: empty series")
    lo, hi = p.min(), p.max()
    if hi == lo:
        return np.full_like(p, 0.5)
    s = (p - lo) / (hi - lo)
    # pin the endpoints exactly
    s[p == lo] = 0.0
    s[p == hi] = 1.0
    return s


def anomaly_scores(regular) -> np.ndarray:
    return 1.0 - np.asarray(regular, dtype=np.float64)


@dataclass
class ScoreSeries:
    frame_index: np.ndarray
    psnr: np.ndarray
    regular: np.ndarray
    anomaly: np.ndarray
    label: np.ndarray | None = None
    mse: np.ndarray | None = None  # raw error of the frame each score was taken from
    source: str = ""

    def __len__(self):
        return len(self.frame_index)

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for k in range(len(self)):
                lab = "" if self.label is None else int(self.label[k])
                w.writerow([int(self.frame_index[k]), repr(float(self.psnr[k])), repr(float(self.regular[k])),
                            repr(float(self.anomaly[k])), lab])

    @classmethod
    def from_csv(cls, path) -> "ScoreSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        body = rows[1:]
        labels = [r[4] for r in body]
        return cls(
            frame_index=np.array([int(r[0]) for r in body]),
            psnr=np.array([float(r[1]) for r in body]),
            regular=np.array([float(r[2]) for r in body]),
            anomaly=np.array([float(r[3]) for r in body]),
            label=None if any(v == "" for v in labels) else np.array([int(v) for v in labels]),
            source=str(path),
        )


def _pad_nearest(t_idx: np.ndarray, values: np.ndarray, length: int) -> np.ndarray:
    out = np.empty(length, dtype=np.float64)
    out[t_idx] = values
    out[: t_idx[0]] = values[0]
    out[t_idx[-1] + 1 :] = values[-1]
    return out


def predict_video_windows(video: VideoSequence, params: GeneratorParams, batch_size: int = 32):
    """Generate P_hat for every stride-1 window of ``video``.

    Returns (starts, predictions [n, p, C, H, W]). Target frames are never
    passed to the generator.
    """
    cfg = params.config
    spec = WindowSpec(cfg.context, cfg.predict)
    if len(video) < spec.span:
        raise ValueError(f"video {video.source!r} has {len(video)} frames; at least {spec.span} required")
    starts = np.array(list(window_starts(len(video), spec)))
    f = video.frames
    i, p = cfg.context, cfg.predict
    preds = []
    with nx.no_grad():
        for k in range(0, len(starts), batch_size):
            chunk = starts[k : k + batch_size]
            before = np.stack([f[t - i : t] for t in chunk])
            after = np.stack([f[t + p : t + p + i] for t in chunk])
            preds.append(predict_window(params, before, after).frames.data)
    return starts, np.concatenate(preds)


def accumulated_regular_score(video: VideoSequence, params: GeneratorParams, offset: int = 2,
                              batch_size: int = 32, predictions=None) -> ScoreSeries:
    """Score every frame of ``video``.

    The window whose target run starts at t assigns frame t the PSNR of
    its (t + offset)-th frame. Frames without a window take the nearest
    computed score. Normalization is per video.
    """
    cfg = params.config
    if not 0 <= offset < cfg.predict:
        raise ValueError(f"offset {offset} outside the predicted run of {cfg.predict} frames")
    starts, preds = predictions if predictions is not None else predict_video_windows(video, params, batch_size)
    f = video.frames
    raw_psnr = np.array([psnr(f[t + offset], preds[n, offset]) for n, t in enumerate(starts)])
    raw_mse = np.array([float(np.mean((f[t + offset].astype(np.float64) - preds[n, offset]) ** 2))
                        for n, t in enumerate(starts)])
    T = len(video)
    full_psnr = _pad_nearest(starts, raw_psnr, T)
    full_mse = _pad_nearest(starts, raw_mse, T)
    regular = normalize_scores(full_psnr)
    return ScoreSeries(
        frame_index=np.arange(T),
        psnr=full_psnr,
        regular=regular,
        anomaly=anomaly_scores(regular),
        label=None if video.labels is None else video.labels.copy(),
        mse=full_mse,
        source=video.source,
    )


def error_maps(video: VideoSequence, params: GeneratorParams, starts) -> dict:
    """Per-pixel squared error of every predicted frame for the windows at ``starts``."""
    cfg = params.config
    i, p = cfg.context, cfg.predict
    f = video.frames
    starts = list(starts)
    with nx.no_grad():
        before = np.stack([f[t - i : t] for t in starts])
        after = np.stack([f[t + p : t + p + i] for t in starts])
        pred = predict_window(params, before, after).frames.data
    out = {}
    for n, t in enumerate(starts):
        out[t] = (pred[n].astype(np.float64) - f[t : t + p]) ** 2
    return out
