"""Frame-level evaluation metrics and artifact export."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy.stats import rankdata

from .scoring import ScoreSeries


class ExportError(OSError):
    pass


def _check_binary(labels, n: int, what: str) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or len(labels) != n:
        raise ValueError(f"{what}: {len(labels)} labels for {n} values")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError(f"{what}: labels must be 0 or 1")
    labels = labels.astype(bool)
    if labels.all() or not labels.any():
        raise ValueError(f"{what}: both normal and abnormal frames are required")
    return labels


def frame_level_auc(anomaly_scores, labels) -> float:
    """ROC AUC from the Mann-Whitney rank statistic; ties count one half."""
    s = np.asarray(anomaly_scores, dtype=np.float64).ravel()
    if not np.all(np.isfinite(s)):
        raise ValueError("frame_level_auc: non-finite score")
    pos = _check_binary(labels, len(s), "frame_level_auc")
    ranks = rankdata(s)  # average ranks resolve ties
    n1 = int(pos.sum())
    n0 = len(s) - n1
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def delta_p(psnr_series, labels) -> float:
    """Mean PSNR of normal frames minus mean PSNR of abnormal frames."""
    p = np.asarray(psnr_series, dtype=np.float64).ravel()
    pos = _check_binary(labels, len(p), "delta_p")
    return float(p[~pos].mean() - p[pos].mean())


@dataclass
class EvaluationReport:
    auc: float  # pooled over all frames after per-video normalization
    macro_auc: float  # mean of per-video AUCs over videos holding both classes
    delta_p: float
    per_video_auc: dict = field(default_factory=dict)  # name -> AUC, None for single-class videos
    n_normal: int = 0
    n_abnormal: int = 0
    n_frames: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            return cls(**json.load(fh))


def series_names(series: Sequence[ScoreSeries]) -> list[str]:
    return [f"video_{k:02d}" for k in range(len(series))]


def evaluate(series: Sequence[ScoreSeries], config: dict | None = None) -> EvaluationReport:
    if not series:
        raise ValueError("evaluate: no score series")
    for s in series:
        if s.label is None:
            raise ValueError(f"evaluate: series {s.source!r} has no labels")
        if len(s.label) != len(s):
            raise ValueError(f"evaluate: series {s.source!r} has {len(s.label)} labels for {len(s)} frames")
    per_video = {}
    for name, s in zip(series_names(series), series):
        lab = s.label.astype(bool)
        per_video[name] = frame_level_auc(s.anomaly, s.label) if lab.any() and not lab.all() else None
    scores = np.concatenate([s.anomaly for s in series])
    labels = np.concatenate([s.label for s in series])
    psnrs = np.concatenate([s.psnr for s in series])
    valid = [v for v in per_video.values() if v is not None]
    n_ab = int(labels.sum())
    return EvaluationReport(
        auc=frame_level_auc(scores, labels),
        macro_auc=float(np.mean(valid)) if valid else float("nan"),
        delta_p=delta_p(psnrs, labels),
        per_video_auc=per_video,
        n_normal=len(labels) - n_ab,
        n_abnormal=n_ab,
        n_frames=len(labels),
        config=dict(config or {}),
    )


def error_map_image(err) -> Image.Image:
    """Squared-error map [H, W] (or [1, H, W]) clipped to [0, 1] as an 8-bit grayscale image."""
    e = np.asarray(err, dtype=np.float64)
    if e.ndim == 3:
        e = e.mean(axis=0)
    return Image.fromarray(np.round(np.clip(e, 0.0, 1.0) * 255.0).astype(np.uint8), mode="L")


def export_artifacts(series: Sequence[ScoreSeries], report: EvaluationReport | None, out_dir,
                     error_maps: dict | None = None) -> Path:
    """Write score CSVs, ``report.json`` and error-map PNGs under ``out_dir``.

    ``error_maps`` maps a video name to ``{window_start: [p, C, H, W] squared errors}``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, s in zip(series_names(series), series):
            s.to_csv(out / "scores" / f"{name}.csv")
        if report is not None:
            report.write(out / "report.json")
        for name, maps in (error_maps or {}).items():
            d = out / "error_maps" / name
            d.mkdir(parents=True, exist_ok=True)
            for start, err in maps.items():
                for k, frame_err in enumerate(err):
                    error_map_image(frame_err).save(d / f"t{int(start) + k:05d}.png")
    except OSError as exc:
        raise ExportError(f"cannot write artifacts under {out}: {exc}") from exc
    return out
