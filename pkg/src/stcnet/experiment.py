"""Train / score / evaluate runs on the synthetic benchmark, shared by the CLI and the tests."""

from __future__ import annotations

import copy
import csv
import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import RunConfig
from .data import SyntheticBenchmark, VideoSequence, synth_benchmark
from .generator import GeneratorParams
from .harness import EvaluationReport, evaluate
from .scoring import ScoreSeries, accumulated_regular_score, predict_video_windows
from .training import Trainer

log = logging.getLogger(__name__)


def make_benchmark(cfg: RunConfig, seed: int) -> SyntheticBenchmark:
    b = cfg.synth
    return synth_benchmark(
        seed=seed, canvas=b.canvas, n_train=b.n_train, n_test=b.n_test, train_length=b.train_length,
        test_length=b.test_length, test_anomalies=b.test_anomalies, **b.scene,
    )


def variant_config(cfg: RunConfig, seed: int | None = None, adversarial: bool | None = None,
                   bidirectional: bool | None = None) -> RunConfig:
    out = copy.deepcopy(cfg)
    if seed is not None:
        out.train = dataclasses.replace(out.train, seed=seed)
    if adversarial is not None:
        out.train = dataclasses.replace(out.train, adversarial=adversarial)
    if bidirectional is not None:
        out.generator = dataclasses.replace(out.generator, bidirectional=bidirectional)
    return out


def train_model(cfg: RunConfig, videos: Sequence[VideoSequence], log_path=None) -> Trainer:
    trainer = Trainer(cfg.generator, cfg.train)
    trainer.fit(videos, log_path=log_path)
    return trainer


def score_videos(params: GeneratorParams, videos: Sequence[VideoSequence], offsets=(2,),
                 batch_size: int = 32) -> dict[int, list[ScoreSeries]]:
    """Score every video once per offset; predictions are shared between offsets."""
    out = {d: [] for d in offsets}
    for v in videos:
        preds = predict_video_windows(v, params, batch_size)
        for d in offsets:
            out[d].append(accumulated_regular_score(v, params, offset=d, predictions=preds))
    return out


@dataclass
class Variant:
    name: str
    adversarial: bool
    bidirectional: bool
    accumulation: bool


ABLATION_VARIANTS = (
    Variant("Model 1", adversarial=False, bidirectional=False, accumulation=False),
    Variant("Model 2", adversarial=True, bidirectional=False, accumulation=False),
    Variant("Model 3", adversarial=True, bidirectional=True, accumulation=False),
    Variant("STC-Net", adversarial=True, bidirectional=True, accumulation=True),
)


@dataclass
class AblationRow:
    variant: Variant
    report: EvaluationReport

    def as_row(self) -> list:
        v = self.variant
        return [v.name, int(v.adversarial), int(v.bidirectional), int(v.accumulation),
                f"{self.report.auc:.4f}", f"{self.report.delta_p:.4f}"]


ABLATION_HEADER = ("model", "gan", "bidirectional", "accumulation", "auc", "delta_p")


def run_ablation(cfg: RunConfig, seed: int, bench: SyntheticBenchmark | None = None,
                 out_dir=None) -> list[AblationRow]:
    """Train each distinct (GAN, bidirectional) pair once and score with offset 0 or ``cfg.offset``."""
    bench = bench if bench is not None else make_benchmark(cfg, seed)
    trained: dict[tuple, GeneratorParams] = {}
    rows = []
    for v in ABLATION_VARIANTS:
        key = (v.adversarial, v.bidirectional)
        if key not in trained:
            vc = variant_config(cfg, seed=seed, adversarial=v.adversarial, bidirectional=v.bidirectional)
            log.info("training %s (gan=%s, bidirectional=%s)", v.name, v.adversarial, v.bidirectional)
            log_path = None if out_dir is None else Path(out_dir) / f"train_gan{int(v.adversarial)}_bi{int(v.bidirectional)}.csv"
            trained[key] = train_model(vc, bench.train, log_path=log_path).generator
        offset = cfg.offset if v.accumulation else 0
        series = score_videos(trained[key], bench.test, (offset,), cfg.score_batch)[offset]
        rows.append(AblationRow(v, evaluate(series, {"variant": v.name, "seed": seed, "offset": offset})))
    if out_dir is not None:
        write_ablation_table(rows, Path(out_dir) / "ablation.csv")
    return rows


def write_ablation_table(rows: Sequence[AblationRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ABLATION_HEADER)
        for r in rows:
            w.writerow(r.as_row())


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    mark = {True: "yes", False: "no"}
    lines = [f"{'Model':<8} {'GAN':<4} {'Bidir':<6} {'Accum':<6} {'AUC':>7} {'dP':>7}"]
    for r in rows:
        v = r.variant
        lines.append(f"{v.name:<8} {mark[v.adversarial]:<4} {mark[v.bidirectional]:<6} {mark[v.accumulation]:<6} "
                     f"{r.report.auc:7.4f} {r.report.delta_p:7.3f}")
    return "\n".join(lines)
