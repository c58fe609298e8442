"""Command-line entry point: synth, train, score, eval, ablate.

Every command writes under ``--out``. Failures exit nonzero with a single
JSON line on stderr: ``{"error": "<kind>", "message": "<text>"}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, desk_config, load_config
from .data import SyntheticBenchmark, list_video_dirs, load_benchmark, load_frame_dir, save_benchmark
from .experiment import format_ablation_table, make_benchmark, run_ablation, score_videos, train_model, variant_config
from .harness import evaluate, export_artifacts
from .scoring import ScoreSeries, error_maps
from .training import Trainer

log = logging.getLogger("stcnet")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": message}), file=sys.stderr)
        sys.exit(2)


def _run_config(args) -> RunConfig:
    base = desk_config()
    cfg = load_config(args.config, base) if args.config else base
    seed = args.seed if args.seed is not None else cfg.train.seed
    adversarial = False if getattr(args, "no_gan", False) else None
    bidirectional = False if getattr(args, "no_bidirectional", False) else None
    cfg = variant_config(cfg, seed=seed, adversarial=adversarial, bidirectional=bidirectional)
    if getattr(args, "accumulation_offset", None) is not None:
        cfg.offset = args.accumulation_offset
        if not 0 <= cfg.offset < cfg.generator.predict:
            raise ConfigError(f"--accumulation-offset must lie in [0, {cfg.generator.predict})")
    return cfg


def _benchmark(args, cfg: RunConfig) -> SyntheticBenchmark:
    if args.data:
        root = Path(args.data)
        if (root / "train").is_dir() or (root / "test").is_dir():
            return load_benchmark(root)
        # a plain directory of video frame dirs is treated as a test split
        return SyntheticBenchmark(train=[], test=[load_frame_dir(d) for d in list_video_dirs(root)])
    return make_benchmark(cfg, cfg.train.seed)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_synth(args) -> None:
    cfg = _run_config(args)
    bench = make_benchmark(cfg, cfg.train.seed)
    save_benchmark(bench, args.out)
    _write_json(Path(args.out) / "config.json", cfg.to_dict())
    print(f"wrote {len(bench.train)} training and {len(bench.test)} test videos to {args.out}")


def cmd_train(args) -> None:
    cfg = _run_config(args)
    bench = _benchmark(args, cfg)
    if not bench.train:
        raise UsageError(f"no training videos found under {args.data}")
    out = Path(args.out)
    trainer = train_model(cfg, bench.train, log_path=out / "training_log.csv")
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "model.npz"
    trainer.save(ckpt)
    _write_json(out / "config.json", cfg.to_dict())
    last = trainer.history[-1]
    print(f"trained {trainer.iteration} iterations; final L_G={last.total_g:.5f}; checkpoint {ckpt}")


def _load_checkpoint(args) -> Trainer:
    if not args.checkpoint:
        raise UsageError("--checkpoint is required")
    return Trainer.load(args.checkpoint)


def cmd_score(args) -> None:
    cfg = _run_config(args)
    trainer = _load_checkpoint(args)
    bench = _benchmark(args, cfg)
    if not bench.test:
        raise UsageError("no test videos to score")
    offset = cfg.offset
    series = score_videos(trainer.generator, bench.test, (offset,), cfg.score_batch)[offset]
    maps = {}
    for k, (s, v) in enumerate(zip(series, bench.test)):
        # error maps for the window with the worst and the best regular score
        lo = int(s.regular.argmin())
        hi = int(s.regular.argmax())
        span = trainer.gen_config.context
        last = len(v) - trainer.gen_config.predict - span
        starts = sorted({min(max(t, span), last) for t in (lo, hi)})
        maps[f"video_{k:02d}"] = error_maps(v, trainer.generator, starts)
    export_artifacts(series, None, args.out, maps)
    print(f"scored {len(series)} videos with offset {offset}; CSVs under {Path(args.out) / 'scores'}")


def cmd_eval(args) -> None:
    out = Path(args.out)
    score_dir = Path(args.scores) if args.scores else out / "scores"
    files = sorted(score_dir.glob("*.csv"))
    if not files:
        raise UsageError(f"no score CSVs under {score_dir}")
    series = [ScoreSeries.from_csv(f) for f in files]
    report = evaluate(series, {"scores": str(score_dir)})
    export_artifacts([], report, out)
    print(f"AUC={report.auc:.4f} macro_AUC={report.macro_auc:.4f} dP={report.delta_p:.4f} "
          f"frames={report.n_frames} abnormal={report.n_abnormal}")


def cmd_ablate(args) -> None:
    cfg = _run_config(args)
    bench = _benchmark(args, cfg)
    rows = run_ablation(cfg, cfg.train.seed, bench, out_dir=args.out)
    print(format_ablation_table(rows))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    model = _Parser(add_help=False)
    model.add_argument("--no-gan", action="store_true", help="disable adversarial training")
    model.add_argument("--no-bidirectional", action="store_true", help="forward prediction only")
    model.add_argument("--data", help="benchmark root (train/, test/) or a directory of frame dirs")

    p = _Parser(prog="stcnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write the synthetic benchmark").set_defaults(func=cmd_synth)
    t = sub.add_parser("train", parents=[common, model], help="train a model")
    t.add_argument("--checkpoint", help="checkpoint path (default OUT/model.npz)")
    t.set_defaults(func=cmd_train)
    s = sub.add_parser("score", parents=[common, model], help="score test videos with a checkpoint")
    s.add_argument("--checkpoint")
    s.add_argument("--accumulation-offset", type=int, help="score frame t by the error at t + D")
    s.set_defaults(func=cmd_score)
    e = sub.add_parser("eval", parents=[common], help="AUC / dP report from score CSVs")
    e.add_argument("--scores", help="directory of score CSVs (default OUT/scores)")
    e.set_defaults(func=cmd_eval)
    a = sub.add_parser("ablate", parents=[common, model], help="train and score the four ablation variants")
    a.add_argument("--accumulation-offset", type=int)
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, FloatingPointError) as exc:
        msg = " ".join(str(exc).split())
        print(json.dumps({"error": type(exc).__name__, "message": msg}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
