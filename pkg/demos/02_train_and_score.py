"""
Train a small model and score the test videos
=============================================

The desk configuration (2 layers, 16 channels, 1200 iterations) takes a few
minutes on one core. Pass a smaller iteration count for a quick look; the
scores will be closer to chance.

    python3 demos/02_train_and_score.py 300
"""

import sys
import time

import numpy as np

from stcnet.config import desk_config
from stcnet.experiment import make_benchmark, score_videos, train_model
from stcnet.harness import evaluate

cfg = desk_config(seed=0)
if len(sys.argv) > 1:
    cfg.train.iterations = int(sys.argv[1])
    cfg.train.ss_ramp_iters = max(1, cfg.train.iterations // 2)
    cfg.train.aux_warmup_iters = cfg.train.iterations // 4

bench = make_benchmark(cfg, seed=0)
print(f"{len(bench.train)} training videos, {len(bench.test)} test videos of {bench.test[0].frames.shape}")

t0 = time.perf_counter()
trainer = train_model(cfg, bench.train)
print(f"trained {trainer.iteration} iterations in {time.perf_counter() - t0:.0f} s")

# loss curve, condensed: the mean of each tenth of training
hist = np.array([h.as_row() for h in trainer.history])
for chunk in np.array_split(hist, 10):
    print("  L_int {:.5f}  L_gd {:.4f}  L_dec {:.4f}".format(chunk[:, 0].mean(), chunk[:, 1].mean(), chunk[:, 3].mean()))

# Each frame is scored by the PSNR of the prediction cfg.offset steps into a window.
series = score_videos(trainer.generator, bench.test, (cfg.offset,))[cfg.offset]
report = evaluate(series)
print(f"frame-level AUC {report.auc:.3f}, macro AUC {report.macro_auc:.3f}, dP {report.delta_p:.2f} dB")
for name, auc in report.per_video_auc.items():
    print(f"  {name}: {auc:.3f}")
