"""
Why score a frame from later in the prediction
==============================================

Errors grow along the generated run. A frame that breaks the motion
pattern hurts every prediction made after it, so the error at offset d
separates normal and abnormal frames better than the error at offset 0.
This script scores one trained checkpoint at every offset.

    stcnet train --out /tmp/run --seed 0
    python3 demos/03_error_accumulation.py /tmp/run/model.npz
"""

import sys

import numpy as np

from stcnet.config import desk_config
from stcnet.experiment import make_benchmark, score_videos
from stcnet.harness import evaluate
from stcnet.training import Trainer

trainer = Trainer.load(sys.argv[1])
seed = trainer.config.seed
bench = make_benchmark(desk_config(seed), seed)
offsets = tuple(range(trainer.gen_config.predict))
by_offset = score_videos(trainer.generator, bench.test, offsets)

print(" d   AUC    dP(dB)  MSE normal  MSE abnormal")
for d in offsets:
    series = by_offset[d]
    rep = evaluate(series)
    mse = np.concatenate([s.mse for s in series])
    lab = np.concatenate([s.label for s in series]).astype(bool)
    print(f" {d}  {rep.auc:.3f}  {rep.delta_p:6.2f}   {mse[~lab].mean():.5f}     {mse[lab].mean():.5f}")
