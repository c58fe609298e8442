"""
Synthetic scenes with injected anomalies
========================================

Generate one normal clip and one clip per anomaly kind, then save a
contact sheet so the irregular interval is easy to see.

    python3 demos/01_synthetic_scenes.py /tmp/scenes.png
"""

import sys

import numpy as np
from PIL import Image

from stcnet.data import SyntheticSceneConfig, synth_generate

out = sys.argv[1] if len(sys.argv) > 1 else "scenes.png"

# A scene is a textured static background with a few shapes drifting over it.
# Anomalous frames are labelled 1; everything else is 0.
rows = []
for kind in ("none", "speed", "shape", "teleport"):
    clip = synth_generate(SyntheticSceneConfig(seed=3, canvas=32, length=60, anomaly=kind))
    labels = clip.labels
    print(f"{kind:>8}: {labels.sum():2d} abnormal frames, first at t={labels.argmax() if labels.any() else '-'}")
    # every fourth frame, side by side; abnormal frames get a bright top border
    tiles = []
    for t in range(0, len(clip), 4):
        tile = clip.frames[t, 0].copy()
        if labels[t]:
            tile[0, :] = 1.0
        tiles.append(np.pad(tile, 1))
    rows.append(np.concatenate(tiles, axis=1))

sheet = np.concatenate(rows, axis=0)
Image.fromarray((sheet * 255).round().astype(np.uint8), mode="L").resize(
    (sheet.shape[1] * 3, sheet.shape[0] * 3), Image.NEAREST).save(out)
print("contact sheet written to", out)
