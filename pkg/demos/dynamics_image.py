"""
A dynamics image
================

Rank-pool the raw pixels of a tiny clip: the weight vector, reshaped to the
frame size, shows which pixels brighten over time (white) and which fade
(black). Here a bright square slides from left to right.
"""

import sys

import numpy as np

from seqpool import FrameSequence, PoolingConfig
from seqpool.evalharness import visualize_dynamics

W, H, T = 16, 8, 12
frames = np.zeros((T, H, W))
for t in range(T):
    frames[t, 2:6, t : t + 4] = 1.0
clip = FrameSequence(frames.reshape(T, -1) + 0.01)

# the pairwise ranker has no targets to fit, so the shared background does not swamp the motion
cfg = PoolingConfig(smoothing="independent", solver="ranksvm")
img = visualize_dynamics(clip, W, H, cfg, path=sys.argv[1] if len(sys.argv) > 1 else None)
for row in img:
    print("".join(" .:-=+*#%@"[int(v) * 10 // 256] for v in row))
