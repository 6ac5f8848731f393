"""
Robustness to dropped frames
============================

Delete a random fraction of frames from every sequence, train and test
again, and watch the accuracy. Dropping is seeded per sequence, so each
row is reproducible.
"""

import tempfile

from seqpool.evalharness import EvalConfig, drift4, frame_drop_experiment, generate_synthetic
from seqpool.pipeline import PipelineConfig

with tempfile.TemporaryDirectory() as tmp:
    manifest, _ = generate_synthetic(drift4(), tmp)
    baseline, rows = frame_drop_experiment(manifest, EvalConfig(PipelineConfig()), seed=0)

print(f"no frames dropped: accuracy {baseline.accuracy:.4f}")
for r in rows:
    print(f"dropped {r.fraction:4.0%}: accuracy {r.report.accuracy:.4f}  ({100 * r.delta_accuracy:+.2f} points)")
