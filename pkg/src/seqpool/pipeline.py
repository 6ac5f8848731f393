"""Batch pooling: one configuration, every sequence in a manifest.

``PipelineConfig`` selects the pooler and everything it needs. Batches run
in a process pool when ``jobs > 1``; results always come back in manifest
order, so the output never depends on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import baselines, featmap, parampool, rankpool, smooth
from .seqcore import (
    DataError,
    DatasetManifest,
    Descriptor,
    DescriptorMeta,
    FrameSequence,
    ManifestRecord,
    read_sequence,
    write_descriptor,
)
from .solvers import SolverConfig

POOLERS = ("rank", "subspace", "nn", "avg", "max", "tp-avg", "tp-max")
_DEFAULT_SMOOTHING = {"rank": "tvm", "subspace": "tvm", "nn": "tvm"}


@dataclass(frozen=True)
class PipelineConfig:
    """Pooler choice plus all pooler options.

    The defaults give non-linear forward+reverse rank pooling (time-varying
    means, posneg per frame, SVR). ``smoothing=None`` picks the pooler's
    default: time-varying means for the parametric poolers, raw frames for
    the order-agnostic baselines.
    """

    pooler: str = "rank"
    smoothing: str | None = None
    ma_window: int = 20
    pre_map: str = "posneg"
    solver: str = "svr"
    direction: str = "both"
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    chi2: featmap.Chi2MapConfig = field(default_factory=featmap.Chi2MapConfig)
    subspace: parampool.SubspaceConfig = field(default_factory=parampool.SubspaceConfig)
    nn: parampool.NNPoolConfig = field(default_factory=parampool.NNPoolConfig)

    def __post_init__(self):
        if self.pooler not in POOLERS:
            raise ValueError(f"unknown pooler {self.pooler!r}; choose from {POOLERS}")
        if self.smoothing is not None and self.smoothing not in smooth.STRATEGIES:
            raise ValueError(f"unknown smoothing {self.smoothing!r}; choose from {smooth.STRATEGIES}")

    @property
    def resolved_smoothing(self) -> str:
        if self.smoothing is not None:
            return self.smoothing
        return _DEFAULT_SMOOTHING.get(self.pooler, "none")

    def pooling_config(self) -> rankpool.PoolingConfig:
        return rankpool.PoolingConfig(
            smoothing=self.resolved_smoothing,
            pre_map=self.pre_map,
            solver=self.solver,
            direction=self.direction,
            solver_cfg=self.solver_cfg,
            ma_window=self.ma_window,
            chi2=self.chi2,
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["smoothing"] = self.resolved_smoothing
        return d


def pool_sequence(x: FrameSequence, cfg: PipelineConfig) -> Descriptor:
    if cfg.pooler == "rank":
        return rankpool.rank_pool(x, cfg.pooling_config())
    if cfg.pooler == "subspace":
        return parampool.subspace_pool(x, cfg.resolved_smoothing, cfg.subspace)
    if cfg.pooler == "nn":
        return parampool.nn_pool(x, cfg.resolved_smoothing, cfg.nn)

    # order-agnostic baselines: smooth, optionally map each frame, then pool
    v = smooth.smooth(x, cfg.resolved_smoothing, cfg.ma_window).values
    if cfg.pre_map != "none":
        v = featmap.apply_map(cfg.pre_map, v, cfg.chi2)
    xs = FrameSequence(v, x.id)
    if cfg.pooler == "avg":
        d = baselines.average_pool(xs)
    elif cfg.pooler == "max":
        d = baselines.max_pool(xs)
    elif cfg.pooler == "tp-avg":
        d = baselines.temporal_pyramid(xs, baselines.average_pool)
    else:
        d = baselines.temporal_pyramid(xs, baselines.max_pool)
    return Descriptor(
        d.values, DescriptorMeta(pooler=cfg.pooler, smoothing=cfg.resolved_smoothing, feature_map=cfg.pre_map)
    )


SequenceTransform = Callable[[FrameSequence, int], FrameSequence]


def _pool_task(args) -> np.ndarray:
    path, index, cfg, transform = args
    x = read_sequence(path)
    if transform is not None:
        x = transform(x, index)
    return pool_sequence(x, cfg).values


def pool_records(
    manifest: DatasetManifest,
    records: Sequence[ManifestRecord],
    cfg: PipelineConfig,
    jobs: int = 1,
    transform: SequenceTransform | None = None,
) -> list[Descriptor]:
    """Pool each record's sequence, in record order.

    ``transform(x, i)`` (picklable when ``jobs > 1``) perturbs the i-th
    sequence before pooling; the frame-drop experiment uses it.
    """
    position = {r.path: i for i, r in enumerate(manifest.records)}
    tasks = [(manifest.resolve(r), position[r.path], cfg, transform) for r in records]
    if jobs <= 1 or len(tasks) <= 1:
        values = [_pool_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            values = list(ex.map(_pool_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    descriptors = [Descriptor(v) for v in values]
    if descriptors and len({len(d) for d in descriptors}) != 1:
        raise DataError(f"descriptor lengths differ across the manifest: {sorted({len(d) for d in descriptors})}")
    return descriptors


def pool_manifest(
    manifest: DatasetManifest, cfg: PipelineConfig, out_dir: str | os.PathLike, jobs: int = 1
) -> list[Path]:
    """Pool every sequence and write descriptors under ``out_dir`` mirroring manifest paths."""
    out_dir = Path(out_dir)
    descriptors = pool_records(manifest, manifest.records, cfg, jobs=jobs)
    written = []
    for r, d in zip(manifest.records, descriptors):
        dest = out_dir / r.path
        write_descriptor(d, dest)
        written.append(dest)
    return written
