"""Rank pooling: the weights of a ranker fitted to a sequence's frame order.

The pipeline per direction is smooth -> per-frame feature map -> fit. With
``solver="svr"`` the rows are regressed onto their 1-based time index;
with ``solver="ranksvm"`` every chronological pair becomes a ranking
constraint. ``direction="reverse"`` runs the same pipeline on the reversed
frames and ``"both"`` concatenates [forward | reverse].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import featmap, smooth
from .seqcore import DIRECTIONS, DataError, Descriptor, DescriptorMeta, FrameSequence
from .solvers import LinearModel, SolverConfig, ranksvm_fit, svr_fit

SOLVERS = ("svr", "ranksvm")


@dataclass(frozen=True)
class PoolingConfig:
    smoothing: str = "tvm"
    pre_map: str = "none"
    solver: str = "svr"
    direction: str = "forward"
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    ma_window: int = 20
    chi2: featmap.Chi2MapConfig = field(default_factory=featmap.Chi2MapConfig)
    max_dim: int = 1_000_000

    def __post_init__(self):
        if self.smoothing not in smooth.STRATEGIES:
            raise ValueError(f"unknown smoothing {self.smoothing!r}; choose from {smooth.STRATEGIES}")
        if self.pre_map not in featmap.MAPS:
            raise ValueError(f"unknown pre-map {self.pre_map!r}; choose from {featmap.MAPS}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}; choose from {DIRECTIONS}")

    def descriptor_length(self, D: int) -> int:
        m = featmap.map_dim(self.pre_map, D, self.chi2)
        return 2 * m if self.direction == "both" else m


def frame_features(x: FrameSequence, cfg: PoolingConfig) -> np.ndarray:
    """Smoothed, mapped rows that the ranker is fitted on."""
    v = smooth.smooth(x, cfg.smoothing, cfg.ma_window).values
    if cfg.pre_map == "none":
        return v
    mapped = featmap.apply_map(cfg.pre_map, v, cfg.chi2)
    if cfg.smoothing in ("independent", "tvm"):
        mapped = featmap.l2_normalize(mapped)
    return mapped


def fit_ranker(V: np.ndarray, cfg: PoolingConfig) -> LinearModel:
    T = V.shape[0]
    if cfg.solver == "svr":
        return svr_fit(V, np.arange(1, T + 1, dtype=np.float64), cfg.solver_cfg)
    if T < 2:
        raise DataError(f"ranksvm pooling needs T >= 2, got T={T}")
    return ranksvm_fit(V, cfg=cfg.solver_cfg)


def _pool_one_direction(x: FrameSequence, cfg: PoolingConfig) -> np.ndarray:
    return fit_ranker(frame_features(x, cfg), cfg).weights


def rank_pool(x: FrameSequence, cfg: PoolingConfig = PoolingConfig()) -> Descriptor:
    if cfg.solver == "ranksvm" and x.T < 2:
        raise DataError(f"ranksvm pooling needs T >= 2, got T={x.T}")
    if cfg.descriptor_length(x.D) > cfg.max_dim:
        raise DataError(
            f"descriptor length {cfg.descriptor_length(x.D)} exceeds the configured cap {cfg.max_dim}"
        )
    if cfg.direction == "forward":
        u = _pool_one_direction(x, cfg)
    elif cfg.direction == "reverse":
        u = _pool_one_direction(smooth.reverse_sequence(x), cfg)
    else:
        u = np.concatenate(
            [_pool_one_direction(x, cfg), _pool_one_direction(smooth.reverse_sequence(x), cfg)]
        )
    meta = DescriptorMeta(
        pooler=f"rank-{cfg.solver}", direction=cfg.direction, smoothing=cfg.smoothing, feature_map=cfg.pre_map
    )
    return Descriptor(u, meta)


def score_frames(x: FrameSequence, d: Descriptor, cfg: PoolingConfig = PoolingConfig()) -> np.ndarray:
    """Per-frame ranking scores s_t = <u, v_t> using the forward half of ``d``."""
    V = frame_features(x, cfg)
    expected = cfg.descriptor_length(x.D)
    if len(d) != expected:
        raise DataError(f"descriptor length {len(d)} does not match the configuration ({expected})")
    u = d.values[: V.shape[1]]
    return V @ u
