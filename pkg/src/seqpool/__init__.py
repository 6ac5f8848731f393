"""Temporal pooling of frame sequences into fixed-length descriptors.

The central operator is rank pooling: fit a linear ranker (SVR on the
frame index, or a pairwise RankSVM) to a smoothed sequence and keep its
weights as the descriptor. Subspace, neural-network and order-agnostic
baselines share the same I/O types, and a one-vs-all classifier plus an
evaluation harness sit on top.
"""

from .baselines import average_pool, max_pool, temporal_pyramid
from .classify import OvaModel, fuse_channels, load_model, predict, save_model, train_ova
from .featmap import Chi2MapConfig, chi2_map, l2_normalize, posneg_map, signed_sqrt
from .metrics import MetricReport, average_precision, compute_metrics
from .parampool import NNPoolConfig, SubspaceConfig, nn_pool, subspace_pool
from .pipeline import PipelineConfig, pool_manifest, pool_sequence
from .rankpool import PoolingConfig, rank_pool
from .seqcore import (
    DataError,
    DatasetManifest,
    Descriptor,
    FrameSequence,
    LabeledDescriptor,
    ManifestRecord,
    read_descriptor,
    read_manifest,
    read_sequence,
    write_descriptor,
    write_manifest,
    write_sequence,
)
from .solvers import LinearModel, SolverConfig, primal_oracle, ranksvm_fit, svm_l2_fit, svr_fit

__version__ = "0.1.0"
