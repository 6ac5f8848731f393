"""One-vs-all squared-hinge SVMs over pooled descriptors.

Every descriptor goes through the post-map and L2 normalization before
training or prediction. Multi-channel descriptors (several poolings of the
same example concatenated) are post-mapped per channel and fused so that the
linear kernel of fused vectors equals the average of per-channel kernels.
C is chosen from a grid by seeded, stratified two-fold cross-validation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import featmap
from .metrics import compute_metrics, metric_value
from .seqcore import DataError, Descriptor, LabeledDescriptor, class_order, format_float
from .solvers import LinearModel, SolverConfig, svm_l2_fit

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
CV_METRICS = ("acc", "map", "f1")
MODEL_FORMAT = "seqpool-ova"
MODEL_VERSION = 1
# large C needs more passes than pooling fits typically do
CLASSIFIER_SOLVER = SolverConfig(max_passes=10_000)


class ModelFormatError(DataError):
    pass


def fuse_channels(channels: Sequence[np.ndarray | Descriptor]) -> np.ndarray:
    """L2-normalize each channel, scale by 1/sqrt(K) and concatenate."""
    if len(channels) == 0:
        raise DataError("need at least one channel")
    arrays = [c.values if isinstance(c, Descriptor) else np.asarray(c, dtype=np.float64).ravel() for c in channels]
    k = len(arrays)
    return np.concatenate([featmap.l2_normalize(a) for a in arrays]) / np.sqrt(k)


def split_channels(values: np.ndarray, channel_sizes: Sequence[int]) -> list[np.ndarray]:
    values = np.asarray(values, dtype=np.float64).ravel()
    if sum(channel_sizes) != values.size:
        raise DataError(f"descriptor length {values.size} does not match channel layout {list(channel_sizes)}")
    return np.split(values, np.cumsum(channel_sizes)[:-1])


def transform_features(
    values: np.ndarray,
    post_map: str,
    channel_sizes: Sequence[int] | None = None,
    chi2: featmap.Chi2MapConfig = featmap.Chi2MapConfig(),
) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).ravel()
    sizes = [values.size] if channel_sizes is None else list(channel_sizes)
    return fuse_channels([featmap.apply_map(post_map, c, chi2) for c in split_channels(values, sizes)])


@dataclass(frozen=True)
class OvaModel:
    classes: tuple[str, ...]
    per_class: tuple[LinearModel, ...]
    post_map: str
    c_selected: float
    channel_sizes: tuple[int, ...]
    chi2: featmap.Chi2MapConfig = field(default_factory=featmap.Chi2MapConfig)
    cv_scores: dict = field(default_factory=dict, compare=False)

    @property
    def input_dim(self) -> int:
        return sum(self.channel_sizes)

    @property
    def feature_dim(self) -> int:
        return sum(featmap.map_dim(self.post_map, s, self.chi2) for s in self.channel_sizes)

    @property
    def weight_matrix(self) -> np.ndarray:
        return np.vstack([m.weights for m in self.per_class])

    def features(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != self.input_dim:
            raise DataError(f"descriptor length {values.size} does not match the model ({self.input_dim})")
        return transform_features(values, self.post_map, self.channel_sizes, self.chi2)

    def decision_scores(self, values: np.ndarray) -> np.ndarray:
        return self.weight_matrix @ self.features(values)


@dataclass(frozen=True)
class Prediction:
    label: str
    scores: dict


def predict(m: OvaModel, d: Descriptor | np.ndarray) -> Prediction:
    values = d.values if isinstance(d, Descriptor) else np.asarray(d, dtype=np.float64)
    s = m.decision_scores(values)
    k = int(np.argmax(s))
    return Prediction(m.classes[k], {c: float(v) for c, v in zip(m.classes, s)})


def score_matrix(m: OvaModel, descriptors: Sequence[Descriptor | np.ndarray]) -> np.ndarray:
    if len(descriptors) == 0:
        return np.zeros((0, len(m.classes)))
    F = np.vstack([m.features(d.values if isinstance(d, Descriptor) else d) for d in descriptors])
    return F @ m.weight_matrix.T


def _fit_ova(F: np.ndarray, y: np.ndarray, n_classes: int, cfg: SolverConfig) -> list[LinearModel]:
    models = []
    for k in range(n_classes):
        labels = np.where(y == k, 1.0, -1.0)
        models.append(svm_l2_fit(F, labels, cfg))
    return models


def stratified_folds(y: np.ndarray, seed: int, n_folds: int = 2) -> np.ndarray:
    """Fold index per example; each class is shuffled and dealt round-robin."""
    rng = np.random.Generator(np.random.Philox(seed))
    folds = np.empty(y.shape[0], dtype=np.int64)
    for k in np.unique(y):
        idx = np.flatnonzero(y == k)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % n_folds
    return folds


def train_ova(
    data: Sequence[LabeledDescriptor],
    post_map: str = "posneg",
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    seed: int = 0,
    cv_metric: str = "acc",
    channel_sizes: Sequence[int] | None = None,
    chi2: featmap.Chi2MapConfig = featmap.Chi2MapConfig(),
    solver_cfg: SolverConfig = CLASSIFIER_SOLVER,
) -> OvaModel:
    if post_map not in featmap.MAPS:
        raise ValueError(f"unknown post-map {post_map!r}; choose from {featmap.MAPS}")
    if cv_metric not in CV_METRICS:
        raise ValueError(f"unknown CV metric {cv_metric!r}; choose from {CV_METRICS}")
    if not c_grid:
        raise ValueError("c_grid must not be empty")
    if any(not c > 0 for c in c_grid):
        raise ValueError(f"C values must be positive, got {list(c_grid)}")
    classes = tuple(class_order(d.label for d in data))
    if len(classes) < 2:
        raise DataError(f"need at least 2 classes, got {len(classes)}")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[d.label] for d in data])
    counts = np.bincount(y, minlength=len(classes))
    if counts.min() < 2:
        small = [c for c, n in zip(classes, counts) if n < 2]
        raise DataError(f"classes with fewer than 2 training examples: {small}")
    lengths = {len(d.descriptor) for d in data}
    if len(lengths) != 1:
        raise DataError(f"descriptor lengths differ: {sorted(lengths)}")
    dim = lengths.pop()
    sizes = (dim,) if channel_sizes is None else tuple(int(s) for s in channel_sizes)
    F = np.vstack([transform_features(d.descriptor.values, post_map, sizes, chi2) for d in data])

    grid = sorted(float(c) for c in c_grid)
    cv_scores = {}
    if len(grid) == 1:
        best = grid[0]
    else:
        folds = stratified_folds(y, seed)
        best, best_score = None, -np.inf
        for C in grid:
            cfg = solver_cfg.with_(C=C, seed=seed)
            fold_scores = []
            for f in range(2):
                tr, te = folds != f, folds == f
                models = _fit_ova(F[tr], y[tr], len(classes), cfg)
                W = np.vstack([m.weights for m in models])
                report = compute_metrics(F[te] @ W.T, y[te], classes)
                fold_scores.append(metric_value(report, cv_metric))
            score = float(np.mean(fold_scores))
            cv_scores[C] = score
            if score > best_score:
                best, best_score = C, score

    models = _fit_ova(F, y, len(classes), solver_cfg.with_(C=best, seed=seed))
    return OvaModel(
        classes=classes,
        per_class=tuple(models),
        post_map=post_map,
        c_selected=best,
        channel_sizes=sizes,
        chi2=chi2,
        cv_scores=cv_scores,
    )


def save_model(m: OvaModel, path: str | os.PathLike) -> None:
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "classes": list(m.classes),
        "post_map": m.post_map,
        "C": format_float(m.c_selected),
        "channel_sizes": list(m.channel_sizes),
        "chi2_order": m.chi2.order,
        "chi2_period": format_float(m.chi2.period),
        "dual_objectives": [format_float(pm.final_dual_objective) for pm in m.per_class],
        "converged": [bool(pm.converged) for pm in m.per_class],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for pm in m.per_class:
            fh.write(",".join(format_float(v) for v in pm.weights) + "\n")


def load_model(path: str | os.PathLike) -> OvaModel:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"no such model file: {path}")
    lines = path.read_text().splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: line 1: empty model file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: line 1: malformed header ({e})") from None
    if not isinstance(header, dict) or header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: line 1: not a {MODEL_FORMAT} file")
    if header.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: line 1: version mismatch (file {header.get('version')}, expected {MODEL_VERSION})")
    try:
        classes = tuple(header["classes"])
        post_map = header["post_map"]
        C = float(header["C"])
        sizes = tuple(int(s) for s in header["channel_sizes"])
        chi2 = featmap.Chi2MapConfig(int(header["chi2_order"]), float(header["chi2_period"]))
        duals = [float(v) for v in header["dual_objectives"]]
        converged = list(header["converged"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: line 1: malformed header ({e})") from None
    if post_map not in featmap.MAPS:
        raise ModelFormatError(f"{path}: line 1: unknown post_map {post_map!r}")
    dim = sum(featmap.map_dim(post_map, s, chi2) for s in sizes)
    cfg = CLASSIFIER_SOLVER.with_(C=C)
    models = []
    for k, cls in enumerate(classes):
        lineno = k + 2
        if lineno > len(lines) or not lines[lineno - 1].strip():
            raise ModelFormatError(f"{path}: line {lineno}: missing weight row for class {cls!r} (truncated file)")
        try:
            w = np.array([float(tok) for tok in lines[lineno - 1].split(",")])
        except ValueError:
            raise ModelFormatError(f"{path}: line {lineno}: non-numeric weight") from None
        if w.size != dim:
            raise ModelFormatError(f"{path}: line {lineno}: {w.size} weights, expected {dim}")
        models.append(LinearModel(w, cfg, duals[k], bool(converged[k])))
    if len(lines) > len(classes) + 1 and any(l.strip() for l in lines[len(classes) + 1 :]):
        raise ModelFormatError(f"{path}: line {len(classes) + 2}: unexpected trailing content")
    return OvaModel(classes, tuple(models), post_map, C, sizes, chi2)
