"""Synthetic benchmarks, end-to-end evaluation, robustness experiments and dynamics images."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classify, featmap, rankpool
from .metrics import MetricReport, compute_metrics
from .pipeline import PipelineConfig, pool_records
from .seqcore import (
    DataError,
    DatasetManifest,
    FrameSequence,
    LabeledDescriptor,
    ManifestRecord,
    read_manifest,
    write_manifest,
    write_sequence,
)

DEFAULT_DROP_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25)


# -- synthetic data ------------------------------------------------------------


@dataclass(frozen=True)
class SynthClass:
    direction: np.ndarray
    reversed: bool = False
    name: str = ""


@dataclass(frozen=True)
class SynthConfig:
    """Drifting-ramp sequences: x_t = 0.5 + ramp(t) * direction + noise.

    ``ramp(t) = t / T`` for ordinary classes. Reversed classes play the same
    ramp backwards, ``(T + 1 - t) / T``, so at zero noise a class and its
    reversed twin contain exactly the same frames in opposite order.
    ``T_range`` (inclusive) draws a per-sequence length instead of fixed ``T``.
    """

    classes: tuple[SynthClass, ...]
    T: int = 50
    D: int = 20
    noise_sigma: float = 0.1
    per_class: int = 40
    seed: int = 7
    T_range: tuple[int, int] | None = None

    def __post_init__(self):
        if not self.classes:
            raise ValueError("class list must not be empty")
        for c in self.classes:
            d = np.asarray(c.direction, dtype=np.float64)
            if d.shape != (self.D,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
                raise ValueError("class directions must be unit vectors of length D")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.T < 1 or self.per_class < 1:
            raise ValueError("T and per_class must be positive")


def class_name(c: SynthClass, i: int) -> str:
    return c.name or f"c{i}{'r' if c.reversed else 'f'}"


def drift4(seed: int = 7, T: int = 50, D: int = 20, noise_sigma: float = 0.1, per_class: int = 40) -> SynthConfig:
    """Two random orthonormal drift directions, each played forward and reversed."""
    rng = np.random.Generator(np.random.Philox(seed))
    Q, _ = np.linalg.qr(rng.normal(size=(D, 2)))
    dirs = [Q[:, 0], Q[:, 1]]
    classes = (
        SynthClass(dirs[0], False, "a-forward"),
        SynthClass(dirs[0], True, "a-reverse"),
        SynthClass(dirs[1], False, "b-forward"),
        SynthClass(dirs[1], True, "b-reverse"),
    )
    return SynthConfig(classes, T=T, D=D, noise_sigma=noise_sigma, per_class=per_class, seed=seed)


PRESETS = {"drift4": drift4}


def synth_sequence(c: SynthClass, T: int, D: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(1, T + 1, dtype=np.float64)
    ramp = (T + 1 - t) / T if c.reversed else t / T
    X = 0.5 + ramp[:, None] * np.asarray(c.direction)[None, :]
    if sigma > 0:
        X = X + rng.normal(0.0, sigma, size=(T, D))
    return X


def generate_synthetic(cfg: SynthConfig, out_dir: str | os.PathLike | None = None):
    """Generate train and test sequences for every class.

    Returns ``(manifest, sequences)``. With ``out_dir`` the sequences and
    ``manifest.csv`` are written there as well.
    """
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    records, seqs = [], []
    for split in ("train", "test"):
        for i, c in enumerate(cfg.classes):
            name = class_name(c, i)
            for k in range(cfg.per_class):
                T = cfg.T if cfg.T_range is None else int(rng.integers(cfg.T_range[0], cfg.T_range[1] + 1))
                path = f"seqs/{split}/{name}_{k:03d}.csv"
                X = synth_sequence(c, T, cfg.D, cfg.noise_sigma, rng)
                records.append(ManifestRecord(path, name, split))
                seqs.append(FrameSequence(X, id=path))
    root = Path(out_dir) if out_dir is not None else Path(".")
    manifest = DatasetManifest(tuple(records), root=root)
    if out_dir is not None:
        for r, s in zip(records, seqs):
            write_sequence(s, root / r.path)
        write_manifest(manifest, root / "manifest.csv")
        manifest = read_manifest(root / "manifest.csv")
    return manifest, seqs


# -- end-to-end evaluation -----------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    post_map: str = "posneg"
    c_grid: tuple[float, ...] = classify.DEFAULT_C_GRID
    cv_metric: str = "acc"
    seed: int = 0
    chi2: featmap.Chi2MapConfig = field(default_factory=featmap.Chi2MapConfig)


def train_on(manifest: DatasetManifest, cfg: EvalConfig, jobs: int = 1, transform=None) -> classify.OvaModel:
    manifest.check_trainable()
    train = manifest.split("train")
    descs = pool_records(manifest, train, cfg.pipeline, jobs=jobs, transform=transform)
    data = [LabeledDescriptor(d, r.label) for d, r in zip(descs, train)]
    return classify.train_ova(
        data, post_map=cfg.post_map, c_grid=cfg.c_grid, seed=cfg.seed, cv_metric=cfg.cv_metric, chi2=cfg.chi2
    )


def _test_scores(model, manifest, records, cfg: EvalConfig, jobs=1, transform=None):
    descs = pool_records(manifest, records, cfg.pipeline, jobs=jobs, transform=transform)
    return classify.score_matrix(model, descs)


def evaluate(
    manifest: DatasetManifest, cfg: EvalConfig, split: str = "test", jobs: int = 1, transform=None
) -> MetricReport:
    """Pool, train on the train split, report metrics on ``split``."""
    model = train_on(manifest, cfg, jobs=jobs, transform=transform)
    records = manifest.split(split)
    if not records:
        raise DataError(f"manifest has no {split!r} records")
    S = _test_scores(model, manifest, records, cfg, jobs=jobs, transform=transform)
    return compute_metrics(S, [r.label for r in records], model.classes)


def evaluate_descriptors(model: classify.OvaModel, descriptors, labels: Sequence[str]) -> MetricReport:
    return compute_metrics(classify.score_matrix(model, descriptors), list(labels), model.classes)


# -- frame dropping ------------------------------------------------------------


def fraction_key(p: float) -> int:
    return int(round(p * 1_000_000))


@dataclass(frozen=True)
class FrameDropper:
    """Remove floor(p * T) uniformly random frames; seeded per (seed, p, sequence)."""

    fraction: float
    seed: int

    def __call__(self, x: FrameSequence, index: int) -> FrameSequence:
        n_drop = int(np.floor(self.fraction * x.T))
        if n_drop == 0:
            return x
        if x.T - n_drop < 2:
            raise DataError(f"dropping {n_drop} of {x.T} frames leaves fewer than 2 frames ({x.id})")
        rng = np.random.default_rng([self.seed, fraction_key(self.fraction), index])
        keep = np.sort(rng.choice(x.T, size=x.T - n_drop, replace=False))
        return x.with_frames(x.frames[keep])


@dataclass(frozen=True)
class FrameDropRow:
    fraction: float
    report: MetricReport
    delta_accuracy: float
    delta_map: float


def frame_drop_experiment(
    manifest: DatasetManifest,
    cfg: EvalConfig,
    drop_fractions: Sequence[float] = DEFAULT_DROP_FRACTIONS,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[MetricReport, list[FrameDropRow]]:
    """Re-run pooling and training with frames dropped from train and test sequences.

    Returns the unperturbed report and one row per fraction holding the
    absolute metrics and their change from the unperturbed run.
    """
    for p in drop_fractions:
        if not 0.0 <= p <= 0.9:
            raise ValueError(f"drop fractions must lie in [0, 0.9], got {p}")
    baseline = evaluate(manifest, cfg, jobs=jobs)
    rows = []
    for p in drop_fractions:
        report = evaluate(manifest, cfg, jobs=jobs, transform=FrameDropper(p, seed))
        rows.append(
            FrameDropRow(p, report, report.accuracy - baseline.accuracy, report.map - baseline.map)
        )
    return baseline, rows


# -- length buckets ------------------------------------------------------------


@dataclass(frozen=True)
class BucketRow:
    bucket: int
    min_T: int
    max_T: int
    report: MetricReport


def length_bucket_report(
    manifest: DatasetManifest, cfg: EvalConfig, buckets: int = 3, jobs: int = 1
) -> tuple[MetricReport, list[BucketRow]]:
    """Train once, then report test metrics per equal-count length bucket.

    Test sequences are stably sorted by length and split into ``buckets``
    contiguous groups whose sizes differ by at most one.
    """
    if buckets < 2:
        raise ValueError("need at least 2 buckets")
    test = manifest.split("test")
    if len(test) < buckets:
        raise DataError(f"{len(test)} test sequences is fewer than {buckets} buckets")
    model = train_on(manifest, cfg, jobs=jobs)
    S = _test_scores(model, manifest, test, cfg, jobs=jobs)
    labels = [r.label for r in test]
    lengths = np.array([_sequence_length(manifest.resolve(r)) for r in test])
    order = np.argsort(lengths, kind="stable")
    overall = compute_metrics(S, labels, model.classes)
    rows = []
    for b, idx in enumerate(np.array_split(order, buckets)):
        rep = compute_metrics(S[idx], [labels[i] for i in idx], model.classes)
        rows.append(BucketRow(b, int(lengths[idx].min()), int(lengths[idx].max()), rep))
    return overall, rows


def _sequence_length(path: Path) -> int:
    with open(path) as fh:
        return sum(1 for line in fh if line.strip())


# -- dynamics visualization ----------------------------------------------------


def dynamics_image(u: np.ndarray, width: int, height: int) -> np.ndarray:
    """Min-max scale ``u`` to 0..255 and reshape to height x width (row-major)."""
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size != width * height:
        raise DataError(f"descriptor has {u.size} values, image needs {width}x{height}={width * height}")
    lo, hi = u.min(), u.max()
    if hi == lo:
        pix = np.full(u.shape, 128, dtype=np.uint8)
    else:
        pix = np.rint((u - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return pix.reshape(height, width)


def write_pgm(image: np.ndarray, path: str | os.PathLike) -> None:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + w * h], dtype=np.uint8)
    if pixels.size != w * h or maxval != 255:
        raise DataError(f"{path}: truncated or unsupported PGM")
    return pixels.reshape(h, w)


def visualize_dynamics(
    x: FrameSequence,
    width: int,
    height: int,
    cfg: rankpool.PoolingConfig | None = None,
    path: str | os.PathLike | None = None,
) -> np.ndarray:
    """Rank-pool raw pixel frames and render the forward weights as an 8-bit image."""
    if x.D != width * height:
        raise DataError(f"frames have D={x.D} values, image needs {width}x{height}={width * height}")
    if cfg is None:
        cfg = rankpool.PoolingConfig(smoothing="independent")
    elif cfg.smoothing != "independent":
        raise ValueError(f"dynamics images use independent frames, got smoothing={cfg.smoothing!r}")
    u = rankpool.rank_pool(x, replace(cfg, direction="forward")).values
    img = dynamics_image(u, width, height)
    if path is not None:
        write_pgm(img, path)
    return img
