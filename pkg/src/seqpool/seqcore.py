"""Core types and CSV I/O shared by every pooler.

All numeric files are header-less CSV. Sequences hold one frame per row,
descriptors are a single row, and manifests are ``path,label,split`` rows
whose paths resolve relative to the manifest's directory.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SPLITS = ("train", "test", "validation")
DIRECTIONS = ("forward", "reverse", "both")


class DataError(ValueError):
    """Base class for malformed or invalid input data."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class EmptyFileError(DataError):
    pass


class RaggedRowError(DataError):
    pass


class NonNumericError(DataError):
    pass


class ManifestError(DataError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FrameSequence:
    """An ordered T x D matrix of per-frame feature vectors."""

    frames: np.ndarray
    id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 1:
            frames = frames[:, None]
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise DataError(f"sequence {self.id!r}: need a T x D matrix with T, D >= 1, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise DataError(f"sequence {self.id!r}: non-finite value")
        object.__setattr__(self, "frames", _frozen(frames))

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def D(self) -> int:
        return self.frames.shape[1]

    def with_frames(self, frames: np.ndarray, id: str | None = None) -> "FrameSequence":
        return FrameSequence(frames, self.id if id is None else id)


@dataclass(frozen=True)
class DescriptorMeta:
    pooler: str = ""
    direction: str = "forward"
    smoothing: str = ""
    feature_map: str = "none"


@dataclass(frozen=True)
class Descriptor:
    """Fixed-length pooled representation of one sequence."""

    values: np.ndarray
    meta: DescriptorMeta = field(default_factory=DescriptorMeta)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size == 0:
            raise DataError("empty descriptor")
        if not np.all(np.isfinite(values)):
            raise DataError("non-finite value in descriptor")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LabeledDescriptor:
    descriptor: Descriptor
    label: str

    def __post_init__(self):
        if not self.label:
            raise DataError("label must be non-empty")


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: str
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    root: Path = Path(".")

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ManifestError("empty manifest")
        seen = set()
        for r in self.records:
            if r.split not in SPLITS:
                raise ManifestError(f"unknown split {r.split!r}")
            if r.path in seen:
                raise ManifestError(f"duplicate path {r.path!r}")
            if not r.label:
                raise ManifestError(f"empty label for {r.path!r}")
            seen.add(r.path)

    def __len__(self) -> int:
        return len(self.records)

    def split(self, name: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == name]

    def resolve(self, record: ManifestRecord) -> Path:
        return self.root / record.path

    @property
    def classes(self) -> list[str]:
        return class_order(r.label for r in self.records)

    def check_trainable(self) -> None:
        train_labels = {r.label for r in self.split("train")}
        missing = sorted({r.label for r in self.records} - train_labels)
        if missing:
            raise ManifestError(f"labels without training examples: {missing}")


def class_order(labels: Iterable[str]) -> list[str]:
    """Class index assignment: sorted unique labels."""
    return sorted(set(labels))


def format_float(x: float) -> str:
    return "%.17g" % x


def _check_exists(path: Path) -> None:
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")


def _parse_rows(path: Path) -> list[list[float]]:
    _check_exists(path)
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericError(
                        f"{path}: non-numeric token {cell!r} at line {lineno}, column {col}"
                    ) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise RaggedRowError(
                    f"{path}: ragged row at line {lineno} ({len(values)} columns, expected {width})"
                )
            rows.append(values)
    if not rows:
        raise EmptyFileError(f"{path}: empty file")
    return rows


def read_sequence(path: str | os.PathLike, id: str | None = None) -> FrameSequence:
    path = Path(path)
    rows = _parse_rows(path)
    frames = np.array(rows, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(frames))
    if bad.size:
        r, c = bad[0] + 1
        raise NonNumericError(f"{path}: non-finite value at line {r}, column {c}")
    return FrameSequence(frames, id=str(path) if id is None else id)


def write_sequence(seq: FrameSequence, path: str | os.PathLike) -> None:
    _write_rows(seq.frames, path)


def _write_rows(matrix: np.ndarray, path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(format_float(v) for v in row))
            fh.write("\n")


def write_descriptor(d: Descriptor | Sequence[float] | np.ndarray, path: str | os.PathLike) -> None:
    if not isinstance(d, Descriptor):
        d = Descriptor(np.asarray(d, dtype=np.float64))
    _write_rows(d.values[None, :], path)


def read_descriptor(path: str | os.PathLike) -> Descriptor:
    path = Path(path)
    rows = _parse_rows(path)
    if len(rows) != 1:
        raise DataError(f"{path}: descriptor file must hold one row, found {len(rows)}")
    values = np.array(rows[0], dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite value")
    return Descriptor(values)


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    _check_exists(path)
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ManifestError(f"{path}: line {lineno}: expected 'path,label,split', got {len(row)} fields")
            p, label, split = (c.strip() for c in row)
            records.append(ManifestRecord(p, label, split))
    if not records:
        raise ManifestError(f"{path}: empty manifest")
    return DatasetManifest(tuple(records), root=path.parent)


def write_manifest(manifest: DatasetManifest | Sequence[ManifestRecord], path: str | os.PathLike) -> None:
    records = manifest.records if isinstance(manifest, DatasetManifest) else manifest
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for r in records:
            writer.writerow([r.path, r.label, r.split])


def check_descriptor_lengths(descriptors: Sequence[Descriptor]) -> int:
    """Return the shared descriptor length; raise if the lengths disagree."""
    lengths = {len(d) for d in descriptors}
    if len(lengths) != 1:
        raise DataError(f"descriptor lengths differ across the dataset: {sorted(lengths)}")
    return lengths.pop()
