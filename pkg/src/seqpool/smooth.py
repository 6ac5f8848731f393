"""Smoothing strategies that turn raw frames x_t into the signal v_t.

Reverse-direction processing is always "reverse the frames, then smooth",
so the forward pipeline applied to ``reverse_sequence(x)`` is the reverse
pipeline by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seqcore import DataError, FrameSequence

STRATEGIES = ("none", "independent", "ma", "tvm")


@dataclass(frozen=True)
class SmoothedSequence:
    values: np.ndarray
    strategy: str
    direction: str = "forward"
    window: int | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> int:
        return self.values.shape[0]


def _direction(x: FrameSequence) -> str:
    return "reverse" if x.id.endswith("@reverse") else "forward"


def normalize_rows(a: np.ndarray) -> np.ndarray:
    """L2-normalize each row; zero rows stay zero."""
    a = np.asarray(a, dtype=np.float64)
    # divide by the row max first so tiny or huge rows neither underflow nor overflow
    scale = np.abs(a).max(axis=1, initial=0.0)
    out = np.zeros_like(a)
    nz = scale > 0
    b = a[nz] / scale[nz, None]
    out[nz] = b / np.sqrt(np.einsum("ij,ij->i", b, b))[:, None]
    return out


def no_smoothing(x: FrameSequence) -> SmoothedSequence:
    return SmoothedSequence(x.frames, "none", _direction(x))


def independent_frames(x: FrameSequence) -> SmoothedSequence:
    return SmoothedSequence(normalize_rows(x.frames), "independent", _direction(x))


def moving_average(x: FrameSequence, window: int) -> SmoothedSequence:
    """Forward moving average over rows t .. t+window-1, truncated at the end.

    The output is not normalized.
    """
    if int(window) != window or window < 1:
        raise DataError(f"moving-average window must be a positive integer, got {window}")
    window = int(window)
    X = x.frames
    T = X.shape[0]
    csum = np.vstack([np.zeros((1, X.shape[1])), np.cumsum(X, axis=0)])
    start = np.arange(T)
    stop = np.minimum(start + window, T)
    out = (csum[stop] - csum[start]) / (stop - start)[:, None]
    if window == 1:
        # exact identity; the cumsum difference above is not bit-exact
        out = X.copy()
    return SmoothedSequence(out, "ma", _direction(x), window=window)


def time_varying_mean(x: FrameSequence) -> SmoothedSequence:
    """Normalized cumulative means, m_t = ((t-1) m_{t-1} + x_t) / t."""
    X = x.frames
    m = np.empty_like(X)
    m[0] = X[0]
    for t in range(1, X.shape[0]):
        m[t] = (t * m[t - 1] + X[t]) / (t + 1)
    return SmoothedSequence(normalize_rows(m), "tvm", _direction(x))


def reverse_sequence(x: FrameSequence) -> FrameSequence:
    if x.id.endswith("@reverse"):
        new_id = x.id[: -len("@reverse")]
    else:
        new_id = x.id + "@reverse"
    return FrameSequence(x.frames[::-1], id=new_id)


def smooth(x: FrameSequence, strategy: str, window: int = 20) -> SmoothedSequence:
    if strategy == "none":
        return no_smoothing(x)
    if strategy == "independent":
        return independent_frames(x)
    if strategy == "ma":
        return moving_average(x, window)
    if strategy == "tvm":
        return time_varying_mean(x)
    raise ValueError(f"unknown smoothing strategy {strategy!r}; choose from {STRATEGIES}")
