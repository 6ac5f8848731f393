"""Order-agnostic pooling baselines and the two-level temporal pyramid."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .seqcore import DataError, Descriptor, DescriptorMeta, FrameSequence


def average_pool(x: FrameSequence) -> Descriptor:
    """Componentwise mean.

    Column sums are correctly rounded (``math.fsum``), so the result does not
    depend on frame order down to the last bit.
    """
    sums = np.array([math.fsum(c) for c in x.frames.T])
    return Descriptor(sums / x.T, DescriptorMeta(pooler="avg"))


def max_pool(x: FrameSequence) -> Descriptor:
    return Descriptor(x.frames.max(axis=0), DescriptorMeta(pooler="max"))


def temporal_pyramid(x: FrameSequence, base: Callable[[FrameSequence], Descriptor] = average_pool) -> Descriptor:
    """[base(all) | base(first ceil(T/2) frames) | base(last floor(T/2) frames)]."""
    if x.T < 2:
        raise DataError(f"temporal pyramid needs T >= 2, got T={x.T}")
    half = (x.T + 1) // 2
    whole = base(x)
    first = base(x.with_frames(x.frames[:half]))
    last = base(x.with_frames(x.frames[half:]))
    values = np.concatenate([whole.values, first.values, last.values])
    return Descriptor(values, DescriptorMeta(pooler=f"tp-{whole.meta.pooler}"))
