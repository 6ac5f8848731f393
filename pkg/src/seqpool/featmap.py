"""Explicit non-linear feature maps.

``posneg`` splits a vector into its positive and negative parts and takes
square roots, so that the linear kernel of mapped vectors is the real part
of the Hellinger kernel evaluated on the expanded (2D) feature.
``chi2_map`` is the homogeneous-kernel sampling approximation of the
additive chi-squared kernel k(a, b) = 2ab / (a + b).

All maps accept a single vector or a 2-D array of row vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAPS = ("none", "posneg", "sqrt", "chi2")


@dataclass(frozen=True)
class Chi2MapConfig:
    order: int = 1
    period: float = 0.65

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 0:
            raise ValueError(f"chi2 order must be a non-negative integer, got {self.order}")
        if not self.period > 0:
            raise ValueError(f"chi2 period must be positive, got {self.period}")

    @property
    def block(self) -> int:
        return 2 * self.order + 1


def posneg_map(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate([np.sqrt(np.maximum(x, 0.0)), np.sqrt(np.maximum(-x, 0.0))], axis=-1)


def signed_sqrt(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.sqrt(np.abs(x))


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm along the last axis; zero vectors map to zero."""
    x = np.asarray(x, dtype=np.float64)
    scale = np.abs(x).max(axis=-1, keepdims=True, initial=0.0)
    y = np.divide(x, scale, out=np.zeros_like(x), where=scale > 0)
    norm = np.linalg.norm(y, axis=-1, keepdims=True)
    return np.divide(y, norm, out=np.zeros_like(y), where=norm > 0)


def sech(x):
    return 1.0 / np.cosh(x)


def chi2_map(x: np.ndarray, cfg: Chi2MapConfig = Chi2MapConfig()) -> np.ndarray:
    """Map each component c to [sqrt(cL k0), sqrt(2cLk_j) cos(jL log c), sqrt(2cLk_j) sin(jL log c), ...].

    Blocks of length ``2*order + 1`` are laid out component by component.
    Zero components give zero blocks.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("chi2_map requires non-negative input")
    L = cfg.period
    pos = x > 0
    logc = np.log(np.where(pos, x, 1.0))
    blocks = [np.sqrt(x * L)]
    for j in range(1, cfg.order + 1):
        amp = np.sqrt(2.0 * x * L * sech(np.pi * j * L))
        arg = j * L * logc
        blocks.append(np.where(pos, amp * np.cos(arg), 0.0))
        blocks.append(np.where(pos, amp * np.sin(arg), 0.0))
    out = np.stack(blocks, axis=-1)
    return out.reshape(*x.shape[:-1], x.shape[-1] * cfg.block)


def chi2_kernel(a, b):
    """Exact additive chi-squared kernel sum_i 2 a_i b_i / (a_i + b_i)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    s = a + b
    return np.sum(np.divide(2 * a * b, s, out=np.zeros_like(s), where=s > 0), axis=-1)


def inner_product_check(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return float(np.dot(x, y))


def map_dim(name: str, d: int, chi2: Chi2MapConfig = Chi2MapConfig()) -> int:
    """Output length of feature map ``name`` on a length-``d`` input."""
    if name in ("none", "sqrt"):
        return d
    if name == "posneg":
        return 2 * d
    if name == "chi2":
        return chi2.block * d
    raise ValueError(f"unknown feature map {name!r}; choose from {MAPS}")


def apply_map(name: str, x: np.ndarray, chi2: Chi2MapConfig = Chi2MapConfig()) -> np.ndarray:
    if name == "none":
        return np.asarray(x, dtype=np.float64)
    if name == "posneg":
        return posneg_map(x)
    if name == "sqrt":
        return signed_sqrt(x)
    if name == "chi2":
        return chi2_map(x, chi2)
    raise ValueError(f"unknown feature map {name!r}; choose from {MAPS}")
