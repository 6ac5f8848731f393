"""Pooling with the parameters of other fitted models: subspace and neural-net pooling.

Subspace pooling keeps the leading eigenvectors of the frame scatter
matrix V V^T (frames as the columns of V). The robust variant works with the
T x T gram matrix V^T V instead and maps each kept eigenvector e back to
frame space as V e / |V e|, which is well defined for any T and D and avoids
a D x D estimate when T < D.

Neural-net pooling trains a one-hidden-layer tanh network to regress t/T
from v_t and flattens its parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import smooth as _smooth
from .seqcore import DataError, Descriptor, DescriptorMeta, FrameSequence

SUBSPACE_VARIANTS = ("direct", "robust")


@dataclass(frozen=True)
class SubspaceConfig:
    components: int = 1
    variant: str = "robust"

    def __post_init__(self):
        if int(self.components) != self.components or self.components < 1:
            raise ValueError(f"components must be a positive integer, got {self.components}")
        if self.variant not in SUBSPACE_VARIANTS:
            raise ValueError(f"unknown subspace variant {self.variant!r}; choose from {SUBSPACE_VARIANTS}")


@dataclass(frozen=True)
class NNPoolConfig:
    hidden_units: int = 10
    learning_rate: float = 0.01
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1 or self.epochs < 1 or not self.learning_rate > 0:
            raise ValueError("hidden_units, epochs and learning_rate must be positive")

    def n_params(self, D: int) -> int:
        H = self.hidden_units
        return H * D + H + H + 1


# -- symmetric eigendecomposition ---------------------------------------------


@njit(cache=True)
def _jacobi(A, tol, max_sweeps):
    n = A.shape[0]
    V = np.eye(n)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += A[i, j] * A[i, j]
    scale = np.sqrt(total)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        if np.sqrt(off) <= tol * scale or off == 0.0:
            return V, sweeps - 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return V, sweeps


def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.

    Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below
    ``tol`` times the norm of ``A``.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V, _ = _jacobi(A, tol, max_sweeps)
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    U = np.array(U, dtype=np.float64)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


@dataclass(frozen=True)
class SubspaceFit:
    basis: np.ndarray  # D x d, orthonormal columns
    eigenvalues: np.ndarray  # all eigenvalues of V V^T (descending, zero-padded to D)


def subspace_basis(V: np.ndarray, cfg: SubspaceConfig) -> SubspaceFit:
    """Leading subspace of a D x T frame matrix ``V`` (columns are frames)."""
    D, T = V.shape
    d = cfg.components
    if d > min(D, T):
        raise DataError(f"subspace dimension {d} exceeds min(D, T) = {min(D, T)}")
    if not np.any(V):
        raise DataError("all-zero sequence has no principal subspace")
    if cfg.variant == "direct":
        lam, U = jacobi_eigh(V @ V.T)
        basis = U[:, :d]
    else:
        lam_t, E = jacobi_eigh(V.T @ V)
        cols = V @ E[:, :d]
        norms = np.linalg.norm(cols, axis=0)
        if np.any(norms == 0):
            raise DataError("gram matrix has fewer than d non-zero eigenvalues")
        basis = cols / norms
        lam = np.zeros(D)
        k = min(D, T)
        lam[:k] = lam_t[:k]
    return SubspaceFit(fix_signs(basis), np.asarray(lam))


def subspace_pool(x: FrameSequence, smoothing: str = "tvm", cfg: SubspaceConfig = SubspaceConfig()) -> Descriptor:
    V = _smooth.smooth(x, smoothing).values.T
    fit = subspace_basis(V, cfg)
    meta = DescriptorMeta(pooler=f"subspace-{cfg.variant}", smoothing=smoothing)
    # column-major concatenation: first eigenvector first
    return Descriptor(fit.basis.T.ravel(), meta)


def reconstruction_error(V: np.ndarray, basis: np.ndarray) -> float:
    R = V - basis @ (basis.T @ V)
    return float(np.sum(R * R))


# -- neural-net pooling ------------------------------------------------------


@dataclass
class MLPParams:
    W1: np.ndarray  # H x D
    b1: np.ndarray  # H
    w2: np.ndarray  # H
    b2: float

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def unflatten(cls, theta: np.ndarray, D: int, H: int) -> "MLPParams":
        theta = np.asarray(theta, dtype=np.float64)
        i = H * D
        return cls(theta[:i].reshape(H, D).copy(), theta[i : i + H].copy(), theta[i + H : i + 2 * H].copy(), float(theta[-1]))


def init_params(D: int, cfg: NNPoolConfig) -> MLPParams:
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    H = cfg.hidden_units
    return MLPParams(
        W1=rng.normal(0.0, 1.0 / np.sqrt(D), size=(H, D)),
        b1=np.zeros(H),
        w2=rng.normal(0.0, 1.0 / np.sqrt(H), size=H),
        b2=0.0,
    )


def mse_loss_and_grad(p: MLPParams, X: np.ndarray, y: np.ndarray, scale: float = 1.0):
    """Mean squared error (times ``scale``) and its gradient w.r.t. every parameter."""
    n = X.shape[0]
    A = X @ p.W1.T + p.b1
    Hid = np.tanh(A)
    out = Hid @ p.w2 + p.b2
    r = out - y
    loss = scale * float(r @ r) / n
    dout = (2.0 * scale / n) * r
    g_w2 = Hid.T @ dout
    g_b2 = float(dout.sum())
    dA = np.outer(dout, p.w2) * (1.0 - Hid * Hid)
    g_W1 = dA.T @ X
    g_b1 = dA.sum(axis=0)
    return loss, MLPParams(g_W1, g_b1, g_w2, g_b2)


@dataclass(frozen=True)
class NNFit:
    params: MLPParams
    losses: np.ndarray  # loss before each epoch's update, plus the final loss


def train_mlp(X: np.ndarray, y: np.ndarray, cfg: NNPoolConfig) -> NNFit:
    p = init_params(X.shape[1], cfg)
    lr = cfg.learning_rate
    losses = []
    # divergence is detected and reported below, so silence numpy's overflow warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.epochs + 1):
            loss, g = mse_loss_and_grad(p, X, y)
            if not np.isfinite(loss):
                raise FloatingPointError(f"nn_pool diverged at epoch {epoch} (loss {loss})")
            losses.append(loss)
            p = MLPParams(p.W1 - lr * g.W1, p.b1 - lr * g.b1, p.w2 - lr * g.w2, p.b2 - lr * g.b2)
        loss, _ = mse_loss_and_grad(p, X, y)
        if not np.isfinite(loss) or not np.all(np.isfinite(p.flatten())):
            raise FloatingPointError(f"nn_pool diverged at epoch {cfg.epochs} (loss {loss})")
    losses.append(loss)
    return NNFit(p, np.array(losses))


def nn_pool(x: FrameSequence, smoothing: str = "tvm", cfg: NNPoolConfig = NNPoolConfig()) -> Descriptor:
    if x.T < 2:
        raise DataError(f"nn pooling needs T >= 2, got T={x.T}")
    V = _smooth.smooth(x, smoothing).values
    targets = np.arange(1, x.T + 1, dtype=np.float64) / x.T
    fit = train_mlp(V, targets, cfg)
    return Descriptor(fit.params.flatten(), DescriptorMeta(pooler="nn", smoothing=smoothing))


def gradient_check(cfg: NNPoolConfig, X: np.ndarray, y: np.ndarray, step: float = 1e-5, params: MLPParams | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per entry is |a - n| / max(|a| + |n|, 1e-8).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] > 10 or X.shape[1] > 5:
        raise DataError("gradient_check is meant for T <= 10, D <= 5")
    D, H = X.shape[1], cfg.hidden_units
    p = init_params(D, cfg) if params is None else params
    _, g = mse_loss_and_grad(p, X, y)
    analytic = g.flatten()
    theta = p.flatten()
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        tp = theta.copy()
        tp[i] += step
        tm = theta.copy()
        tm[i] -= step
        lp, _ = mse_loss_and_grad(MLPParams.unflatten(tp, D, H), X, y)
        lm, _ = mse_loss_and_grad(MLPParams.unflatten(tm, D, H), X, y)
        numeric[i] = (lp - lm) / (2 * step)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(rel.max())
