"""Linear epsilon-SVR, pairwise RankSVM and squared-hinge SVM by dual coordinate descent.

None of the models has a bias term; scores are plain ``w @ x``.

Each solver sweeps over its dual variables in a fresh random order per
pass. The order comes from a Philox (counter-based) generator seeded with
``SolverConfig.seed`` so that fits are reproducible bit for bit regardless
of how many fits run in parallel. A pass records the largest projected
gradient seen (the KKT violation); when it drops below ``tol`` the final
state is re-checked without updates and the fit is flagged as converged.

``primal_oracle`` solves the same primal problems as a generic QP. It is
slow and only meant for checking the coordinate-descent solvers.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .seqcore import DataError

logger = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    C: float = 1.0
    epsilon: float = 0.1
    tol: float = 1e-4
    max_passes: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ValueError(f"max_passes must be a positive integer, got {self.max_passes}")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class SolverState:
    alphas: np.ndarray
    violations: list[float] = field(default_factory=list)
    dual_objectives: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    config: SolverConfig
    final_dual_objective: float
    converged: bool = True
    n_passes: int = 0
    state: SolverState | None = field(default=None, compare=False, repr=False)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights


# -- numba kernels ---------------------------------------------------------
#
# Each ``*_pass`` performs one sweep in the given order, updating the dual
# variables and w in place, and returns the largest violation seen before
# each update. ``*_violation`` evaluates the same quantity without updating.


@njit(cache=True)
def _dot(w, x):
    s = 0.0
    for k in range(w.shape[0]):
        s += w[k] * x[k]
    return s


@njit(cache=True)
def _svr_viol(g, b, C, eps):
    gp = g + eps
    gn = g - eps
    if b == 0.0:
        if gp < 0.0:
            return -gp
        if gn > 0.0:
            return gn
        return 0.0
    if b >= C:
        return gp if gp > 0.0 else 0.0
    if b <= -C:
        return -gn if gn < 0.0 else 0.0
    if b > 0.0:
        return abs(gp)
    return abs(gn)


@njit(cache=True)
def _svr_pass(X, y, w, beta, qdiag, order, C, eps):
    maxv = 0.0
    for i in order:
        xi = X[i]
        g = _dot(w, xi) - y[i]
        b = beta[i]
        v = _svr_viol(g, b, C, eps)
        if v > maxv:
            maxv = v
        H = qdiag[i]
        if H <= 0.0:
            # zero row: objective in b is -y b + eps |b|
            if y[i] > eps:
                z = C
            elif y[i] < -eps:
                z = -C
            else:
                z = 0.0
        else:
            if g + eps < H * b:
                z = b - (g + eps) / H
            elif g - eps > H * b:
                z = b - (g - eps) / H
            else:
                z = 0.0
            if z > C:
                z = C
            elif z < -C:
                z = -C
        d = z - b
        if d != 0.0:
            beta[i] = z
            for k in range(w.shape[0]):
                w[k] += d * xi[k]
    return maxv


@njit(cache=True)
def _svr_violation(X, y, w, beta, C, eps):
    maxv = 0.0
    for i in range(X.shape[0]):
        v = _svr_viol(_dot(w, X[i]) - y[i], beta[i], C, eps)
        if v > maxv:
            maxv = v
    return maxv


@njit(cache=True)
def _hinge_pg(G, a, C):
    if a <= 0.0:
        return G if G < 0.0 else 0.0
    if a >= C:
        return G if G > 0.0 else 0.0
    return G


@njit(cache=True)
def _rank_pass(V, hi, lo, w, alpha, qdiag, order, C):
    D = V.shape[1]
    maxv = 0.0
    for p in order:
        a_row = V[hi[p]]
        b_row = V[lo[p]]
        s = 0.0
        for k in range(D):
            s += w[k] * (a_row[k] - b_row[k])
        G = s - 1.0
        a = alpha[p]
        v = abs(_hinge_pg(G, a, C))
        if v > maxv:
            maxv = v
        H = qdiag[p]
        if H <= 0.0:
            # zero difference vector: constant slack, dual optimum at the bound
            z = C
        else:
            z = a - G / H
            if z < 0.0:
                z = 0.0
            elif z > C:
                z = C
        d = z - a
        if d != 0.0:
            alpha[p] = z
            for k in range(D):
                w[k] += d * (a_row[k] - b_row[k])
    return maxv


@njit(cache=True)
def _rank_violation(V, hi, lo, w, alpha, C):
    D = V.shape[1]
    maxv = 0.0
    for p in range(hi.shape[0]):
        s = 0.0
        for k in range(D):
            s += w[k] * (V[hi[p], k] - V[lo[p], k])
        v = abs(_hinge_pg(s - 1.0, alpha[p], C))
        if v > maxv:
            maxv = v
    return maxv


@njit(cache=True)
def _l2svm_pass(X, y, w, alpha, qdiag, order, C):
    diag = 0.5 / C
    maxv = 0.0
    for i in order:
        xi = X[i]
        G = y[i] * _dot(w, xi) - 1.0 + alpha[i] * diag
        a = alpha[i]
        pg = G if (a > 0.0 or G < 0.0) else 0.0
        if abs(pg) > maxv:
            maxv = abs(pg)
        z = a - G / (qdiag[i] + diag)
        if z < 0.0:
            z = 0.0
        d = z - a
        if d != 0.0:
            alpha[i] = z
            for k in range(w.shape[0]):
                w[k] += d * y[i] * xi[k]
    return maxv


@njit(cache=True)
def _l2svm_violation(X, y, w, alpha, C):
    diag = 0.5 / C
    maxv = 0.0
    for i in range(X.shape[0]):
        G = y[i] * _dot(w, X[i]) - 1.0 + alpha[i] * diag
        pg = G if (alpha[i] > 0.0 or G < 0.0) else 0.0
        if abs(pg) > maxv:
            maxv = abs(pg)
    return maxv


# -- objectives --------------------------------------------------------------


def svr_primal(w, X, t, C, eps) -> float:
    r = np.abs(t - X @ w) - eps
    return 0.5 * float(w @ w) + C * float(np.sum(np.maximum(r, 0.0)))


def svr_dual(beta, w, t, eps) -> float:
    return float(t @ beta) - eps * float(np.sum(np.abs(beta))) - 0.5 * float(w @ w)


def rank_primal(w, diffs, C) -> float:
    return 0.5 * float(w @ w) + C * float(np.sum(np.maximum(1.0 - diffs @ w, 0.0)))


def rank_dual(alpha, w) -> float:
    return float(np.sum(alpha)) - 0.5 * float(w @ w)


def l2svm_primal(w, X, y, C) -> float:
    m = np.maximum(1.0 - y * (X @ w), 0.0)
    return 0.5 * float(w @ w) + C * float(m @ m)


def l2svm_dual(alpha, w, C) -> float:
    return float(np.sum(alpha)) - 0.5 * float(w @ w) - float(alpha @ alpha) / (4.0 * C)


# -- drivers -----------------------------------------------------------------


def _check_matrix(X, name="features") -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"{name} must be an N x D matrix with N, D >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"non-finite value in {name}")
    return X


def _run(n, cfg, do_pass, violation, dual, alphas, w, kind):
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    state = SolverState(alphas=alphas)
    converged = False
    passes = 0
    for passes in range(1, cfg.max_passes + 1):
        order = rng.permutation(n)
        v = do_pass(order)
        state.violations.append(float(v))
        state.dual_objectives.append(dual())
        if v < cfg.tol and violation() < cfg.tol:
            converged = True
            break
    if not converged:
        msg = f"{kind}: no convergence after {passes} passes (last violation {state.violations[-1]:.3g})"
        logger.debug(msg)
        warnings.warn(msg, ConvergenceWarning, stacklevel=3)
    return LinearModel(
        weights=w,
        config=cfg,
        final_dual_objective=state.dual_objectives[-1],
        converged=converged,
        n_passes=passes,
        state=state,
    )


def svr_fit(features, targets, cfg: SolverConfig = SolverConfig()) -> LinearModel:
    """L1-loss epsilon-insensitive linear SVR.

    Minimizes ``0.5 |w|^2 + C sum_i max(0, |t_i - w.x_i| - eps)``. The dual
    variables ``beta`` lie in ``[-C, C]`` and ``w = sum_i beta_i x_i``.
    """
    X = _check_matrix(features)
    t = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    if t.shape[0] != X.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {t.shape[0]} targets")
    if not np.all(np.isfinite(t)):
        raise DataError("non-finite value in targets")
    n, D = X.shape
    w = np.zeros(D)
    beta = np.zeros(n)
    qdiag = np.einsum("ij,ij->i", X, X)
    C, eps = float(cfg.C), float(cfg.epsilon)
    return _run(
        n,
        cfg,
        lambda order: _svr_pass(X, t, w, beta, qdiag, order, C, eps),
        lambda: _svr_violation(X, t, w, beta, C, eps),
        lambda: svr_dual(beta, w, t, eps),
        beta,
        w,
        "svr_fit",
    )


def ranking_pairs(order) -> tuple[np.ndarray, np.ndarray]:
    """All (later, earlier) index pairs of a total order given as per-example ranks.

    Examples with equal rank are not paired.
    """
    r = np.asarray(order)
    n = r.shape[0]
    hi, lo = [], []
    for a in range(n):
        for b in range(n):
            if r[a] > r[b]:
                hi.append(a)
                lo.append(b)
    idx = np.lexsort((np.array(lo), np.array(hi))) if hi else np.array([], dtype=np.int64)
    return np.asarray(hi, dtype=np.int64)[idx], np.asarray(lo, dtype=np.int64)[idx]


def chronological_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    hi, lo = np.triu_indices(n, k=1)[::-1]
    # (j, i) with j > i, i.e. frame j comes after frame i
    order = np.lexsort((lo, hi))
    return np.ascontiguousarray(hi[order], dtype=np.int64), np.ascontiguousarray(lo[order], dtype=np.int64)


def ranksvm_fit(features, order=None, cfg: SolverConfig = SolverConfig()) -> LinearModel:
    """Pairwise RankSVM over every ordered pair of examples.

    ``order`` gives each example's rank (larger means later); the default
    is the row order. For each pair with ``order[a] > order[b]`` the
    constraint ``w.(v_a - v_b) >= 1 - slack`` enters an L1-hinge SVM.
    """
    V = _check_matrix(features)
    n = V.shape[0]
    if n < 2:
        raise DataError(f"ranksvm_fit needs at least 2 examples, got {n}")
    if order is None:
        hi, lo = chronological_pairs(n)
    else:
        order = np.asarray(order)
        if order.shape != (n,):
            raise DataError(f"order must have one rank per example ({n}), got shape {order.shape}")
        hi, lo = ranking_pairs(order)
        if hi.size == 0:
            raise DataError("order has no strictly ordered pair")
    diffs = V[hi] - V[lo]
    qdiag = np.einsum("ij,ij->i", diffs, diffs)
    w = np.zeros(V.shape[1])
    alpha = np.zeros(hi.shape[0])
    C = float(cfg.C)
    model = _run(
        hi.shape[0],
        cfg,
        lambda o: _rank_pass(V, hi, lo, w, alpha, qdiag, o, C),
        lambda: _rank_violation(V, hi, lo, w, alpha, C),
        lambda: rank_dual(alpha, w),
        alpha,
        w,
        "ranksvm_fit",
    )
    return model


def svm_l2_fit(features, labels, cfg: SolverConfig = SolverConfig()) -> LinearModel:
    """Squared-hinge linear SVM without bias, labels in {-1, +1}."""
    X = _check_matrix(features)
    y = np.ascontiguousarray(labels, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise DataError("svm_l2_fit needs both classes, got a single class")
    n, D = X.shape
    w = np.zeros(D)
    alpha = np.zeros(n)
    qdiag = np.einsum("ij,ij->i", X, X)
    C = float(cfg.C)
    return _run(
        n,
        cfg,
        lambda o: _l2svm_pass(X, y, w, alpha, qdiag, o, C),
        lambda: _l2svm_violation(X, y, w, alpha, C),
        lambda: l2svm_dual(alpha, w, C),
        alpha,
        w,
        "svm_l2_fit",
    )


# -- oracle ------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """A small primal instance for :func:`primal_oracle`.

    ``kind`` is ``"svr"`` (targets = real values), ``"ranksvm"`` (targets =
    per-example ranks) or ``"svm_l2"`` (targets = +-1 labels).
    """

    kind: str
    features: np.ndarray
    targets: np.ndarray
    cfg: SolverConfig = SolverConfig()

    def objective(self, w) -> float:
        X = np.asarray(self.features, dtype=np.float64)
        t = np.asarray(self.targets, dtype=np.float64)
        if self.kind == "svr":
            return svr_primal(w, X, t, self.cfg.C, self.cfg.epsilon)
        if self.kind == "ranksvm":
            hi, lo = ranking_pairs(t)
            return rank_primal(w, X[hi] - X[lo], self.cfg.C)
        if self.kind == "svm_l2":
            return l2svm_primal(w, X, t, self.cfg.C)
        raise ValueError(f"unknown problem kind {self.kind!r}")

    def fit(self) -> LinearModel:
        if self.kind == "svr":
            return svr_fit(self.features, self.targets, self.cfg)
        if self.kind == "ranksvm":
            return ranksvm_fit(self.features, self.targets, self.cfg)
        if self.kind == "svm_l2":
            return svm_l2_fit(self.features, self.targets, self.cfg)
        raise ValueError(f"unknown problem kind {self.kind!r}")


ORACLE_MAX_SIZE = 10_000


def primal_oracle(problem: Problem) -> LinearModel:
    """Solve the primal problem directly as a convex QP (small instances only)."""
    import cvxpy as cp

    X = np.asarray(problem.features, dtype=np.float64)
    t = np.asarray(problem.targets, dtype=np.float64)
    if X.size > ORACLE_MAX_SIZE:
        raise DataError(f"instance too large for the oracle: N*D = {X.size} > {ORACLE_MAX_SIZE}")
    C, eps = problem.cfg.C, problem.cfg.epsilon
    # slack form keeps every kind a plain QP, which Clarabel solves to 1e-10 reliably
    w = cp.Variable(X.shape[1])
    if problem.kind == "svr":
        r = t - X @ w
        xi = cp.Variable(X.shape[0])
        cons = [xi >= 0, xi >= r - eps, xi >= -r - eps]
        loss = cp.sum(xi)
    elif problem.kind == "ranksvm":
        hi, lo = ranking_pairs(t)
        xi = cp.Variable(hi.size)
        cons = [xi >= 0, xi >= 1 - (X[hi] - X[lo]) @ w]
        loss = cp.sum(xi)
    elif problem.kind == "svm_l2":
        xi = cp.Variable(X.shape[0])
        cons = [xi >= 0, xi >= 1 - cp.multiply(t, X @ w)]
        loss = cp.sum_squares(xi)
    else:
        raise ValueError(f"unknown problem kind {problem.kind!r}")
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(w) + C * loss), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    if w.value is None:
        raise RuntimeError(f"oracle failed: {prob.status}")
    weights = np.asarray(w.value, dtype=np.float64)
    return LinearModel(
        weights=weights,
        config=problem.cfg,
        final_dual_objective=problem.objective(weights),
        converged=prob.status == cp.OPTIMAL,
    )
