import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seqpool.rankpool import PoolingConfig, frame_features, rank_pool, score_frames
from seqpool.seqcore import DataError, Descriptor, FrameSequence
from seqpool.smooth import reverse_sequence
from seqpool.solvers import SolverConfig


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def kendall_tau(a, b):
    n = len(a)
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            s += np.sign(a[j] - a[i]) * np.sign(b[j] - b[i])
    return s / (n * (n - 1) / 2)


def drifting(rng, T=100, D=5, sigma=0.1):
    d = rng.normal(size=D)
    d /= np.linalg.norm(d)
    t = np.arange(1, T + 1)[:, None] / T
    return FrameSequence(0.5 + t * d + sigma * rng.normal(size=(T, D)))


configs = st.builds(
    PoolingConfig,
    smoothing=st.sampled_from(["none", "independent", "ma", "tvm"]),
    pre_map=st.sampled_from(["none", "posneg", "sqrt"]),
    solver=st.sampled_from(["svr", "ranksvm"]),
    ma_window=st.integers(1, 6),
)
sequences = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 4)), elements=st.floats(-5, 5))


@given(sequences, configs)
def test_forward_of_reverse_is_reverse(a, cfg):
    x = FrameSequence(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fwd = rank_pool(reverse_sequence(x), cfg)
        rev = rank_pool(x, PoolingConfig(**{**cfg.__dict__, "direction": "reverse"}))
    assert fwd.values.tobytes() == rev.values.tobytes()


def test_both_is_forward_then_reverse(rng):
    x = FrameSequence(rng.normal(size=(20, 3)))
    f = rank_pool(x, PoolingConfig(direction="forward")).values
    r = rank_pool(x, PoolingConfig(direction="reverse")).values
    b = rank_pool(x, PoolingConfig(direction="both"))
    assert b.values.tobytes() == np.concatenate([f, r]).tobytes()
    assert len(b) == 2 * len(f) == PoolingConfig(direction="both").descriptor_length(3)


def test_identical_frames_tvm_svr():
    # all v_t = (1, 0): the 1-D constant-feature SVR with targets 1..5, whose optimum is w = 2
    d = rank_pool(FrameSequence(np.tile([1.0, 0.0], (5, 1))), PoolingConfig(smoothing="tvm"))
    np.testing.assert_allclose(d.values, [2.0, 0.0], atol=1e-3)


def test_ramp_collapses_under_tvm():
    X = np.zeros((50, 20))
    X[:, 0] = np.arange(1, 51)
    x = FrameSequence(X)
    cfg = PoolingConfig(smoothing="tvm")
    V = frame_features(x, cfg)
    np.testing.assert_array_equal(V, np.tile(np.eye(20)[0], (50, 1)))
    s = score_frames(x, rank_pool(x, cfg), cfg)
    assert np.ptp(s) == 0


def test_ramp_without_smoothing_is_ordered():
    X = np.zeros((50, 20))
    X[:, 0] = np.arange(1, 51)
    x = FrameSequence(X)
    cfg = PoolingConfig(smoothing="none")
    s = score_frames(x, rank_pool(x, cfg), cfg)
    assert np.all(np.diff(s) > 0)
    assert kendall_tau(s, np.arange(50)) == 1.0


def test_constant_sequence_scores_equal():
    x = FrameSequence(np.tile([0.3, -1.2, 2.0], (8, 1)))
    s = score_frames(x, rank_pool(x))
    assert np.ptp(s) == 0


def test_zero_descriptor_scores_zero(rng):
    x = FrameSequence(rng.normal(size=(6, 3)))
    np.testing.assert_array_equal(score_frames(x, Descriptor(np.zeros(3))), 0)


def test_score_frames_dimension_mismatch(rng):
    x = FrameSequence(rng.normal(size=(6, 3)))
    with pytest.raises(DataError):
        score_frames(x, Descriptor(np.zeros(4)))


def test_drifting_sequence_scores_track_time(rng):
    x = drifting(rng, sigma=0.01)
    s = score_frames(x, rank_pool(x))
    assert kendall_tau(s, np.arange(x.T)) > 0.95


def _random_pairs(rng, n=100):
    for _ in range(n):
        x = FrameSequence(rng.normal(size=(int(rng.integers(3, 30)), int(rng.integers(2, 8)))))
        yield rank_pool(x).values, rank_pool(reverse_sequence(x)).values


def test_reverse_descriptor_differs(rng):
    assert all(not np.array_equal(f, r) for f, r in _random_pairs(rng))


def test_order_sensitivity(rng):
    worst = max(cosine(f, r) for f, r in _random_pairs(rng))
    assert worst < 0.999


def test_speed_invariance_hard_margin(rng):
    # every original pair appears 4x after duplication, so equality needs a slack-free optimum
    cfg = PoolingConfig(smoothing="independent", solver="ranksvm", solver_cfg=SolverConfig(C=100, tol=1e-6, max_passes=100_000))
    for _ in range(20):
        X = rng.normal(size=(8, 20))
        a = rank_pool(FrameSequence(X), cfg).values
        b = rank_pool(FrameSequence(np.repeat(X, 2, axis=0)), cfg).values
        assert cosine(a, b) >= 0.999


def test_speed_invariance_soft_margin_drifts(rng):
    cfg = PoolingConfig(smoothing="independent", solver="ranksvm", solver_cfg=SolverConfig(max_passes=100_000))
    X = rng.normal(size=(8, 20))
    a = rank_pool(FrameSequence(X), cfg).values
    b = rank_pool(FrameSequence(np.repeat(X, 2, axis=0)), cfg).values
    assert 0.9 < cosine(a, b) < 0.999


def test_stability_under_one_dropped_frame(rng):
    for _ in range(20):
        x = drifting(rng)
        keep = np.delete(np.arange(x.T), rng.integers(x.T))
        assert cosine(rank_pool(x).values, rank_pool(x.with_frames(x.frames[keep])).values) >= 0.99


def test_nonlinear_rows_renormalized(rng):
    x = FrameSequence(rng.normal(size=(10, 4)))
    for sm in ("independent", "tvm"):
        V = frame_features(x, PoolingConfig(smoothing=sm, pre_map="posneg"))
        np.testing.assert_allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-12)
    V = frame_features(x, PoolingConfig(smoothing="ma", pre_map="posneg", ma_window=3))
    assert not np.allclose(np.linalg.norm(V, axis=1), 1.0)


def test_ranksvm_needs_two_frames():
    with pytest.raises(DataError):
        rank_pool(FrameSequence([[1.0, 2.0]]), PoolingConfig(solver="ranksvm"))


def test_svr_accepts_one_frame():
    assert len(rank_pool(FrameSequence([[1.0, 2.0]]))) == 2


def test_dimension_cap():
    with pytest.raises(DataError, match="cap"):
        rank_pool(FrameSequence(np.ones((3, 10))), PoolingConfig(pre_map="posneg", direction="both", max_dim=39))


def test_meta():
    d = rank_pool(FrameSequence(np.eye(3)), PoolingConfig(pre_map="posneg", direction="both", solver="ranksvm"))
    assert (d.meta.direction, d.meta.feature_map, d.meta.smoothing) == ("both", "posneg", "tvm")


def test_bad_config():
    with pytest.raises(ValueError):
        PoolingConfig(solver="bogus")
    with pytest.raises(ValueError):
        PoolingConfig(direction="sideways")
