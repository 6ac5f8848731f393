import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqpool.classify import (
    ModelFormatError,
    fuse_channels,
    load_model,
    predict,
    save_model,
    score_matrix,
    stratified_folds,
    train_ova,
    transform_features,
)
from seqpool.seqcore import DataError, Descriptor, LabeledDescriptor


def clusters(seed=0, n=20, noise=0.1):
    r = np.random.default_rng(seed)
    data = []
    for label, center in (("left", [-5.0, 0.0]), ("right", [5.0, 0.0])):
        for _ in range(n):
            data.append(LabeledDescriptor(Descriptor(np.array(center) + noise * r.normal(size=2)), label))
    return data


@pytest.fixture(scope="module")
def model():
    return train_ova(clusters(), post_map="none")


def test_separable_clusters(model):
    assert max(model.cv_scores.values()) == 1.0
    test = clusters(seed=1)
    assert all(predict(model, d.descriptor).label == d.label for d in test)


def test_training_accuracy_is_perfect(model):
    assert all(predict(model, d.descriptor).label == d.label for d in clusters())


def test_single_grid_value_skips_cv():
    m = train_ova(clusters(), post_map="none", c_grid=[3.0])
    assert m.c_selected == 3.0 and m.cv_scores == {}


def test_tie_prefers_smaller_c():
    m = train_ova(clusters(), post_map="none", c_grid=[1.0, 0.1])
    assert m.cv_scores[0.1] == m.cv_scores[1.0] == 1.0
    assert m.c_selected == 0.1


def test_cv_is_seeded():
    a = train_ova(clusters(noise=3.0), seed=5)
    b = train_ova(clusters(noise=3.0), seed=5)
    assert a.cv_scores == b.cv_scores and a.c_selected == b.c_selected
    assert a.weight_matrix.tobytes() == b.weight_matrix.tobytes()


def test_stratified_folds_balanced():
    y = np.array([0] * 7 + [1] * 4)
    f = stratified_folds(y, seed=0)
    for k in (0, 1):
        counts = np.bincount(f[y == k], minlength=2)
        assert abs(counts[0] - counts[1]) <= 1
    assert np.array_equal(f, stratified_folds(y, seed=0))


def test_zero_descriptor_goes_to_first_class(model):
    p = predict(model, Descriptor(np.zeros(2)))
    assert set(p.scores.values()) == {0.0}
    assert p.label == "left"


def test_positive_scaling_keeps_argmax(model):
    r = np.random.default_rng(3)
    for _ in range(20):
        v = r.normal(size=2)
        assert predict(model, v).label == predict(model, 7.5 * v).label


def test_dimension_mismatch(model):
    with pytest.raises(DataError):
        predict(model, Descriptor(np.ones(3)))


def test_errors():
    with pytest.raises(DataError):
        train_ova([d for d in clusters() if d.label == "left"])
    few = clusters()[:21]
    with pytest.raises(DataError, match="fewer than 2"):
        train_ova(few)
    with pytest.raises(ValueError):
        train_ova(clusters(), cv_metric="auc")


# -- fusion -----------------------------------------------------------------------------


def test_fuse_single_channel_is_normalized():
    np.testing.assert_allclose(fuse_channels([np.array([3.0, 4.0])]), [0.6, 0.8])


def test_fuse_identical_channels_unit_norm():
    a = np.array([1.0, -2.0, 2.0])
    f = fuse_channels([a, a])
    assert f @ f == pytest.approx(1.0, abs=1e-15)


@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_fuse_kernel_identity(seed, K):
    r = np.random.default_rng(seed)
    sizes = r.integers(1, 8, size=K)
    xs = [r.normal(size=s) for s in sizes]
    ys = [r.normal(size=s) for s in sizes]
    unit = lambda v: v / np.linalg.norm(v)
    expected = np.mean([unit(x) @ unit(y) for x, y in zip(xs, ys)])
    assert abs(fuse_channels(xs) @ fuse_channels(ys) - expected) < 1e-12


def test_transform_maps_each_channel():
    v = np.array([4.0, -1.0, 9.0])
    got = transform_features(v, "posneg", [2, 1])
    expected = np.concatenate([[2.0, 0.0, 0.0, 1.0] / np.sqrt(5), [1.0, 0.0]]) / np.sqrt(2)
    np.testing.assert_allclose(got, expected)
    with pytest.raises(DataError):
        transform_features(v, "none", [2, 2])


def test_multichannel_training():
    r = np.random.default_rng(0)
    data = [
        LabeledDescriptor(Descriptor(np.r_[r.normal(size=3) + 4 * s, r.normal(size=2)]), "pos" if s > 0 else "neg")
        for s in [1, -1] * 10
    ]
    m = train_ova(data, channel_sizes=[3, 2])
    assert m.channel_sizes == (3, 2)
    assert m.weight_matrix.shape == (2, 10)


# -- persistence --------------------------------------------------------------------------


def test_round_trip(tmp_path, model):
    probe = [Descriptor(v) for v in np.random.default_rng(9).normal(size=(30, 2))]
    save_model(model, tmp_path / "m.model")
    back = load_model(tmp_path / "m.model")
    assert back.classes == model.classes and back.c_selected == model.c_selected
    assert score_matrix(back, probe).tobytes() == score_matrix(model, probe).tobytes()
    assert [predict(back, d).label for d in probe] == [predict(model, d).label for d in probe]


def test_round_trip_with_post_map(tmp_path):
    m = train_ova(clusters(), post_map="posneg", c_grid=[1.0])
    save_model(m, tmp_path / "m.model")
    assert load_model(tmp_path / "m.model").weight_matrix.tobytes() == m.weight_matrix.tobytes()


def test_truncated_file_names_line(tmp_path, model):
    p = tmp_path / "m.model"
    save_model(model, p)
    p.write_text(p.read_text().splitlines()[0] + "\n")
    with pytest.raises(ModelFormatError, match="line 2"):
        load_model(p)


def test_unknown_post_map(tmp_path, model):
    p = tmp_path / "m.model"
    save_model(model, p)
    p.write_text(p.read_text().replace('"post_map": "none"', '"post_map": "rbf"'))
    with pytest.raises(ModelFormatError, match="post_map"):
        load_model(p)


def test_version_mismatch(tmp_path, model):
    p = tmp_path / "m.model"
    save_model(model, p)
    p.write_text(p.read_text().replace('"version": 1', '"version": 99'))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(p)


def test_malformed_header(tmp_path):
    p = tmp_path / "m.model"
    p.write_text("not json\n1,2\n")
    with pytest.raises(ModelFormatError, match="line 1"):
        load_model(p)
