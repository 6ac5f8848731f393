import numpy as np
import pytest

from seqpool import baselines, parampool, rankpool
from seqpool.evalharness import SynthClass, SynthConfig, generate_synthetic
from seqpool.pipeline import PipelineConfig, pool_manifest, pool_records, pool_sequence
from seqpool.seqcore import DataError, DatasetManifest, FrameSequence, ManifestRecord, read_descriptor, write_sequence


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    d = np.eye(6)
    cfg = SynthConfig((SynthClass(d[0]), SynthClass(d[0], True)), T=12, D=6, per_class=3, seed=1)
    manifest, _ = generate_synthetic(cfg, out)
    return manifest


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.pooler, cfg.resolved_smoothing, cfg.pre_map, cfg.solver, cfg.direction) == (
        "rank", "tvm", "posneg", "svr", "both",
    )
    assert PipelineConfig(pooler="avg").resolved_smoothing == "none"
    assert PipelineConfig(pooler="nn").resolved_smoothing == "tvm"
    assert PipelineConfig(pooler="max", smoothing="tvm").resolved_smoothing == "tvm"


def test_bad_pooler():
    with pytest.raises(ValueError):
        PipelineConfig(pooler="median")


def test_dispatch(rng):
    x = FrameSequence(rng.normal(size=(9, 3)))
    cfg = PipelineConfig(pre_map="none", direction="forward")
    assert pool_sequence(x, cfg).values.tobytes() == rankpool.rank_pool(x, cfg.pooling_config()).values.tobytes()
    assert pool_sequence(x, PipelineConfig(pooler="avg", pre_map="none")).values.tobytes() == baselines.average_pool(x).values.tobytes()
    tp = pool_sequence(x, PipelineConfig(pooler="tp-max", pre_map="none")).values
    assert tp.tobytes() == baselines.temporal_pyramid(x, baselines.max_pool).values.tobytes()
    sub = pool_sequence(x, PipelineConfig(pooler="subspace"))
    assert sub.values.tobytes() == parampool.subspace_pool(x, "tvm").values.tobytes()
    assert len(pool_sequence(x, PipelineConfig(pooler="nn"))) == parampool.NNPoolConfig().n_params(3)


def test_baseline_with_pre_map(rng):
    x = FrameSequence(rng.normal(size=(5, 2)))
    d = pool_sequence(x, PipelineConfig(pooler="avg", pre_map="posneg")).values
    from seqpool.featmap import posneg_map

    np.testing.assert_allclose(d, np.mean([posneg_map(f) for f in x.frames], axis=0), rtol=1e-15)


def test_jobs_do_not_change_results(small):
    cfg = PipelineConfig()
    one = pool_records(small, small.records, cfg, jobs=1)
    three = pool_records(small, small.records, cfg, jobs=3)
    assert [d.values.tobytes() for d in one] == [d.values.tobytes() for d in three]


def test_pool_manifest_mirrors_paths(small, tmp_path):
    written = pool_manifest(small, PipelineConfig(pooler="max", pre_map="none"), tmp_path)
    assert [p.relative_to(tmp_path).as_posix() for p in written] == [r.path for r in small.records]
    assert len(read_descriptor(written[0])) == 6


def test_inconsistent_dimensions(tmp_path):
    write_sequence(FrameSequence(np.ones((4, 2))), tmp_path / "a.csv")
    write_sequence(FrameSequence(np.ones((4, 3))), tmp_path / "b.csv")
    m = DatasetManifest((ManifestRecord("a.csv", "x", "train"), ManifestRecord("b.csv", "y", "train")), tmp_path)
    with pytest.raises(DataError, match="lengths differ"):
        pool_records(m, m.records, PipelineConfig(pooler="avg"))


def test_transform_receives_manifest_index(small):
    seen = []

    def spy(x, i):
        seen.append(i)
        return x

    pool_records(small, small.split("test"), PipelineConfig(pooler="avg"), transform=spy)
    first_test = [i for i, r in enumerate(small.records) if r.split == "test"]
    assert seen == first_test
