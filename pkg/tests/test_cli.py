import json
import os

import numpy as np
import pytest

from seqpool.cli import main
from seqpool.evalharness import SynthClass, SynthConfig, generate_synthetic, read_pgm
from seqpool.seqcore import FrameSequence, write_sequence


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """synth -> pool -> train on drift4, run once for the whole module."""
    root = tmp_path_factory.mktemp("chain")
    cwd = os.getcwd()
    os.chdir(root)
    try:
        assert run("synth", "--out", "data") == 0
        assert run("pool", "--manifest", "data/manifest.csv", "--out", "desc", "--jobs", 2) == 0
        assert run("train", "--manifest", "data/manifest.csv", "--desc-dir", "desc", "--model", "m.model") == 0
    finally:
        os.chdir(cwd)
    return root


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    d = np.eye(6)
    classes = (SynthClass(d[0], False, "a"), SynthClass(d[0], True, "b"))
    generate_synthetic(SynthConfig(classes, T=15, D=6, per_class=4, seed=2, T_range=(10, 25)), root)
    return root / "manifest.csv"


def test_chain_outputs(chain):
    assert (chain / "data" / "manifest.csv").is_file()
    assert len(list((chain / "desc").rglob("*.csv"))) == 320
    assert (chain / "m.model").read_text().splitlines()[0].startswith("{")


def test_eval_precomputed(chain, monkeypatch):
    monkeypatch.chdir(chain)
    assert run("eval", "--manifest", "data/manifest.csv", "--model", "m.model", "--desc-dir", "desc",
               "--out", "rep.json") == 0
    rep = json.loads((chain / "rep.json").read_text())
    assert rep["accuracy"] >= 0.95
    assert rep["n"] == 160


def test_predict_stdout(chain, monkeypatch, capsys):
    monkeypatch.chdir(chain)
    first = sorted((chain / "desc" / "seqs" / "test").glob("*.csv"))[0]
    assert run("predict", "--model", "m.model", "--desc", first) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["label"] in out["scores"]
    assert out["scores"][out["label"]] == max(out["scores"].values())


def test_echo_files(chain):
    pool = (chain / "desc" / "pool.flags").read_text().splitlines()
    assert pool[0] == "pool"
    assert "--jobs" not in pool
    assert pool[pool.index("--seed") + 1] == "0"
    assert pool[pool.index("--smooth") + 1] == "tvm"
    synth = (chain / "data" / "synth.flags").read_text().splitlines()
    assert synth[synth.index("--seed") + 1] == "7"


def test_replay_reproduces_model(chain, monkeypatch):
    monkeypatch.chdir(chain)
    original = (chain / "m.model").read_bytes()
    (chain / "m.model").unlink()
    assert run("@m.model.flags") == 0
    assert (chain / "m.model").read_bytes() == original


def test_seed_env(tiny, tmp_path, monkeypatch):
    monkeypatch.setenv("SEQPOOL_SEED", "11")
    assert run("synth", "--out", tmp_path / "s") == 0
    flags = (tmp_path / "s" / "synth.flags").read_text().splitlines()
    assert flags[flags.index("--seed") + 1] == "11"
    # an explicit flag wins over the environment
    assert run("synth", "--out", tmp_path / "t", "--seed", 7) == 0
    flags = (tmp_path / "t" / "synth.flags").read_text().splitlines()
    assert flags[flags.index("--seed") + 1] == "7"


@pytest.mark.parametrize(
    "argv",
    [
        ["pool", "--manifest", "m.csv", "--out", "o", "--solver", "bogus"],
        ["pool", "--manifest", "m.csv", "--out", "o", "--C", "-1"],
        ["pool", "--manifest", "m.csv"],
        ["frobnicate"],
        ["eval", "--manifest", "m.csv", "--experiment", "framedrop", "--drop-fractions", "0.95"],
    ],
)
def test_usage_errors(argv, tiny, capsys):
    argv = [str(tiny) if a == "m.csv" else a for a in argv]
    assert run(*argv) == 1
    assert "error" in capsys.readouterr().err


def test_bad_flag_is_named(capsys):
    assert run("pool", "--manifest", "x", "--out", "o", "--solver", "bogus") == 1
    assert "--solver" in capsys.readouterr().err


def test_data_errors(tmp_path, capsys):
    assert run("pool", "--manifest", tmp_path / "missing.csv", "--out", tmp_path / "o") == 2
    assert run("predict", "--model", tmp_path / "none.model", "--desc", tmp_path / "d.csv") == 2
    (tmp_path / "bad.model").write_text("not json\n")
    assert run("predict", "--model", tmp_path / "bad.model", "--desc", tmp_path / "d.csv") == 2
    assert "line 1" in capsys.readouterr().err


def test_eval_framedrop(tiny, tmp_path):
    out = tmp_path / "fd.json"
    assert run("eval", "--manifest", tiny, "--experiment", "framedrop", "--drop-fractions", 0.0, 0.2,
               "--c-grid", 1.0, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert [r["fraction"] for r in rep["rows"]] == [0.0, 0.2]
    assert rep["rows"][0]["report"] == rep["baseline"]


def test_eval_length(tiny, tmp_path):
    out = tmp_path / "len.json"
    assert run("eval", "--manifest", tiny, "--experiment", "length", "--buckets", 2, "--c-grid", 1.0,
               "--out", out) == 0
    rep = json.loads(out.read_text())
    assert sum(b["report"]["n"] for b in rep["buckets"]) == rep["overall"]["n"]


def test_viz(tmp_path, rng):
    x = FrameSequence(rng.random((12, 6)))
    write_sequence(x, tmp_path / "s.csv")
    assert run("viz", "--seq", tmp_path / "s.csv", "--width", 3, "--height", 2, "--out", tmp_path / "v.pgm") == 0
    assert read_pgm(tmp_path / "v.pgm").shape == (2, 3)
    assert run("viz", "--seq", tmp_path / "s.csv", "--width", 4, "--height", 2, "--out", tmp_path / "w.pgm") == 2
