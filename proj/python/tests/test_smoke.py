import math

import numpy as np
import pytest

import modist


def test_info_nce_symmetric_case():
    q = [1.0, 0.0]
    k = [0.0, 1.0]
    for n in (1, 3, 511):
        assert modist.info_nce(q, k, [k] * n, tau=1.0) == pytest.approx(math.log(n + 1), abs=1e-12)


def test_info_nce_rejects_bad_tau():
    with pytest.raises(modist.ModistError):
        modist.info_nce([1.0, 0.0], [1.0, 0.0], [[0.0, 1.0]], tau=0.0)


def test_sobel_step_edge_is_clamped():
    m = np.zeros((16, 16), dtype=np.float32)
    m[:, 8:] = 4.0
    e = modist.sobel_edge_map(m)
    assert e.shape == (16, 16)
    assert e[5, 7] == modist.FLOW_EDGE_CLAMP
    assert e[5, 8] == modist.FLOW_EDGE_CLAMP
    assert e[:, :7].max() == 0.0
    assert e[:, 9:].max() == 0.0


def test_sobel_constant_field_is_zero():
    e = modist.sobel_edge_map(np.full((9, 9), 3.5))
    assert not e.any()


def test_generate_corpus_counts(tmp_path):
    counts = modist.generate_corpus(tmp_path / "data", pretrain_videos=16, probe_videos=8, seed=3)
    assert counts == {"pretrain": 16, "probe_train": 8, "probe_test": 8}


def test_cli_pipeline(tmp_path):
    data = str(tmp_path / "data")
    code, out, err = modist.run_cli(["gen-data", "--videos", "32", "--probe-videos", "16", "--out", data])
    assert code == 0, err
    code, out, err = modist.run_cli(
        ["pretrain", "--data", data, "--epochs", "1", "--out", str(tmp_path / "run")]
    )
    assert code == 0, err
    assert (tmp_path / "run" / "final.ckpt").exists()
    code, out, err = modist.run_cli(["probe", "--ckpt", str(tmp_path / "run" / "final.ckpt"), "--data", data])
    assert code == 0, err
    assert "top-1" in out


def test_cli_unknown_command_fails():
    code, _, err = modist.run_cli(["no-such-command"])
    assert code != 0
    assert err
