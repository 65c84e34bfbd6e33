import os
import pathlib

import numpy as np
import pytest

import hetlogit

ROOT = pathlib.Path(__file__).resolve().parents[2]
DATA = pathlib.Path(os.environ.get("HETLOGIT_DATA_FILE", ROOT / "data" / "swissmetro.dat"))


def test_probabilities_sum_to_one():
    x = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 0.3]])
    p = hetlogit.choice_probabilities(np.array([0.2, -0.4, 1.0, 0.5]), x, 2)
    assert p.shape == (3,)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(p > 0)


def test_reference_out_of_range_is_a_data_error():
    with pytest.raises(hetlogit.DataError):
        hetlogit.choice_probabilities(np.zeros(3), np.zeros((2, 2)), 5)


def test_linear_dgp_shapes_and_seed():
    a = hetlogit.simulate_linear(200, 7)
    b = hetlogit.simulate_linear(200, 7)
    assert a["x"].shape == (200, 3, 2)
    assert a["w"].shape == (200, 2)
    assert np.array_equal(a["choice"], b["choice"])
    assert a["theta"] == pytest.approx([-0.75, -1.0])


@pytest.mark.skipif(not DATA.exists(), reason="Swissmetro file not available")
def test_ingestion_row_count():
    d = hetlogit.ingest_swissmetro(str(DATA))
    assert d["x"].shape == (9036, 3, 3)
    assert d["alternatives"] == ["train", "sm", "car"]
    assert d["report"]["raw_rows"] == 10728


@pytest.mark.skipif(not DATA.exists(), reason="Swissmetro file not available")
def test_appendix_logit_converges():
    fit = hetlogit.fit_logit(str(DATA), "appendix")
    assert fit["n"] == 6777
    assert fit["gradient_norm"] < 1e-8
    slopes = dict(zip(fit["names"], fit["estimates"]))
    assert slopes["cost"] < 0 and slopes["freq"] < 0 and slopes["time"] < 0


def test_config_defaults_cover_sections():
    keys = [k for k, _, _ in hetlogit.config_defaults()]
    for section in ("run", "delta", "lambda", "ifa", "mc", "estimate"):
        assert any(k.startswith(section + ".") for k in keys)


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nnot_a_key = 1\n")
    with pytest.raises(hetlogit.ConfigError):
        hetlogit.run("estimate", str(cfg))


def test_small_linear_mc_run(tmp_path):
    cfg = tmp_path / "mc.ini"
    cfg.write_text(
        "[run]\nseed = 3\noutput = {}\n\n[mc]\nscenario = linear\nsize = 300\nreplicates = 3\n"
        "estimators = oracle,basic\n".format(tmp_path / "out")
    )
    hetlogit.run("mc-run", str(cfg))
    table = (tmp_path / "out" / "mean_table.csv").read_text().splitlines()
    assert table[0].startswith("estimator,target,replicates")
    assert len(table) == 5
    assert (tmp_path / "out" / "config.ini").exists()
