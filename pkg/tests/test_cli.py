import json
import math

import numpy as np
import pytest

from lpcb import cli
from lpcb.codebook import load, load_fixture


def run(argv):
    return cli.main([str(a) for a in argv])


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_parse_helpers():
    assert cli.parse_grid("0:12:4") == [0, 4, 8, 12]
    assert cli.parse_grid("10") == [10]
    assert math.isinf(cli.parse_kappa("inf")) and cli.parse_kappa("2.5") == 2.5
    assert cli.parse_kappas("1,inf") == [1.0, math.inf]
    for bad in ("x", "-1"):
        with pytest.raises(cli.ConfigError):
            cli.parse_kappa(bad)
    with pytest.raises(cli.ConfigError):
        cli.parse_grid("3:1:1")


def test_design_rejects_projection_bound(tmp_path, capsys):
    assert run(["design", "--M", 4, "--T", 1, "--out", tmp_path]) == 2
    assert "ceil(M^(1/N)) <= T <= M" in capsys.readouterr().err


def test_design_is_byte_deterministic(tmp_path):
    args = ["design", "--M", 4, "--T", 2, "--restarts", 4, "--max-iters", 10, "--seed", 3]
    assert run(args + ["--out", tmp_path / "a"]) == 0
    first = {n: read(tmp_path / "a" / n) for n in ("codebook.json", "design.json")}
    assert run(args + ["--out", tmp_path / "a"]) == 0
    for name, data in first.items():
        assert read(tmp_path / "a" / name) == data
    cbs = load(tmp_path / "a" / "codebook.json")
    cbs.validate()
    assert cbs.meta["config"]["seed"] == 3 and cbs.meta["objective"] == "P2_1"
    design = json.loads(read(tmp_path / "a" / "design.json"))
    assert design["result"]["value"] == pytest.approx(cbs.meta["objective_value"])
    assert "wall_time" not in design["result"]


def test_eval_fixture_values(tmp_path):
    assert run(["eval", "A4_3_150", "--out", tmp_path]) == 0
    rep = json.loads(read(tmp_path / "metrics.json"))
    assert rep["med"] == pytest.approx(1.23, rel=0.02)
    assert rep["config"]["codebook"] == "A4_3_150"
    assert rep["delta_lb"] > 0 and rep["mpd"] > 0


def test_eval_external_file_and_config_precedence(tmp_path):
    src = tmp_path / "cb.json"
    src.write_bytes(read_fixture_bytes("A4_2_200"))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kappa": 5, "ebn0": "10", "Q": 300, "t_max": 2}))
    assert run(["eval", src, "--config", cfg, "--ebn0", "12", "--out", tmp_path]) == 0
    rep = json.loads(read(tmp_path / "metrics.json"))
    assert rep["config"]["ebn0"] == "12" and rep["config"]["kappa"] == 5
    assert rep["med"] == pytest.approx(0.96, rel=0.02)


def read_fixture_bytes(name):
    from lpcb.codebook import serialize
    return serialize(load_fixture(name))


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frobnicate": 1}))
    assert run(["eval", "A4_3_150", "--config", cfg, "--out", tmp_path]) == 2


@pytest.mark.parametrize("argv", [["eval", "no_such_file.json"], ["validate"],
                                  ["simulate", "A4_3_150", "--ebn0", "5:1:1"],
                                  ["complexity", "--T", 2]])
def test_validation_errors(tmp_path, argv):
    assert run(argv + (["--out", tmp_path] if argv[0] != "validate" else [])) == 2


def test_runtime_error_exit_code(monkeypatch, tmp_path):
    def boom(cfg):
        raise FloatingPointError("overflow")
    monkeypatch.setitem(cli.COMMANDS, "validate", boom)
    assert run(["validate", "A4_3_150"]) == 3


def test_simulate_csv_and_profile(tmp_path):
    args = ["simulate", "A4_3_150", "--ebn0", "4:8:4", "--kappa", "inf,2", "--frames", 300,
            "--max-iters", 4, "--profile", "--seed", 5]
    assert run(args + ["--out", tmp_path]) == 0
    first = read(tmp_path / "ber.csv")
    assert run(args + ["--out", tmp_path]) == 0
    assert read(tmp_path / "ber.csv") == first
    text = first.decode().splitlines()
    header = json.loads(text[0][2:])
    assert header["frames"] == 300 and header["seed"] == 5
    assert text[1].split(",") == cli.CSV_COLUMNS
    assert len(text) == 2 + 4
    conv = read(tmp_path / "convergence.csv").decode().splitlines()
    assert len(conv) == 2 + 4 * 4


def test_complexity_from_codebook(tmp_path):
    assert run(["complexity", "A4_2_200", "--it", 1, "--baseline-it", 4, "--out", tmp_path]) == 0
    rep = json.loads(read(tmp_path / "complexity.json"))
    assert rep["lp"]["T"] == 2 and rep["baseline"]["T"] == 4 and rep["lp"]["d_f"] == 4
    assert 0 < rep["crr_mult"] < 1


def test_complexity_flags(tmp_path):
    argv = ["complexity", "--T", 2, "--d-f", 3, "--N", 2, "--J", 6, "--it", 1,
            "--baseline-T", 4, "--baseline-it", 4, "--out", tmp_path]
    assert run(argv) == 0
    rep = json.loads(read(tmp_path / "complexity.json"))
    assert rep["n_mult"] == 588 and rep["baseline_mult"] == 18456


def test_label_writes_permuted_labels(tmp_path):
    assert run(["label", "A4_3_150", "--restarts", 2, "--max-iters", 2, "--out", tmp_path]) == 0
    out = load(tmp_path / "codebook_labeled.json")
    ref = load_fixture("A4_3_150")
    np.testing.assert_array_equal(out.codebooks, ref.codebooks)
    for labs in out.labels:
        assert sorted(labs) == ["00", "01", "10", "11"]


def test_validate_prints_summary(capsys):
    assert run(["validate", "A8_4_150"]) == 0
    assert "M=8" in capsys.readouterr().out
