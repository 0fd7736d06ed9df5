import json

import numpy as np
import pytest

from sysalias.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from sysalias.sysmodel import boolean_network, load_json


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_default_layout(tmp_path):
    assert run("gen", "--out", tmp_path / "d") == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "d").iterdir())
    assert files == ["config.json", "series.csv", "truth.json"]
    header = (tmp_path / "d" / "series.csv").read_text().splitlines()[0]
    assert header == "t," + ",".join(f"y{i}" for i in range(1, 25))


def test_gen_deterministic_and_override(tmp_path):
    run("gen", "--out", tmp_path / "a", "--seed", 3, "--n", 5)
    run("gen", "--out", tmp_path / "b", "--seed", 3, "--n", 5)
    a = (tmp_path / "a" / "series.csv").read_bytes()
    assert a == (tmp_path / "b" / "series.csv").read_bytes()
    assert len(a.decode().splitlines()[0].split(",")) == 6


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": {"n": 4, "N": 7}, "seed": 9}))
    run("gen", "--out", tmp_path / "d", "--config", cfg, "--N", 5)
    c = load_json(tmp_path / "d" / "config.json")
    assert (c["n"], c["N"], c["seed"]) == (4, 5, 9)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": {"bogus": 1}}))
    assert run("gen", "--out", tmp_path / "e", "--config", bad) == EXIT_INPUT
    bad.write_text("{not json")
    assert run("gen", "--out", tmp_path / "e", "--config", bad) == EXIT_INPUT


def test_reconstruct_noise_free_support(tmp_path):
    d = tmp_path / "d"
    run("gen", "--out", d, "--n", 5, "--N", 50, "--density", 0.2, "--noise-free",
        "--input-kind", "square_wave", "--input-amplitude", 10, "--seed", 0)
    out = tmp_path / "r"
    code = run("reconstruct", d, "--out", out, "--lam", 1e-4, "--mode", "AB", "--diagonal-B",
               "--delta", 1e-10, "--threshold", 1e-2)
    assert code == EXIT_OK
    truth = load_json(d / "truth.json")
    expected = boolean_network(np.array(truth["A"]), np.array(truth["B"])).to_dict()
    assert load_json(out / "network.json") == expected
    res = load_json(out / "result.json")
    assert np.all(np.diff(res["objective_trace"]) <= 0)
    assert load_json(out / "run_config.json")["command"] == "reconstruct"


def test_reconstruct_lambda_sweep_files(tmp_path):
    d = tmp_path / "d"
    run("gen", "--out", d, "--n", 3, "--N", 10)
    out = tmp_path / "r"
    assert run("reconstruct", d, "--out", out, "--lambda-sweep", 1e-2, 1, 3, "--max-iter", 2) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["network_00.json", "network_01.json", "network_02.json",
                     "result_00.json", "result_01.json", "result_02.json", "run_config.json"]
    assert load_json(out / "result_02.json")["lambda_index"] == 2
    assert load_json(out / "result_02.json")["options"]["lam"] == pytest.approx(1.0)


def test_reconstruct_corrupt_csv(tmp_path, capsys):
    d = tmp_path / "d"
    run("gen", "--out", d, "--n", 3, "--N", 6)
    lines = (d / "series.csv").read_text().splitlines()
    lines[3] = "1.0,2.0"
    (d / "series.csv").write_text("\n".join(lines) + "\n")
    assert run("reconstruct", d, "--out", tmp_path / "r") == EXIT_INPUT
    assert "line 4" in capsys.readouterr().err


def test_reconstruct_missing_dataset(tmp_path):
    assert run("reconstruct", tmp_path / "nope", "--out", tmp_path / "r") == EXIT_INPUT


def test_alias_bound(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"A": [[-1.0, 0.0], [0.0, -2.0]]}))
    assert run("alias", "bound", p, "--out", tmp_path / "b.json") == EXIT_OK
    assert json.loads(capsys.readouterr().out)["h_max"] == "inf"
    assert load_json(tmp_path / "b.json")["h_max"] == "inf"


def test_alias_enum_rotation(tmp_path, capsys):
    p = tmp_path / "ad.json"
    p.write_text(json.dumps({"Ad": [[0.0, -1.0], [1.0, 0.0]], "h": 1.0}))
    assert run("alias", "enum", "--ad", p, "--kappa", 10) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["count"] == 2 and "sparsest" in rep
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"A": [[0.0, -1.5707963267948966], [1.5707963267948966, 0.0]]}))
    assert run("alias", "enum", "--system", s, "--h", 1.0, "--kappa", 10) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["count"] == 2
    assert run("alias", "enum", "--system", s, "--kappa", 10) == EXIT_INPUT


def test_alias_test_integer_ratio_rejected(tmp_path, capsys):
    d = tmp_path / "d"
    run("gen", "--out", d, "--n", 3, "--N", 10, "--h", 0.5)
    assert run("alias", "test", "--model", d / "truth.json", "--h1", 0.25, "--probe", d) == EXIT_INPUT
    assert "integer" in capsys.readouterr().err
    assert run("alias", "test", "--model", d / "truth.json", "--h1", 0.4, "--probe", d) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) >= {"p_value", "reject", "per_channel_p"}


def test_alias_degenerate_is_input_error(tmp_path):
    p = tmp_path / "ad.json"
    p.write_text(json.dumps({"Ad": [[0.5, 0.0], [0.0, 0.5]], "h": 1.0}))
    assert run("alias", "enum", "--ad", p, "--kappa", 10) == EXIT_INPUT


def test_eval_smoke(tmp_path, capsys):
    import time
    t = time.perf_counter()
    code = run("eval", "--out", tmp_path / "e", "--n-systems", 2, "--n", 8, "--N", 8,
               "--max-iter", 5, "--lam", 0.1)
    assert code == EXIT_OK
    assert time.perf_counter() - t < 60
    names = sorted(p.name for p in (tmp_path / "e").iterdir())
    assert names == ["pr.csv", "pr.svg", "report.json", "roc.csv", "roc.svg", "run_config.json"]
    assert "mean AUC" in capsys.readouterr().out


def test_eval_deterministic_no_plots(tmp_path):
    args = ("--n-systems", 2, "--n", 4, "--N", 6, "--max-iter", 3, "--no-plots", "--seed", 4)
    run("eval", "--out", tmp_path / "a", *args)
    run("eval", "--out", tmp_path / "b", *args)
    assert not list((tmp_path / "a").glob("*.svg"))
    for f in ("report.json", "roc.csv", "pr.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    from sysalias import cli
    from sysalias.errors import SolverFailure

    def boom(*a, **k):
        raise SolverFailure("no convergence")
    monkeypatch.setattr(cli, "reconstruct", boom)
    d = tmp_path / "d"
    run("gen", "--out", d, "--n", 3, "--N", 6)
    assert run("reconstruct", d, "--out", tmp_path / "r") == EXIT_NUMERIC


def test_usage_errors():
    assert run() == EXIT_INPUT
    assert run("gen") == EXIT_INPUT
    assert run("reconstruct", "x", "--out", "y", "--lambdas", 1, "--lambda-sweep", 1, 2, 3) == EXIT_INPUT
