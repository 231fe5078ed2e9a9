import csv
import io
import json
import math

import pytest

from breuer_major import cli


def run(args, config=None, tmp_path=None, env=None, monkeypatch=None):
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        args = args + ["--config", str(path)]
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(args, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


IID = {"kind": "fgn", "params": {"hurst": 0.5}}


def test_bound_iid(tmp_path):
    code, out, err = run(["bound"], {"model": IID, "n": [100], "kinds": ["C2"]}, tmp_path)
    assert code == 0
    (row,) = rows(out)
    assert float(row["bound"]) == pytest.approx(0.2, abs=1e-12)
    assert row["bound_kind"] == "C2"
    assert "resolved config" in err


def test_resolved_config_is_complete(tmp_path):
    code, _, err = run(["bound"], {"model": IID}, tmp_path)
    echoed = json.loads(err.split("resolved config: ", 1)[1].splitlines()[0])
    for key in cli.DEFAULTS:
        assert key in echoed
    assert echoed["mode"] == "hermite"
    assert echoed["N_max"] is not None


def test_bound_summability_error(tmp_path):
    code, _, err = run(["bound"], {"model": {"kind": "fgn", "params": {"hurst": 0.8}}}, tmp_path)
    assert code == 2
    assert "summability" in err


def test_bound_n_le_K(tmp_path):
    model = {"kind": "table", "d": 2, "params": {"lags": [[[1, 0], [0, 1]], [[0.9, 0], [0, 0]]]}}
    fn = {"name": "hermite", "params": {"alpha": [1, 1]}}
    code, _, err = run(["bound"], {"model": model, "function": fn, "n": [2]}, tmp_path)
    assert code == 2
    assert "for every n > K" in err


def test_bad_config(tmp_path):
    code, _, err = run(["bound"], {"model": IID, "colour": "red"}, tmp_path)
    assert code == 2
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert run(["bound", "--config", str(path)])[0] == 2
    assert run(["bound", "--config", str(tmp_path / "missing.json")])[0] == 2


def test_json_output_and_file(tmp_path):
    target = tmp_path / "out.json"
    code, out, _ = run(["bound", "--format", "json", "--out", str(target)], {"model": IID}, tmp_path)
    assert code == 0 and out == ""
    payload = json.loads(target.read_text())
    assert payload["schema"] == "bm-rows/1"
    assert len(payload["rows"]) == 3


def test_rates_fgn(tmp_path):
    cfg = {"model": {"kind": "fgn", "params": {"hurst": 0.6}}, "n": [2**k for k in range(10, 17)]}
    code, out, _ = run(["rates"], cfg, tmp_path)
    (row,) = rows(out)
    assert code == 0
    assert float(row["slope"]) == pytest.approx(-0.3, abs=0.05)
    assert row["verdict"] == "True"


def test_rates_wrong_prediction_fails(tmp_path):
    cfg = {"model": {"kind": "fgn", "params": {"hurst": 0.6}}, "n": [256, 512, 1024, 2048], "rates": {"predicted": -0.5}}
    code, out, _ = run(["rates"], cfg, tmp_path)
    assert code == 3
    assert rows(out)[0]["verdict"] == "False"


def test_distance(tmp_path):
    cfg = {"model": IID, "n": [200], "R": 2000, "distances": ["KOL", "W", "H"], "tests": ["cos", "indicator(0)"]}
    code, out, _ = run(["distance"], cfg, tmp_path)
    assert code == 0
    got = rows(out)
    assert [r["kind"] for r in got] == ["KOL", "W", "H", "H"]
    assert all(r["verdict"] == "True" for r in got)


def test_threads_flag_and_env(tmp_path, monkeypatch):
    cfg = {"model": IID, "n": [20], "R": 600}
    a = run(["simulate-dump", "--threads", "1"], cfg, tmp_path)[1]
    monkeypatch.setenv("BM_THREADS", "8")
    b = run(["simulate-dump"], cfg, tmp_path)
    assert '"threads": 8' in b[2]
    assert a == b[1]
    monkeypatch.setenv("BM_THREADS", "lots")
    assert run(["simulate-dump"], cfg, tmp_path)[0] == 2


def test_simulate_dump(tmp_path):
    code, out, _ = run(["simulate-dump", "--seed", "4"], {"model": IID, "n": [1], "R": 3}, tmp_path)
    got = rows(out)
    assert code == 0 and len(got) == 3
    assert list(got[0]) == ["replication", "n", "N", "value", "seed", "stream"]
    assert got[2]["seed"] == "4" and got[2]["stream"] == "2"


def test_verify_chaos(tmp_path):
    code, out, _ = run(["verify-chaos"], {"sweep": {"count": 20, "n_max": 6}}, tmp_path)
    (row,) = rows(out)
    assert code == 0
    assert float(row["variance_max_rel"]) <= 1e-10
    assert row["verdict"] == "True"


def test_cap_exit_code(tmp_path):
    code, _, err = run(["verify-chaos"], {"sweep": {"max_order": 5}}, tmp_path)
    assert code == 4


def test_missing_model(tmp_path):
    assert run(["bound"], {}, tmp_path)[0] == 2
