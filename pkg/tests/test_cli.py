import json

import numpy as np
import pytest

from denjoy.cli import main
from denjoy.config import Config, ConfigError


def _cfg(tmp_path, **kw):
    data = {"modulus": "power:tau=0.5", "d": 1, "theta": ["golden"], "scheme": "alpha_inv",
            "k": 4, "radius": 2000}
    data.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


@pytest.fixture()
def model_path(tmp_path):
    out = tmp_path / "m.json"
    assert main(["build", "--config", _cfg(tmp_path), "--out", str(out)]) == 0
    return str(out)


# --- config ----------------------------------------------------------------------

def test_config_round_trip():
    c = Config(modulus="dkn:d=2,eps=0.1", d=2, theta=["sqrt2m1", "sqrt3m1"], scheme="nu",
               k=1000, scale=0.02).validate()
    assert Config.from_dict(json.loads(c.to_json())) == c


@pytest.mark.parametrize("kw,msg", [
    ({"scheme": "herman_v", "d": 2, "theta": ["sqrt2m1", "sqrt3m1"]}, "d = 1"),
    ({"theta": ["golden", "sqrt2m1"]}, "theta"),
    ({"modulus": "nope"}, "modulus"),
    ({"scheme": "other"}, "scheme"),
    ({"k": 0}, "k"),
    ({"theta": ["banana"]}, "preset"),
    ({"tail_tol": 2.0}, "tail_tol"),
])
def test_config_rejects_invalid(kw, msg):
    with pytest.raises(ConfigError, match=msg):
        Config(**kw).validate()


def test_config_unknown_key():
    with pytest.raises(ConfigError, match="unknown"):
        Config.from_dict({"colour": "red"})


# --- build -----------------------------------------------------------------------

def test_build_default_herman(tmp_path, capsys):
    out = tmp_path / "h.json"
    assert main(["build", "--out", str(out), "--radius", "3000"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["L"] <= 1.0 and summary["total_upper"] <= 1.0
    assert summary["scheme"]["K"] >= 2.0
    doc = json.loads(out.read_text())
    assert doc["version"] == 1 and len(doc["intervals"]) == 6001


def test_build_d2_counts(tmp_path, capsys):
    cfg = _cfg(tmp_path, modulus="dkn:d=2,eps=0.1", d=2, theta=["sqrt2m1", "sqrt3m1"],
               scheme="nu", k=1000, scale=0.02, radius=30)
    assert main(["build", "--config", cfg, "--out", str(tmp_path / "d.json")]) == 0
    assert json.loads(capsys.readouterr().out)["intervals"] == 2 * 30 * 31 + 1


def test_build_inadmissible_exit_2(tmp_path, capsys):
    rc = main(["build", "--modulus", "power:tau=1", "--out", str(tmp_path / "x.json")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "inadmissible" in err and '"verdict": "diverges"' in err


def test_build_small_denominator_warns(tmp_path, capsys):
    assert main(["build", "--theta", "0.25", "--scheme", "alpha_inv", "--k", "4", "--radius", "50",
                 "--out", str(tmp_path / "r.json")]) == 0
    assert "warning" in capsys.readouterr().err


def test_build_invalid_config_exit_4(tmp_path):
    assert main(["build", "--scheme", "herman_v", "--d", "2", "--theta", "sqrt2m1,sqrt3m1"]) == 4


# --- eval ------------------------------------------------------------------------

def test_eval_grid(model_path, tmp_path):
    out = tmp_path / "e.csv"
    assert main(["eval", "--model", model_path, "--grid", "1000", "--deriv", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "x,f1,df1" and len(rows) == 1001
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    f = data[:, 1]
    lifted = f + (f < f[0])
    assert np.all(np.diff(lifted) > 0)
    assert np.all(data[:, 2] > 0)


def test_eval_gap_point_has_unit_derivative(model_path, capsys):
    from denjoy.blowup import BlowupModel
    m = BlowupModel.load(model_path)
    x = float(m.starts[5] + m.lengths[5]) + 1e-12
    assert m.locate(x) < 0
    assert main(["eval", "--model", model_path, "--points", repr(x), "--deriv"]) == 0
    line = capsys.readouterr().out.splitlines()[1]
    assert float(line.split(",")[2]) == 1.0


def test_eval_corrupt_model_exit_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1}')
    assert main(["eval", "--model", str(bad)]) == 3
    assert main(["eval", "--model", str(tmp_path / "missing.json")]) == 3


def test_eval_bad_points_exit_4(model_path):
    assert main(["eval", "--model", model_path, "--points", "a,b"]) == 4


# --- verify ------------------------------------------------------------------------

def test_verify_suite(model_path, tmp_path):
    out = tmp_path / "r.json"
    rc = main(["verify", "--model", model_path, "--suite", "fundamental,rotation,wandering",
               "--n", "1000", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert rc == 0 and doc["passed"]
    rot = [r for r in doc["reports"] if r["name"] == "rotation"][0]
    assert rot["threshold"] >= 1e-3


@pytest.mark.parametrize("suite", ["", "bogus", "rotation,bogus"])
def test_verify_bad_suite_exit_4(model_path, suite):
    assert main(["verify", "--model", model_path, "--suite", suite]) == 4


def test_verify_small_n_is_usage_error(model_path):
    assert main(["verify", "--model", model_path, "--suite", "rotation", "--n", "10"]) == 4


def test_verify_is_deterministic(model_path, tmp_path):
    docs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        main(["verify", "--model", model_path, "--suite", "all", "--n", "1000", "--seed", "7",
              "--out", str(out)])
        doc = json.loads(out.read_text())
        doc.pop("created")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


# --- integrate, spectrum, export -----------------------------------------------------

def test_integrate(capsys):
    assert main(["integrate", "--modulus", "power:tau=0.5", "--d", "1", "--which", "inv"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["converged"] and abs(doc["value"] - 1.0) <= 1e-8
    assert main(["integrate", "--modulus", "power:tau=1", "--which", "direct"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "diverges"
    assert main(["integrate", "--modulus", "bad:x"]) == 4


def test_spectrum(model_path, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--model", model_path, "--m", "100", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 100
    assert all(float(r.split(",")[3]) >= 1.0 for r in rows)
    assert main(["spectrum", "--model", model_path, "--window", "0.5,0.5"]) == 4
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--model", model_path, "--window", "2,3"])
    assert exc.value.code == 4


def test_export(model_path, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["export", "--model", model_path, "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4002
    assert main(["export", "--model", model_path]) == 4


def test_usage_errors():
    assert main([]) == 4
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 4
    with pytest.raises(SystemExit) as exc:
        main(["eval"])
    assert exc.value.code == 4
