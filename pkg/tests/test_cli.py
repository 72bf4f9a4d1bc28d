import json

import pytest

from clickgbs.cli import main, quantum_orbit_table, run
from clickgbs.config import ConfigError, ExperimentConfig, load_config
from clickgbs.orbits import OrbitTable

BASE = {
    "M": 4,
    "M_prime": 2,
    "n_ph": 0.6,
    "epsilon": 0.1,
    "eta": 0.8,
    "unitary_seed": 3,
    "seed": 5,
    "detector": {"kind": "click", "K": 2},
    "estimator": {"method": "phase-space", "E_S": 40000},
    "classical": {"state": "thermal", "N": 20000},
    "validation": {"l": [0, 1], "min_count": 10, "N_O": 500},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def body(path):
    lines = open(path, encoding="utf-8").read().split("\n")
    assert lines[0].startswith("# clickgbs ")
    return "\n".join(lines[1:])


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict(BASE)
    again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg and again.digest() == cfg.digest()
    assert ExperimentConfig.from_dict({**BASE, "threads": 3}).digest() == cfg.digest()
    assert ExperimentConfig.from_dict({**BASE, "seed": 6}).digest() != cfg.digest()


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"r": 0.5}, "r"),
        ({"eta": 1.5}, "eta"),
        ({"M_prime": 9}, "M_prime"),
        ({"colour": 1}, "colour"),
        ({"detector": {"kind": "bolometer"}}, "detector"),
        ({"estimator": {"grid": "folded"}}, "estimator.D"),
        ({"classical": {"state": "squeezed"}}, "classical.state"),
    ],
)
def test_invalid_configs(patch, field):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({**BASE, **patch})
    assert exc.value.field == field


def test_missing_field():
    d = dict(BASE)
    del d["eta"]
    with pytest.raises(ConfigError, match="eta"):
        ExperimentConfig.from_dict(d)


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"M": 4,\n "eta": }')
    assert main(["orbits", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["orbits", write(tmp_path, {**BASE, "eta": 0})]) == 2
    assert main(["orbits", str(tmp_path / "missing.json")]) == 2
    huge = {**BASE, "detector": {"kind": "pnr"}, "pattern": [40, 0, 0, 0]}
    assert main(["functional", write(tmp_path, huge)]) == 1
    assert "refused" in capsys.readouterr().err
    assert main(["functional", write(tmp_path, BASE)]) == 2


def test_functional(tmp_path):
    out = tmp_path / "f.csv"
    cfg = {**BASE, "pattern": [1, 0, 2, 0]}
    assert main(["functional", write(tmp_path, cfg), "-o", str(out)]) == 0
    rows = body(out).strip().split("\n")
    assert rows[0] == "pattern,probability"
    assert rows[1].startswith("1 0 2 0,")


def test_orbits_match_library(tmp_path):
    out = tmp_path / "o.csv"
    path = write(tmp_path, BASE)
    assert main(["orbits", path, "-o", str(out), "--threads", "1"]) == 0
    lib = quantum_orbit_table(load_config(path), threads=1).to_csv()
    assert body(out) == lib
    t = OrbitTable.from_csv(open(out).read())
    assert t.samples == 40000 and t.seed == 5


def test_header(tmp_path):
    out = tmp_path / "o.csv"
    path = write(tmp_path, BASE)
    main(["classical-sample", path, "-o", str(out)])
    head = open(out).readline()
    cfg = load_config(path)
    assert f"config_sha256={cfg.digest()}" in head and "seed=5" in head and "git=" in head and "created=" in head
    assert b"\r" not in out.read_bytes()


@pytest.mark.parametrize("cmd", ["orbits", "classical-sample", "chi2", "bayes"])
def test_byte_identical_reruns(tmp_path, cmd, monkeypatch):
    path = write(tmp_path, BASE)
    a, b, c = (tmp_path / f"{cmd}{i}.csv" for i in range(3))
    assert main([cmd, path, "-o", str(a), "--threads", "1"]) == 0
    assert main([cmd, path, "-o", str(b), "--threads", "4"]) == 0
    monkeypatch.setenv("CLICKGBS_THREADS", "3")
    assert main([cmd, path, "-o", str(c)]) == 0
    assert body(a) == body(b) == body(c)


def test_direct_method(tmp_path):
    cfg = {**BASE, "estimator": {"method": "direct", "N_S": 50, "max_clicks": 4}}
    out = tmp_path / "d.csv"
    assert main(["orbits", write(tmp_path, cfg), "-o", str(out)]) == 0
    t = OrbitTable.from_csv(open(out).read())
    assert t.method == "direct" and max(o.n for o in t.entries) == 4


def test_bayes_swap_flips_sign(tmp_path):
    cfg = {**BASE, "classical": {"state": "squashed", "N": 20000}, "validation": {"N_O": 4000}}
    path = write(tmp_path, cfg)
    fwd, back = tmp_path / "f.csv", tmp_path / "b.csv"
    assert main(["bayes", path, "-o", str(fwd)]) == 0
    assert main(["bayes", path, "--swap", "-o", str(back)]) == 0
    f = body(fwd).strip().split("\n")[1].split(",")
    b = body(back).strip().split("\n")[1].split(",")
    assert f[0] == "bayes" and b[0] == "bayes-swapped"
    dh_f, se_f = float(f[2]), float(f[3])
    dh_b, se_b = float(b[2]), float(b[3])
    assert dh_f > 3 * se_f and dh_b < -3 * se_b


def test_conformance_all_green(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["conformance", "-o", str(out)]) == 0
    rows = body(out).strip().split("\n")
    assert rows[0] == "suite,check,value,reference,error,tol,passed"
    assert all(r.endswith(",1") for r in rows[1:]) and len(rows) > 50


def test_run_without_config():
    with pytest.raises(ConfigError):
        run("orbits", None)
