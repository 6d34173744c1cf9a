import csv
import json

import pytest

from mscalib import ConfigError
from mscalib.cli import main
from mscalib.config import load_config, parse_config

FAST = ["--conditions", "b,c,d,e", "--grid", "16", "--refine", "1", "--brute", "0"]


def write(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


def small(tmp_path, extra=None):
    cfg = {"scan": {"n_samples": 2000, "n_boxes": 120, "per_family": 10, "per_ray": 8},
           "energy": {"n_competitors": 6, "mesh_n": 12, "erasure_n": 8},
           "rho": {"n": 17}}
    cfg.update(extra or {})
    return write(tmp_path, cfg)


# ---------------------------------------------------------------- config

def test_defaults():
    cfg = load_config(None)
    assert cfg.seed == 0
    assert cfg.section("scan")["grid"] == 32
    assert cfg.section("step3")["epsilons"] == [0.02, 0.05, 0.1, 1.8]
    assert cfg.triple().constants == (0.0, 1.0, 2.0)


def test_unknown_key_reports_path():
    with pytest.raises(ConfigError) as exc:
        parse_config({"params": {"epsilonn": 0.1}})
    assert "params" in str(exc.value) and "epsilonn" in str(exc.value)


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"seed": 1,,}')
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert "line 1" in str(exc.value)


def test_coefficients_need_ks():
    cfg = parse_config({"triple": {"coefficients": [[0.5], [0.5], [0.5]]}})
    with pytest.raises(ConfigError):
        cfg.triple()


def test_per_sector_coefficients():
    cfg = parse_config({"triple": {"symmetry": "antisymmetric", "ks": [1],
                                   "coefficients": [[0.5], [0.5], [0.5]]}})
    t = cfg.triple()
    assert t.antisymmetric and t.signs == (1, -1, 1)


# ---------------------------------------------------------------- exit codes

@pytest.mark.parametrize("payload", [
    {"params": {"epsilonn": 0.1}},
    {"params": {"epsilon": 0.6}},
    {"triple": {"constants": [0, 0, 2]}},
])
def test_verify_config_errors_exit_2(tmp_path, payload, capsys):
    code = main(["verify", "--config", str(write(tmp_path, payload)), "--out",
                 str(tmp_path / "o"), "--no-plots"] + FAST)
    assert code == 2
    assert capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["check", "--config", str(tmp_path / "nope.json")]) == 2


def test_unknown_condition_exit_2(tmp_path):
    assert main(["verify", "--conditions", "z", "--out", str(tmp_path)]) == 2


def test_check_broken_triple_exit_1(tmp_path, capsys):
    p = write(tmp_path, {"triple": {"ks": [1], "coefficients": [[0.5], [0.5], [0.7]]}})
    assert main(["check", "--config", str(p)]) == 1
    assert '"passed": false' in capsys.readouterr().out


def test_check_pass(capsys):
    assert main(["check"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hypotheses"]["passed"]


def test_verify_condf_override_rejected(tmp_path):
    # f''(0) above the admissible bound is an infeasible parameter set
    p = small(tmp_path, {"params": {"fpp": -10.0}})
    assert main(["verify", "--config", str(p), "--out", str(tmp_path / "o"), "--no-plots"]
                + FAST) == 2


# ---------------------------------------------------------------- outputs

def test_verify_outputs_and_determinism(tmp_path):
    cfg = small(tmp_path, {"triple": {"modes": [[1, 0.5]]}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", str(cfg), "--out", str(a), "--no-plots"] + FAST) == 0
    assert main(["verify", "--config", str(cfg), "--out", str(b), "--no-plots", "--threads", "2"]
                + FAST) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "witnesses.csv").read_bytes() == (b / "witnesses.csv").read_bytes()
    rep = json.loads((a / "report.json").read_text())
    assert rep["pass"] and set(rep["conditions"]) == {"b", "c", "d", "e"}
    assert rep["conditions"]["d"]["details"]["argmax_on_jump"]
    rows = list(csv.reader((a / "witnesses.csv").open()))
    assert rows[0][:2] == ["condition", "pass"] and len(rows) == 5


def test_verify_writes_plots_and_tables(tmp_path):
    cfg = small(tmp_path)
    out = tmp_path / "o"
    code = main(["verify", "--config", str(cfg), "--out", str(out),
                 "--conditions", "a,d,oracles", "--grid", "16", "--refine", "1", "--brute", "0"])
    assert code == 0
    for f in ("report.json", "oracles.csv", "divergence_boxes.csv", "regions.png",
              "divergence.png", "rho_slice.png"):
        assert (out / f).stat().st_size > 0, f
    assert (out / "regions.png").read_bytes()[:4] == b"\x89PNG"
    rows = list(csv.reader((out / "divergence_boxes.csv").open()))
    assert len(rows) == 121


def test_rho_modes(tmp_path):
    cfg = small(tmp_path)
    out = tmp_path / "r"
    assert main(["rho", "--config", str(cfg), "--out", str(out), "--ray", "S_12"]) == 0
    s = json.loads((out / "rho.json").read_text())
    assert s["max_abs_rho_minus_1"] < 1e-9
    assert (out / "rho_S_12.png").exists()
    rows = list(csv.reader((out / "rho_S_12.csv").open()))
    assert len(rows) == 18
    assert main(["rho", "--config", str(cfg), "--out", str(out), "--mode", "slice"]) == 0
    s = json.loads((out / "rho.json").read_text())
    assert s["max_rho"] <= 1 + 1e-9 and s["max_diagonal"] == 0.0


def test_rho_point_outside(tmp_path):
    cfg = small(tmp_path, {"rho": {"mode": "slice", "point": [1.0, 0.0]}})
    assert main(["rho", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2


def test_energy_command(tmp_path):
    cfg = small(tmp_path)
    out = tmp_path / "e"
    assert main(["energy", "--config", str(cfg), "--out", str(out)]) == 0
    s = json.loads((out / "energy.json").read_text())
    assert s["pass"] and s["bump_exponent_in_range"]
    assert (out / "energy.png").exists()
    rows = list(csv.reader((out / "energy.csv").open()))
    assert rows[0][0] == "competitor_id"
    shift0 = [r for r in rows[1:] if r[1] == "JunctionShift"][0]
    assert float(shift0[6]) == 0.0


def test_step3_command(tmp_path):
    out = tmp_path / "s"
    assert main(["step3", "--out", str(out)]) == 0
    s = json.loads((out / "step3.json").read_text())
    big = [c for c in s["cases"] if c["epsilon"] == 1.8]
    assert big and all(c["hypothesis_violated"] and not c["pass"] for c in big)
    assert (out / "step3_eps0.05.png").exists()

