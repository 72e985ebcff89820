from pathlib import Path

import numpy as np
import pytest

from polyreduce import cli
from polyreduce.config import ConfigError, export_structure, load_config, loads_config, parse_grid, parse_mu
from polyreduce.fields import halton_points
from polyreduce.instances import get_instance
from polyreduce.reduction import reduce
from polyreduce.structures import CosymplecticStructure, verify_structure

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

R4 = """
[instance]
kind = k-polycosymplectic
k = 2
coordinates = x, y, w, v
[tau.1]
y = 1
[tau.2]
x = 1
[omega.1]
x^w = 1
[omega.2]
y^v = 1
"""


def test_user_structure_parses():
    cfg = loads_config(R4)
    s = cfg.structure
    assert s.k == 2 and s.chart.names == ("x", "y", "w", "v")
    assert s.chart.bounds == ((-1.0, 1.0),) * 4
    assert not verify_structure(s, samples=5).passed


def test_catalog_config_with_parameters():
    cfg = loads_config("[instance]\nname = coupled-strings\n[parameters]\ncoupling = q**2*x\n[run]\nmu = 1, 2\n")
    assert cfg.instance.name == "coupled-strings"
    assert cfg.run["mu"] == "1, 2"
    assert cfg.instance.extras["coupling_text"] == "q**2*x"


def test_float_parameter_conversion():
    cfg = loads_config("[instance]\nname = membrane-polar\n[parameters]\nc = 1.5\nforce = exp(r)\n")
    assert cfg.instance.extras["c"] == 1.5


def test_expression_coefficients():
    text = """
[instance]
kind = cosymplectic
coordinates = t, q, p
[tau.1]
t = 1
[omega.1]
q^p = 1 + 0*t
[hamiltonian]
h = 0.5*p**2 + cos(q)
"""
    cfg = loads_config(text)
    assert isinstance(cfg.structure, CosymplecticStructure)
    x = np.array([0.1, 0.4, -0.3])
    assert cfg.instance.hamiltonian(x)[0] == pytest.approx(0.045 + np.cos(0.4))


@pytest.mark.parametrize("text,fragment", [
    ("[run]\nmu = 1\n", "[instance]"),
    ("[instance]\nname = nope\n", "nope"),
    ("[instance]\nname = coupled-strings\n[parameters]\nbogus = 1\n", "bogus"),
    ("[instance]\nname = membrane-polar\n[parameters]\nc = fast\n", "number"),
    ("[instance]\nkind = weird\ncoordinates = a\n", "weird"),
    ("[instance]\nkind = cosymplectic\ncoordinates = a, b\nbounds = 0:1\n", "bounds"),
    ("[instance]\nkind = cosymplectic\ncoordinates = t, q, p\n[omega.1]\nq^z = 1\n", "q^z"),
    ("[instance]\nkind = cosymplectic\ncoordinates = t, q, p\n[hamiltonian]\nh = p +* q\n", ""),
    ("[instance\nname = x", "malformed"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError) as e:
        loads_config(text)
    assert fragment in str(e.value)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.ini")


def test_shipped_configs_load():
    for p in sorted(CONFIGS.glob("*.ini")):
        assert load_config(p).structure is not None


def test_parse_helpers():
    assert parse_mu("1, -2.5") == (1.0, -2.5)
    assert parse_mu(None) is None
    assert parse_grid("201x101") == (201, 101)
    for bad in ("4x4", "20", "ax9"):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    with pytest.raises(ConfigError):
        parse_mu("1,x")


def test_export_round_trip_against_reduce():
    inst = get_instance("coupled-strings")
    res = reduce(inst, (1.0, 0.5), samples=20)
    qc = inst.quotient((1.0, 0.5))
    back = loads_config(export_structure(res.structure, qc.expected["h_text"]))
    s = back.structure
    assert s.chart.names == res.chart.names
    for z in halton_points(res.chart, 20, 3):
        np.testing.assert_allclose(s.tau.at(z), res.tau.at(z), atol=1e-12)
        np.testing.assert_allclose(s.omega.at(z), res.omega.at(z), atol=1e-12)
        assert back.instance.hamiltonian(z)[0] == pytest.approx(res.h(z)[0], abs=1e-10)


def test_export_rejects_varying_coefficients():
    from polyreduce.fields import AnalyticField
    from polyreduce.forms import VForm
    ch = get_instance("cosymplectic-darboux").chart
    om = VForm.from_terms(ch, 2, [{("q", "p"): AnalyticField(lambda v: [1 + v[0]], 3, 1)}])
    with pytest.raises(ValueError):
        export_structure(CosymplecticStructure(ch, VForm.from_terms(ch, 1, [{("t",): 1.0}]), om))


# ---------------------------------------------------------------------------
# command line


def _run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr().out


def test_list(capsys):
    code, out = _run(["list"], capsys)
    assert code == 0 and "coupled-strings" in out and "membrane-polar" in out


@pytest.mark.parametrize("args,code", [
    (["verify", "--instance", "coupled-strings", "--mu", "1.0,0.5"], 0),
    (["verify", "--instance", "cosymplectic-darboux"], 0),
    (["verify", "--config", str(CONFIGS / "r4-counterexample.ini")], 1),
    (["verify", "--config", str(CONFIGS / "darboux-user.ini")], 0),
    (["verify", "--instance", "coupled-strings", "--samples", "0"], 2),
    (["verify", "--instance", "nope"], 2),
    (["verify"], 2),
    (["verify", "--instance", "coupled-strings", "--svg"], 2),
    (["verify", "--instance", "coupled-strings", "--mu", "1,2,3"], 2),
    (["verify", "--instance", "product-cosymplectic", "--mu", "0.3,1,0.5,-0.4"], 2),
    (["solve", "--instance", "coupled-strings", "--grid", "4x4"], 2),
    (["solve", "--instance", "coupled-strings", "--grid", "20x200"], 1),
    (["solve", "--instance", "product-cosymplectic"], 2),
    (["reduce", "--instance", "membrane-polar", "--gauge", "minimal"], 1),
    (["reduce", "--instance", "product-cosymplectic", "--gauge", "paper"], 2),
    (["compare", "--instance", "cosymplectic-darboux"], 2),
    (["compare", "--instance", "membrane-polar", "--mu", "0.3,0.1"], 2),
])
def test_exit_codes(args, code, capsys):
    assert _run(args, capsys)[0] == code


def test_failure_line_names_check(capsys):
    code, out = _run(["verify", "--config", str(CONFIGS / "r4-counterexample.ini")], capsys)
    assert code == 1
    assert "FAIL: first failed check structure.ker_omega_rank" in out


def test_reduce_outputs_and_determinism(tmp_path, capsys):
    outs = []
    for d in ("a", "b"):
        code, _ = _run(["reduce", "--instance", "coupled-strings", "--mu", "1.0,0.5", "--out",
                        str(tmp_path / d)], capsys)
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / d).iterdir()})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"reduce_report.txt", "reduced.ini"}
    cfg = load_config(tmp_path / "a" / "reduced.ini")
    assert cfg.structure.omega.coefficient(cfg.structure.chart.center, 0, ("q", "pt")) == 0.5


def test_membrane_reduce_export(tmp_path, capsys):
    code, _ = _run(["reduce", "--config", str(CONFIGS / "membrane.ini"), "--out", str(tmp_path)], capsys)
    assert code == 0
    cfg = load_config(tmp_path / "reduced.ini")
    s = cfg.structure
    assert s.k == 1 and s.chart.names == ("r", "zeta", "pr")
    assert verify_structure(s, samples=10).passed


def test_solve_writes_csv_and_svg(tmp_path, capsys):
    code, out = _run(["solve", "--config", str(CONFIGS / "strings-wave.ini"), "--grid", "101x101",
                      "--out", str(tmp_path), "--svg"], capsys)
    assert code == 0 and "PASS" in out
    csv = (tmp_path / "solution.csv").read_text().splitlines()
    assert any(l.startswith("t,x,q1,q2") for l in csv)
    assert (tmp_path / "q1.svg").read_text().startswith("<svg")


def test_membrane_solve(capsys):
    code, out = _run(["solve", "--instance", "membrane-polar"], capsys)
    assert code == 0
    zeta2 = float(next(l for l in out.splitlines() if l.startswith("zeta(2) =")).split("=")[1])
    assert zeta2 == pytest.approx(-1.0, abs=1e-8)


def test_run_section_defaults(tmp_path, capsys):
    # strings-coupled.ini supplies mu and grid through [run]
    code, out = _run(["verify", "--config", str(CONFIGS / "strings-coupled.ini")], capsys)
    assert code == 0


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "polyreduce", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "membrane-polar" in r.stdout
