import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from drsurf import cli
from drsurf.critical_maps import tri_hex_torus
from drsurf.electrical_moves import move_III, type_III_sites


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def cval(pair):
    return complex(pair[0], pair[1])


def test_periods_of_right_angle_square_torus(capsys):
    code, out, _ = run(capsys, "periods", "--square-torus", "1", "1", "0.7853981634")
    assert code == 0
    data = json.loads(out)
    pi = np.array([[cval(v) for v in row] for row in data["pi"]])
    assert np.abs(pi - 1j * np.eye(2)).max() <= 1e-8
    assert abs(cval(data["pi_gamma"][0][0]) - 1j) <= 1e-9
    assert abs(cval(data["pi_gamma_star"][0][0]) - 1j) <= 1e-9
    assert data["residuals"]["bilinear_lambda_max"] <= 1e-9


def test_periods_of_two_by_three_torus(capsys):
    code, out, _ = run(capsys, "periods", "--square-torus", "2", "3", "1.0471975512")
    data = json.loads(out)
    tau = 1.5 * np.exp(2j * 1.0471975512)
    assert abs(cval(data["pi_gamma"][0][0]) - tau) <= 1e-9
    assert abs(cval(data["tau_ref"]) - tau) <= 1e-12
    assert data["genus"] == 1 and data["n_quads"] == 24
    for key in ("gram", "pi_diamond", "duality", "solver", "residuals"):
        assert key in data


def test_periods_of_genus_two(capsys):
    code, out, _ = run(capsys, "periods", "--genus-two", "--pairs", "3", "--seed", "1")
    data = json.loads(out)
    assert code == 0 and data["genus"] == 2
    assert len(data["pi"]) == 4
    assert data["residuals"]["pi_symmetry"] <= 1e-8


def test_periods_output_is_byte_identical(capsys):
    _, a, _ = run(capsys, "periods", "--tri-hex", "2", "2")
    _, b, _ = run(capsys, "periods", "--tri-hex", "2", "2")
    assert a == b
    assert "e+00" in a or "e-" in a


def test_periods_from_json_file(capsys, tmp_path):
    from drsurf.critical_maps import square_torus
    p = tmp_path / "torus.json"
    p.write_text(json.dumps(square_torus(1, 2, 0.7).dc.to_json()))
    code, out, _ = run(capsys, "periods", str(p))
    assert code == 0 and json.loads(out)["genus"] == 1


def test_malformed_json_exits_with_input_error(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "periods", str(p))
    assert code == 2 and "error" in err
    p.write_text(json.dumps({"vertices": [], "quads": [[0, 1, 2]]}))
    code, _, err = run(capsys, "periods", str(p))
    assert code == 2


def test_periods_need_exactly_one_surface(capsys):
    assert run(capsys, "periods")[0] == 2
    assert run(capsys, "periods", "--genus-two", "--tri-hex", "1", "1")[0] == 2
    assert run(capsys, "periods", "--square-torus", "1", "1", "2.0")[0] == 2


def test_solver_failure_exit_code(capsys, monkeypatch):
    from drsurf import _kernels
    monkeypatch.setattr(_kernels, "cg_solve", lambda *a, **k: (np.zeros(len(a[1])), 1, 1.0))
    assert run(capsys, "periods", "--square-torus", "1", "1", "0.7")[0] == 4


def test_converge_table(capsys):
    code, out, _ = run(capsys, "converge", "--square-torus", "1", "1", "0.7853981634", "--levels", "3")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["level"]) for r in rows] == [1, 2, 3]
    deltas = [float(r["delta"]) for r in rows]
    assert deltas == [1.0, 0.5, 0.25]
    assert all(float(r["gap_gamma_gamma_star"]) <= 1e-9 for r in rows)
    assert "\r" not in out


def test_converge_reports_noncritical_gap(capsys):
    code, out, _ = run(capsys, "converge", "--square-torus", "1", "1", "0.7", "--levels", "2", "--noncritical")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2
    assert float(rows[0]["gap_gamma_gamma_star"]) > 1e-9


def test_converge_rejects_bad_input(capsys):
    assert run(capsys, "converge", "--genus-two")[0] == 2
    assert run(capsys, "converge", "--tri-hex", "1", "1", "--levels", "0")[0] == 2


def test_special_power_on_the_chain(capsys):
    code, out, err = run(capsys, "special", "power", "--k", "3", "--chain", "10")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 11
    last = rows[-1]
    assert float(last["re_f"]) == pytest.approx(1 + 1 / 200, abs=1e-12)
    assert err.startswith("# max_abs_error=")


def test_special_power_zero_is_one(capsys):
    _, out, _ = run(capsys, "special", "power", "--k", "0", "--square", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert all(float(r["re_f"]) == 1 and float(r["im_f"]) == 0 for r in rows)


def test_special_exp_on_the_sextant(capsys):
    code, out, err = run(capsys, "special", "exp", "--lambda", "1+0j", "--sextant", "8")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0].keys()) == ["vertex", "re_z", "im_z", "re_f", "im_f", "re_f_cont", "im_f_cont"]
    assert float(err.split("=")[1].split()[0]) > 0
    # the discrete exponential tracks e^z within a quarter, relative, out to |z| ~ 14
    rel = [abs(complex(float(r["re_f"]), float(r["im_f"]))
               / complex(float(r["re_f_cont"]), float(r["im_f_cont"])) - 1) for r in rows]
    assert max(rel) < 0.25


def test_special_rejects_bad_input(capsys):
    assert run(capsys, "special", "power", "--square", "2")[0] == 2
    assert run(capsys, "special", "power", "--k", "-1")[0] == 2
    assert run(capsys, "special", "exp", "--lambda", "20", "--chain", "10")[0] == 2


def _write(tmp_path, obj, name="script.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_empty_script(capsys, tmp_path):
    code, out, _ = run(capsys, "moves", "--tri-hex", "2", "2", "--script", _write(tmp_path, []))
    data = json.loads(out)
    assert code == 0 and data["moves"] == 0 and len(data["trace"]) == 1
    assert data["trace"][0]["total_curvature"] == pytest.approx(0, abs=1e-12)


def test_star_triangle_round_trip_script(capsys, tmp_path):
    dc = tri_hex_torus(m=2, n=2).dc
    c = type_III_sites(dc)[0]
    _, rec = move_III(dc, c)
    script = [{"kind": "III", "site": c}, rec.inverse]
    code, out, _ = run(capsys, "moves", "--tri-hex", "2", "2", "--script", _write(tmp_path, script))
    data = json.loads(out)
    assert code == 0
    assert data["residuals"]["rho_multiset_change"] <= 1e-12
    assert data["residuals"]["curvature_drift"] <= 1e-12
    assert all(t["holomorphic_dimension"] == 2 for t in data["trace"])
    assert all(t["star_triangle_residual"] <= 1e-13 for t in data["trace"][1:])


def test_moves_transport_on_sextant(capsys, tmp_path):
    script = [{"kind": "II", "site": 0, "direction": "split", "t": 0.3},
              {"kind": "I", "site": 4, "direction": "insert", "rho": 0.8}]
    code, out, _ = run(capsys, "moves", "--sextant", "4", "--script", _write(tmp_path, script))
    data = json.loads(out)
    assert code == 0
    for step in data["transport"]:
        assert step["cr_residual"] <= 1e-10
        assert step["energy_change"] <= 1e-10


def test_invalid_site_exits_with_script_error(capsys, tmp_path):
    script = [{"kind": "II", "site": 0, "direction": "split"}, {"kind": "III", "site": 0}]
    code, _, err = run(capsys, "moves", "--square-torus", "2", "2", "0.7", "--script", _write(tmp_path, script))
    assert code == 3
    assert "move 1" in err


def test_missing_script_is_an_input_error(capsys, tmp_path):
    code, _, _ = run(capsys, "moves", "--tri-hex", "1", "1", "--script", str(tmp_path / "none.json"))
    assert code == 2
    code, _, _ = run(capsys, "moves", "--tri-hex", "1", "1", "--script", _write(tmp_path, {"kind": "I"}))
    assert code == 2


def test_module_entry_point_without_numba(tmp_path):
    env = dict(os.environ, DRSURF_DISABLE_NUMBA="1")
    res = subprocess.run([sys.executable, "-m", "drsurf.cli", "special", "power", "--k", "3", "--chain", "10"],
                         capture_output=True, text=True, env=env, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[-1].split(",")[3] == "%.12e" % (1 + 1 / 200)
