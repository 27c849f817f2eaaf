import csv
import io
import json
import subprocess
import sys

import pytest

from schwingerkit.cli import main, rows_to_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_vacuum_row(capsys):
    code, out, _ = run(capsys, "vacuum", "--sites", "2", "--x", "0.6", "--mu", "0.1", "--lt", "10")
    assert code == 0
    (row,) = table(out)
    got = [float(row[k]) for k in ("energy", "energy_density", "condensate", "electric_energy")]
    assert got == pytest.approx([-1.011810, -0.505905, -0.322324, 0.089457], abs=1e-5)


def test_scaling_small(capsys):
    code, out, _ = run(capsys, "scaling", "--max-sites", "6", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert [r["d_physical"] for r in data["rows"]] == [5, 13, 117, 1186]
    assert data["rows"][0]["d_k0"] is None
    assert set(data["fits"]) == {"d_physical", "d_k0", "d_even", "d_odd"}


def test_evolve_starts_without_pairs(capsys):
    code, out, _ = run(capsys, "evolve", "--method", "cartan", "--noise", "0", "--exact-probs", "--times", "0,0.5")
    assert code == 0
    rows = [r for r in table(out) if r["observable"] == "pair_probability"]
    assert rows[0]["t"] == "0" and rows[0]["value"] == "0"
    assert float(rows[1]["value"]) > 0


def test_evolve_exact_method(capsys):
    code, out, _ = run(capsys, "evolve", "--method", "exact", "--times", "0,1")
    assert code == 0
    assert "pair_probability" in {r["observable"] for r in table(out)}


def test_evolve_zne(capsys):
    code, out, _ = run(capsys, "evolve", "--eps", "0.03", "--r", "1,3,5", "--zne", "--exact-probs", "--times", "1.0")
    assert code == 0
    rows = {r["observable"]: r for r in table(out)}
    assert rows["pair_probability"]["r"] == "0"


def test_zne_fit_points(capsys):
    pts = "1:-0.887:0.015,3:-0.684:0.033,5:-0.372:0.034,7:-0.167:0.056"
    code, out, _ = run(capsys, "zne-fit", "--points", pts, "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["intercept"] == pytest.approx(-1.000, abs=0.01)
    assert d["stderr"] == pytest.approx(0.065, rel=0.3)


def test_zne_fit_input_file(capsys, tmp_path):
    f = tmp_path / "pts.csv"
    f.write_text("r,value,stderr\n1,-0.3073,0.0037\n3,-0.3262,0.0039\n5,-0.3411,0.0068\n7,-0.3515,0.0085\n")
    code, out, _ = run(capsys, "zne-fit", "--input", str(f))
    assert code == 0
    assert float(table(out)[0]["intercept"]) == pytest.approx(-0.296, abs=0.005)


def test_basis_and_spectrum(capsys):
    code, out, _ = run(capsys, "basis", "--sites", "2", "--parity", "1")
    assert code == 0 and len(table(out)) == 5
    code, out, _ = run(capsys, "spectrum", "--sites", "2", "--parity", "-1", "--link-cutoff", "3", "--lt", "10")
    assert code == 0
    assert float(table(out)[0]["eigenvalue"]) == pytest.approx(0.4857, abs=1e-4)


def test_convergence(capsys):
    code, out, _ = run(capsys, "convergence", "--format", "json")
    assert code == 0
    rows = {r["cutoff"]: r["eigenvalues"] for r in json.loads(out)}
    assert rows["lt=3"][1] == pytest.approx(1.1026, abs=1e-4)


def test_trotter_scan_and_cartan(capsys):
    code, out, _ = run(capsys, "trotter-scan", "--dt", "0.2", "--top", "3")
    assert code == 0 and len(table(out)) == 3
    code, out, err = run(capsys, "cartan", "--t", "2.0", "--format", "json", "--print-circuit", "--variant", "6cnot")
    assert code == 0
    d = json.loads(out)
    assert d["cx_count"] == 6 and d["fidelity"] > 1 - 1e-9
    assert err.startswith("u3") or err.startswith("rz")


def test_vqe_small(capsys):
    code, out, _ = run(capsys, "vqe", "--lt", "1", "--exact-probs", "--budget", "8", "--n-init", "4", "--levels", "all")
    assert code == 0
    rows = table(out)
    assert len(rows) == 2
    for r in rows:
        assert float(r["energy"]) == pytest.approx(float(r["exact"]), abs=1e-3)


@pytest.mark.parametrize("argv", [
    ["evolve", "--r", "2"],
    ["evolve", "--r", "1", "--zne"],
    ["vqe", "--inverted"],
    ["zne-fit"],
    ["zne-fit", "--points", "1:2:3:4"],
    ["nosuchcommand"],
    ["vacuum", "--sites", "two"],
])
def test_usage_errors_exit_2(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    capsys.readouterr()
    assert code == 2


def test_numeric_failure_exit_1(capsys):
    code, _, err = run(capsys, "zne-fit", "--points", "1:0.1:0.1,3:0.2:0,5:0.3:0.1", "--order", "1")
    assert code == 1
    assert "ValueError" in err


def test_config_file_and_flag_override(capsys, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# vacuum study\nsites = 2\nlt = 6\nformat = json\n")
    code, out, _ = run(capsys, "vacuum", "--config", str(conf))
    assert code == 0
    assert json.loads(out)[0]["n_spatial"] == 2
    code, out, _ = run(capsys, "vacuum", "--config", str(conf), "--format", "csv")
    assert out.startswith("n_spatial,")
    conf.write_text("bogus = 1\n")
    with pytest.raises(SystemExit) as exc:
        main(["vacuum", "--config", str(conf)])
    assert exc.value.code == 2
    capsys.readouterr()


@pytest.mark.parametrize("argv", [
    ["evolve", "--shots", "500", "--eps", "0.03", "--r", "1,3", "--times", "0.5,1.0"],
    ["vqe", "--lt", "1", "--shots", "500", "--budget", "6", "--n-init", "3"],
])
def test_same_seed_byte_identical(tmp_path, capsys, argv):
    paths = [tmp_path / f"{i}.out" for i in range(3)]
    for p, seed in zip(paths, ("7", "7", "8")):
        assert main(argv + ["--seed", seed, "--out", str(p)]) == 0
    capsys.readouterr()
    a, b, c = (p.read_bytes() for p in paths)
    assert a == b
    assert a != c
    assert b"\r" not in a


def test_rows_to_csv_formatting():
    text = rows_to_csv([{"a": 0.1, "b": None, "c": [1.0, 2.5]}])
    assert text == "a,b,c\n0.10000000000000001,,1 2.5\n"
    assert rows_to_csv([]) == ""


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "schwingerkit.cli", "zne-fit", "--points", "1:1,3:2,5:3",
                          "--order", "1"], capture_output=True, text=True, check=True).stdout
    assert float(table(out)[0]["intercept"]) == pytest.approx(0.5)
