import csv
import io
import json
import math
import subprocess
import sys

import pytest
from numpy.testing import assert_allclose

from naksum import cli
from naksum.cli import Sweep, UsageError, run


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _csv(text):
    rows = [r for r in csv.reader(io.StringIO(text)) if not r[0].startswith("#")]
    footer = dict(line[2:].split(",", 1) for line in text.splitlines() if line.startswith("# "))
    return rows[0], rows[1:], footer


def test_fit_single_branch(capsys):
    code, out, _ = _run(capsys, "fit", "--L", "1", "--m", "3", "--rho", "0", "--omega1", "2")
    assert code == 0
    cols, rows, _ = _csv(out)
    rec = dict(zip(cols, map(float, rows[0])))
    assert_allclose(rec["m_R"], 3.0, rtol=1e-12)
    assert_allclose(rec["omega_R"], 2.0, rtol=1e-14)


def test_fit_rho_sweep(capsys):
    code, out, _ = _run(capsys, "fit", "--L", "2", "--m", "1", "--rho", "0",
                        "--sweep", "rho:0:0.8:5")
    assert code == 0
    cols, rows, _ = _csv(out)
    assert cols == ["L", "m", "rho", "omega_R", "m_R", "ez2", "ez4"]
    assert [float(r[2]) for r in rows] == pytest.approx([0, 0.2, 0.4, 0.6, 0.8])


def test_ber_rayleigh_at_10db(capsys):
    code, out, _ = _run(capsys, "ber", "--L", "1", "--m", "1", "--rho", "0",
                        "--sweep", "snr_db:10:10:1")
    assert code == 0
    cols, rows, _ = _csv(out)
    assert cols == ["snr_db", "ber", "fallback"]
    assert abs(float(rows[0][1]) - 0.02327) < 5e-6
    assert rows[0][2] == "0"


def test_ber_bfsk_default_sweep(capsys):
    code, out, _ = _run(capsys, "ber", "--L", "1", "--m", "1", "--rho", "0",
                        "--modulation", "noncoherent-bfsk", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "ber"
    assert len(doc["rows"]) == 21
    for db, ber, fb in doc["rows"]:
        assert_allclose(ber, 1 / (2 + 10 ** (db / 10)), rtol=1e-10)


def test_outage_rows(capsys):
    code, out, _ = _run(capsys, "outage", "--L", "4", "--m", "2", "--rho", "0.5",
                        "--sweep", "threshold:-5:15:5")
    assert code == 0
    _, rows, _ = _csv(out)
    p = [float(r[1]) for r in rows]
    assert all(0 <= a < b <= 1 for a, b in zip(p, p[1:]))


def test_pdf_with_empirical_column(capsys):
    code, out, _ = _run(capsys, "pdf", "--L", "2", "--m", "2", "--rho", "0.3", "--n", "20000")
    assert code == 0
    cols, rows, _ = _csv(out)
    assert cols == ["r", "f_approx", "f_empirical"]
    assert len(rows) == cli.PDF_POINTS


def test_simulate_and_config_file(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"L": 2, "m_z": 2, "rho": 0.5, "powers": [1.0, 0.5]}))
    code, out, _ = _run(capsys, "simulate", "--config", str(cfg), "--n", "20000", "--seed", "4")
    assert code == 0
    cols, rows, _ = _csv(out)
    rec = dict(zip(cols, map(float, rows[0])))
    assert abs(rec["rho_hat"] - 0.5) < 5 * rec["rho_se"]


def test_config_conflict_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"L": 2, "m": 2, "rho": 0.5, "powers": [1, 1], "delta": 0.5}))
    code, _, err = _run(capsys, "fit", "--config", str(cfg))
    assert code == 2
    assert json.loads(err)["error"] == "UsageError"


def test_module_error_record(capsys):
    code, out, err = _run(capsys, "fit", "--L", "2", "--m", "1", "--rho", "1.5")
    assert code == 1 and out == ""
    rec = json.loads(err)
    assert rec["command"] == "fit"
    assert rec["error"] and rec["message"]


def test_sweep_not_allowed(capsys):
    code, _, err = _run(capsys, "outage", "--L", "2", "--m", "1", "--rho", "0.2",
                        "--sweep", "rho:0:0.5:3")
    assert code == 2
    assert "sweep" in json.loads(err)["message"]


def test_missing_scenario_field(capsys):
    code, _, err = _run(capsys, "fit", "--L", "2", "--m", "1")
    assert code == 2
    assert "rho" in json.loads(err)["message"]


@pytest.mark.parametrize("text", ["rho:0:1", "foo:0:1:3", "rho:1:0:3", "rho:0:1:0", "rho:a:1:3"])
def test_sweep_parse_rejects(text):
    with pytest.raises(UsageError):
        Sweep.parse(text)


def test_unwritable_output(tmp_path, capsys):
    code, _, err = _run(capsys, "fit", "--L", "2", "--m", "1", "--rho", "0.2",
                        "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 1
    assert json.loads(err)["error"]


def test_compare_threshold_columns(capsys):
    code, out, _ = _run(capsys, "compare", "--L", "2", "--m", "1", "--rho", "0.5",
                        "--n", "20000", "--sweep", "threshold:0:10:3")
    assert code == 0
    cols, rows, footer = _csv(out)
    assert cols == ["threshold_db", "p_out_analytic", "p_out_mc", "p_out_se"]
    assert len(rows) == 3
    assert float(footer["ks_n"]) == 20000
    assert 0 < float(footer["ks_distance"]) < 0.05


def test_compare_deterministic(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"]
    base = ["compare", "--L", "3", "--m", "2", "--rho", "0.4", "--n", "30000", "--seed", "17"]
    assert run(base + ["--out", str(paths[0])]) == 0
    assert run(base + ["--out", str(paths[1])]) == 0
    assert run(base + ["--out", str(paths[2]), "--workers", "3"]) == 0
    data = [p.read_bytes() for p in paths]
    assert data[0] == data[1] == data[2]
    assert not math.isnan(float(_csv(data[0].decode())[2]["ks_distance"]))


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "naksum.cli", "fit", "--L", "1", "--m", "1",
                          "--rho", "0", "--format", "json"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["columns"][0] == "L"
