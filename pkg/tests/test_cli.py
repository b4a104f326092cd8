import csv
import re
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from heralded_qkd.cli import CSV_COLUMNS, format_number, main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def small_config(tmp_path, name, kind="amhps", protocol="no_decoy", losses="0, 10, 20", extra=""):
    path = tmp_path / f"{name}.ini"
    path.write_text(
        f"""[source]
kind = {kind}
m = 8
eta = 0.7
gamma = 0.5
{extra}
[channel]
losses = {losses}
[protocol]
name = {protocol}
[output]
label = {name}
"""
    )
    return str(path)


def test_format_number():
    assert format_number(None) == ""
    assert format_number(0) == "0.00000000000e+00"
    assert format_number(1234.5) == "1.23450000000e+03"


def test_mhps_family_matches_golden(tmp_path, capsys):
    assert main(["sweep", "--config", str(CONFIGS / "mhps_family.ini"), "--out", str(tmp_path)]) == 0
    written = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert len(written) == 4
    for name in written:
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes()


def test_csv_schema(tmp_path):
    cfg = small_config(tmp_path, "schema", protocol="active_decoy, passive_decoy")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    with open(tmp_path / "schema_amhps_m8_eta0.7_gamma0.5_passive_decoy.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 4
    number = re.compile(r"^-?\d\.\d{11}e[+-]\d{2}$")
    for row in rows[1:]:
        assert row[5] == ""  # delta does not apply to passive decoy
        assert all(number.match(c) for i, c in enumerate(row) if i != 5)
    with open(tmp_path / "schema_amhps_m8_eta0.7_gamma0.5_active_decoy.csv") as fh:
        rows = list(csv.reader(fh))
    assert all(row[5:] == [""] * 5 for row in rows[1:])


def test_svg_output(tmp_path):
    cfg = small_config(tmp_path, "plot")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--svg"]) == 0
    root = ET.parse(tmp_path / "plot.svg").getroot()
    assert root.tag.endswith("svg")
    assert root.findall(".//{http://www.w3.org/2000/svg}polyline")


@pytest.mark.parametrize(
    "kwargs",
    [dict(kind="wcs", protocol="passive_decoy"), dict(losses=""), dict(extra="mu_min = 5")],
)
def test_config_errors_exit_2(tmp_path, kwargs, capsys):
    assert main(["sweep", "--config", small_config(tmp_path, "bad", **kwargs), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.ini")]) == 2


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["sweep", "--config", small_config(tmp_path, "io"), "--out", str(blocker / "sub")]) == 4


def test_optimize(tmp_path, capsys):
    assert main(["optimize", "--config", small_config(tmp_path, "opt"), "--loss", "10"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "label,loss_db,mu_opt,rate"
    assert lines[1].startswith("opt_amhps_m8_eta0.7_gamma0.5_no_decoy,1.00000000000e+01,")


class TestValidateMc:
    def test_reference_config_passes(self, capsys):
        assert main(["validate-mc", "--config", str(CONFIGS / "mc_amhps_reference.ini")]) == 0
        out = capsys.readouterr().out
        assert re.search(r": PASS, trials=10000000 .*tv=\d\.\d{3}e-0\d<0\.005", out)

    def test_zero_trials_is_config_error(self, tmp_path):
        cfg = small_config(tmp_path, "mc0", extra="mu = 0.2\n[mc]\ntrials = 0")
        assert main(["validate-mc", "--config", cfg]) == 2

    def test_needs_fixed_mu(self, tmp_path):
        assert main(["validate-mc", "--config", small_config(tmp_path, "nomu")]) == 2

    def test_report_is_reproducible(self, tmp_path, capsys):
        cfg = small_config(tmp_path, "mcrep", kind="amhps, smhps", extra="mu = 0.3\n[mc]\ntrials = 100000")
        reports = []
        for jobs in ("1", "2"):
            assert main(["validate-mc", "--config", cfg, "--seed", "99", "--jobs", jobs]) == 0
            reports.append(capsys.readouterr().out)
        assert reports[0] == reports[1]
        assert "seed=99" in reports[0]
        main(["validate-mc", "--config", cfg, "--seed", "100"])
        assert capsys.readouterr().out != reports[0]

    def test_failure_exit_3(self, tmp_path, capsys):
        cfg = small_config(tmp_path, "mcfail", extra="mu = 0.3\n[mc]\ntrials = 10000\ntv_tol = 1e-9")
        assert main(["validate-mc", "--config", cfg]) == 3
        assert "FAIL" in capsys.readouterr().out


class TestCompare:
    def test_needs_two_configs(self, tmp_path):
        assert main(["compare", "--config", small_config(tmp_path, "one"), "--out", str(tmp_path)]) == 2

    def test_grid_mismatch(self, tmp_path):
        a = small_config(tmp_path, "a")
        b = small_config(tmp_path, "b", losses="0, 10")
        assert main(["compare", "--config", a, "--config", b, "--out", str(tmp_path)]) == 2

    def test_wide_csv(self, tmp_path):
        a = small_config(tmp_path, "sym", kind="smhps", protocol="active_decoy, passive_decoy")
        b = small_config(tmp_path, "asym", kind="amhps", protocol="active_decoy, passive_decoy")
        assert main(["compare", "--config", a, "--config", b, "--out", str(tmp_path), "--svg"]) == 0
        with open(tmp_path / "compare_sym_vs_asym.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3 and len(rows[0]) == 5
        for row in rows:
            for protocol in ("active_decoy", "passive_decoy"):
                sym = float(row[f"sym_smhps_m8_eta0.7_gamma0.5_{protocol}"])
                asym = float(row[f"asym_amhps_m8_eta0.7_gamma0.5_{protocol}"])
                assert asym >= sym
        assert (tmp_path / "compare_sym_vs_asym.svg").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "heralded_qkd", "sweep", "--config", small_config(tmp_path, "entry"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "entry_amhps_m8_eta0.7_gamma0.5_no_decoy.csv").exists()
