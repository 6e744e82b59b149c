import re

import pytest
from click.testing import CliRunner

from afz.cli import main
from afz.config import bundled_path, bundled_text


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "proto.cfg"
    path.write_text(bundled_text())
    return str(path)


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_plan(cfg_path, tmp_path):
    res = run("plan", cfg_path, "--csv", tmp_path)
    assert res.exit_code == 0, res.output
    body = [ln for ln in res.output.splitlines() if re.match(r"^\d", ln)]
    assert body[0].split()[:3] == ["25", "18", "450"]
    assert len(body) == 10
    assert (tmp_path / "plan.csv").exists()


def test_scenario(cfg_path):
    res = run("scenario", cfg_path)
    assert res.exit_code == 0, res.output
    assert "40.404" in res.output and "12.1212" in res.output


def test_analyze_paper_model(cfg_path, tmp_path):
    # the bundled point sits beyond the reset limit of the 11 nF capacitor
    res = run("analyze", cfg_path, "--csv", tmp_path)
    assert res.exit_code == 0, res.output
    assert "exceeds" in res.output.lower() or "limit" in res.output.lower()
    low = tmp_path / "low.cfg"
    low.write_text(bundled_text().replace("d = 0.689", "d = 0.55"))
    res = run("analyze", low, "--model", "paper", "--csv", tmp_path, "--no-metadata")
    assert res.exit_code == 0, res.output
    assert "V_Cd" in res.output


def test_bode_without_simulation(cfg_path, tmp_path):
    res = run("bode", cfg_path, "--tf", "gvd", "--out", tmp_path)
    assert res.exit_code == 0, res.output
    csvs = list(tmp_path.glob("*.csv"))
    assert csvs
    header = [ln for ln in csvs[0].read_text().splitlines() if not ln.startswith("#")][0]
    assert header == "freq_hz,mag_db,phase_deg"


def test_design(cfg_path):
    res = run("design", cfg_path)
    assert res.exit_code == 0, res.output
    assert "turns ratio" in res.output


def test_simulate_short(cfg_path, tmp_path):
    low = tmp_path / "low.cfg"
    low.write_text(bundled_text().replace("d = 0.689", "d = 0.5"))
    res = run("simulate", low, "--periods", 20, "--out", tmp_path)
    assert res.exit_code == 0, res.output
    wf = [p for p in tmp_path.glob("*.csv") if "wave" in p.name]
    assert wf


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text(bundled_text().replace("l_m = 485e-6", "l_m = -1"))
    res = run("analyze", bad)
    assert res.exit_code == 2
    assert "l_m" in res.output


def test_missing_file_exit_code(tmp_path):
    assert run("analyze", tmp_path / "nope.cfg").exit_code == 2


def test_bundled_path_exists():
    assert bundled_path().is_file()
