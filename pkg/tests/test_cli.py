import json
import subprocess
import sys

import numpy as np
import pytest

from gamowkit import ResonancePole, SampledWaveFunction, default_grid, io, lineshape
from gamowkit.cli import run_cli


@pytest.fixture
def run(tmp_path, capsys):
    def _run(*argv, figures=False):
        args = [*argv, "--out-dir", str(tmp_path / "out")]
        if not figures:
            args.append("--no-figures")
        code = run_cli(args)
        out, err = capsys.readouterr()
        report = json.loads(out) if code == 0 else None
        error = json.loads(err.strip().splitlines()[-1]) if code != 0 else None
        return code, report, error

    return _run


@pytest.fixture(scope="module")
def wf_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("wf")
    grid = default_grid()
    io.save_wavefunction(d / "bw_lower.csv",
                         SampledWaveFunction.from_function(lambda e: 1 / (e - (2 + 0.5j)), grid))
    io.save_wavefunction(d / "psi.csv",
                         SampledWaveFunction.from_function(lambda e: np.conj(1 / (e - 1j)), grid))
    io.save_wavefunction(d / "gauss.csv",
                         SampledWaveFunction.from_function(lambda e: np.exp(-e**2), grid))
    return d


def test_hardy_check(run, wf_files, tmp_path):
    code, report, _ = run("hardy", "check", "--input", str(wf_files / "bw_lower.csv"),
                          "--half-plane", "lower", "--tol", "1e-6", figures=True)
    assert code == 0
    assert report["passes"] is True and report["forbidden_mass"] < 1e-6
    assert report["grid"] == {"e_min": -200.0, "e_max": 200.0, "n": 16384}
    for key in ("report", "time_signal_csv", "figure_time_signal"):
        assert (tmp_path / "out" / report["artifacts"][key].split("/")[-1]).exists()
    saved = io.load_json(report["artifacts"]["report"])
    assert saved["forbidden_mass"] == report["forbidden_mass"]


def test_hardy_check_failing_function_still_exits_zero(run, wf_files):
    code, report, _ = run("hardy", "check", "--input", str(wf_files / "gauss.csv"))
    assert code == 0 and report["passes"] is False


def test_hardy_evolve(run, wf_files):
    code, report, _ = run("hardy", "evolve", "--input", str(wf_files / "bw_lower.csv"), "--t", "1")
    assert code == 0 and report["passes"] and report["direction"] == "state"
    code, report, _ = run("hardy", "evolve", "--input", str(wf_files / "bw_lower.csv"), "--t", "-1")
    assert code == 0 and not report["passes"] and report["forbidden_mass"] > 1e-2


def test_titchmarsh_eval(run, wf_files):
    code, report, _ = run("titchmarsh", "eval", "--input", str(wf_files / "bw_lower.csv"),
                          "--z", "1+0.5j", "--half-plane", "upper")
    assert code == 0
    code, _, err = run("titchmarsh", "eval", "--input", str(wf_files / "bw_lower.csv"), "--z", "1")
    assert code == 3 and err["category"] == "domain"


def test_titchmarsh_value(run, tmp_path):
    grid = default_grid()
    path = tmp_path / "g.csv"
    io.save_wavefunction(path, SampledWaveFunction.from_function(lambda e: 1 / (e - 1j), grid))
    code, report, _ = run("titchmarsh", "eval", "--input", str(path), "--z", "1-0.5i")
    value = complex(report["value"]["re"], report["value"]["im"])
    assert code == 0 and value == pytest.approx(1 / (1 - 1.5j), rel=1e-6)


def test_resonance_fit(run, tmp_path):
    e = np.linspace(1, 9, 201)
    io.save_lineshape(tmp_path / "ls.csv", e, lineshape(ResonancePole(5, 0.8), e))
    code, report, _ = run("resonance", "fit", "--input", str(tmp_path / "ls.csv"), figures=True)
    assert code == 0
    assert report["pole"]["e_r"] == pytest.approx(5, abs=1e-6)
    assert report["pole"]["gamma"] == pytest.approx(0.8, abs=1e-6)
    assert len(report["covariance"]) == 3 and "iterations" in report
    assert io.load_pole(report["artifacts"]["pole"]).gamma == pytest.approx(0.8, abs=1e-6)


def test_resonance_fit_flat_is_numerical_error(run, tmp_path):
    e = np.linspace(0, 1, 20)
    io.save_lineshape(tmp_path / "flat.csv", e, np.ones_like(e))
    code, _, err = run("resonance", "fit", "--input", str(tmp_path / "flat.csv"))
    assert code == 4 and err["error"] == "RankDeficiencyError"


def test_resonance_evolve(run):
    code, report, _ = run("resonance", "evolve", "--e-r", "2", "--gamma", "1", "--t", "2")
    assert code == 0
    assert report["survival_probability"] == pytest.approx(np.exp(-2), rel=1e-14)
    assert report["lifetime"] == 1.0


def test_resonance_evolve_negative_time_is_domain_error(run):
    code, _, err = run("resonance", "evolve", "--e-r", "2", "--gamma", "1", "--t", "-1")
    assert code == 3
    assert "semigroup" in err["message"] and err["error"] == "SemigroupDomainError"


def test_resonance_evolve_ev_units(run):
    code, report, _ = run("resonance", "evolve", "--e-r", "2", "--gamma", "1e-6", "--t", "0",
                          "--energy-unit", "eV")
    assert code == 0
    assert report["lifetime_seconds"] == pytest.approx(6.582119569e-16 / 1e-6, rel=1e-9)


def test_resonance_evolve_pole_file(run, tmp_path):
    io.save_pole(tmp_path / "p.json", ResonancePole(1, 0.5))
    code, report, _ = run("resonance", "evolve", "--pole", str(tmp_path / "p.json"), "--t", "2")
    assert code == 0 and report["survival_probability"] == pytest.approx(np.exp(-1))


def test_gamow_pair(run, wf_files):
    code, report, _ = run("gamow", "pair", "--input", str(wf_files / "psi.csv"),
                          "--e-r", "2", "--gamma", "1")
    assert code == 0
    value = complex(report["pairing"]["re"], report["pairing"]["im"])
    assert value == pytest.approx(0.32 + 0.24j, rel=1e-6)
    assert report["normalization"]
    code, _, err = run("gamow", "pair", "--input", str(wf_files / "gauss.csv"),
                       "--e-r", "2", "--gamma", "1")
    assert code == 3 and err["error"] == "NotAnObservableError"


def test_sim_chain(run, tmp_path):
    code, report, _ = run("sim", "run", "--duration", "300", "--seed", "42", "--gamma", "0.2",
                          "--shelving-rate", "0.2", figures=True)
    assert code == 0 and report["n_photons"] > 0
    trace = report["artifacts"]["trace_csv"]
    code, det, _ = run("sim", "detect", "--input", trace)
    assert code == 0 and det["n_dark_periods"] > 10
    code, est, _ = run("sim", "lifetime", "--input", det["artifacts"]["darkperiods_csv"])
    assert code == 0 and est["n"] == det["n_dark_periods"]


def test_sim_run_events_flag(run, tmp_path):
    code, report, _ = run("sim", "run", "--duration", "0.05", "--events")
    assert code == 0
    lines = open(report["artifacts"]["events_csv"]).read().splitlines()
    assert lines[0] == "t,from,to,photon" and len(lines) == report["n_recorded_events"] + 1


def test_sim_run_is_deterministic(run, tmp_path):
    _, a, _ = run("sim", "run", "--duration", "50", "--seed", "3")
    first = open(a["artifacts"]["trace_csv"]).read()
    _, b, _ = run("sim", "run", "--duration", "50", "--seed", "3")
    assert open(b["artifacts"]["trace_csv"]).read() == first


def test_sim_run_custom_system_from_config(run, tmp_path):
    config = {
        "schema_version": "1",
        "duration": 20,
        "system": {
            "levels": ["g", "e"],
            "rates": {"g->e": 100.0, "e->g": 100.0},
            "fluorescent": ["e->g"],
        },
    }
    (tmp_path / "c.json").write_text(json.dumps(config))
    code, report, _ = run("sim", "run", "--config", str(tmp_path / "c.json"))
    assert code == 0 and report["system"]["levels"] == ["g", "e"]
    assert report["n_photons"] == pytest.approx(1000, rel=0.15)


def test_sim_lifetime_mean(run, tmp_path):
    (tmp_path / "dp.csv").write_text("t0,t1\n0,2\n10,14\n20,26\n")
    code, report, _ = run("sim", "lifetime", "--input", str(tmp_path / "dp.csv"))
    assert code == 0 and report["tau_hat"] == 4.0 and report["n"] == 3


def test_sim_lifetime_insufficient(run, tmp_path):
    (tmp_path / "dp.csv").write_text("t0,t1\n0,2\n")
    code, _, err = run("sim", "lifetime", "--input", str(tmp_path / "dp.csv"))
    assert code == 2 and err["error"] == "InsufficientDataError"


def test_config_merging_and_precedence(run, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(
        {"schema_version": "1", "e_r": 2, "gamma": 1, "t": 0.5}))
    code, report, _ = run("resonance", "evolve", "--config", str(tmp_path / "c.json"))
    assert code == 0 and report["t"] == 0.5
    code, report, _ = run("resonance", "evolve", "--config", str(tmp_path / "c.json"), "--t", "1")
    assert code == 0 and report["t"] == 1.0


@pytest.mark.parametrize(
    "config",
    [
        {"schema_version": "1", "bogus": 1},
        {"schema_version": "2", "t": 1},
        {"t": 1},
        {"schema_version": "1", "t": "soon"},
        {"schema_version": "1", "energy_unit": "furlong"},
        [1, 2],
    ],
)
def test_config_validation(run, tmp_path, config):
    (tmp_path / "c.json").write_text(json.dumps(config))
    code, _, err = run("resonance", "evolve", "--e-r", "1", "--gamma", "1",
                       "--config", str(tmp_path / "c.json"))
    assert code == 2 and err["error"] == "SchemaError"


@pytest.mark.parametrize(
    "argv",
    [
        ("hardy",),
        ("nonsense", "cmd"),
        ("hardy", "check"),
        ("hardy", "check", "--input", "x.csv", "--half-plane", "middle"),
        ("resonance", "evolve", "--e-r", "1", "--gamma", "0", "--t", "1"),
        ("sim", "run", "--duration", "-5"),
        ("sim", "detect", "--input", "missing.csv"),
    ],
)
def test_validation_errors_exit_2(run, argv):
    code, _, err = run(*argv)
    assert code == 2
    assert err["category"] == "validation" and err["message"]


def test_parse_error_reports_line(run, tmp_path):
    (tmp_path / "bad.csv").write_text("E,re,im\n0,1,0\n1,oops,0\n")
    code, _, err = run("hardy", "check", "--input", str(tmp_path / "bad.csv"))
    assert code == 2 and err["line"] == 3


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GAMOWKIT_OUTPUT_DIR", str(tmp_path / "envout"))
    code = run_cli(["resonance", "evolve", "--e-r", "1", "--gamma", "1", "--t", "1", "--no-figures"])
    capsys.readouterr()
    assert code == 0 and (tmp_path / "envout" / "resonance_evolve_report.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gamowkit", "resonance", "evolve", "--e-r", "2", "--gamma", "1",
         "--t", "-1", "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 3
    assert json.loads(proc.stderr)["exit_code"] == 3
    assert proc.stdout == ""
