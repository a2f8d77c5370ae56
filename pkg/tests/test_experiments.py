"""Tests for the command-line interface: exit codes, output files,
byte-level determinism, sweep parallel invariance, and the phase diagram."""

import json
import os

import numpy as np
import pytest

from oscpurity.cli import main, parse_sweep_spec, phase_diagram, run_sweep
from oscpurity.errors import ConfigError
from oscpurity.presets import PRESET_NAMES, REGIME_POINTS

FAST_CONFIG = """
omega_s = 1.0
omega_e = 2.0
psi = 0.9
t0 = 3.0
tau = 0.5
profile = smooth
"""

SWEEP_SPEC = """
omega_s = 1.0
omega_e = 2.0
psi = 0.9
t0 = 1.0
tau = 1.0
profile = smooth
param = tau
grid = log
min = 2.0
max = 6.0
count = 4
reduction = latetime_purity
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(FAST_CONFIG)
    return str(path)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


def test_simulate_success_and_outputs(config_file, tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", config_file, "--out", out, "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["schema"] == 1
    assert 0.0 < summary["gamma_min"] < 1.0
    assert set(summary) >= {"gamma_min", "gamma_inf", "regime", "omega1_abs", "g_p"}
    assert os.path.exists(os.path.join(out, "trajectory.csv"))
    with open(os.path.join(out, "summary.json")) as f:
        assert json.load(f)["gamma_min"] == summary["gamma_min"]


def test_missing_config_is_config_error(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "nope.cfg")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("omega_e = 2\nt0 = 1\n")  # no coupling amplitude
    assert main(["simulate", "--config", str(path)]) == 2


def test_bad_arguments_exit_2(capsys):
    assert main(["simulate"]) == 2  # --config required
    assert main(["no-such-command"]) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    # The slow-switching expansion refuses supercritical profiles.
    path = tmp_path / "super.cfg"
    path.write_text("omega_e = 2\npsi = 1.5\nt0 = 3\ntau = 0.5\n")
    rc = main(["adiabatic", "--config", str(path), "--out", str(tmp_path)])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------


def test_simulate_csv_is_byte_identical(config_file, tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert main(["simulate", "--config", config_file, "--out", out_a]) == 0
    assert main(["simulate", "--config", config_file, "--out", out_b]) == 0
    assert read_bytes(os.path.join(out_a, "trajectory.csv")) == read_bytes(
        os.path.join(out_b, "trajectory.csv")
    )


def test_sweep_output_independent_of_workers(tmp_path):
    p, cfg, grid, reduction, _ = parse_sweep_spec(SWEEP_SPEC)
    serial = run_sweep(p, cfg, grid, reduction, workers=1)
    parallel = run_sweep(p, cfg, grid, reduction, workers=2)
    assert np.array_equal(serial["value"], parallel["value"])
    assert np.array_equal(serial["tau_over_t0"], parallel["tau_over_t0"])


def test_sweep_cli_writes_csv(tmp_path, capsys):
    spec = tmp_path / "sweep.cfg"
    spec.write_text(SWEEP_SPEC)
    out = str(tmp_path / "sw")
    assert main(["sweep", "--spec", str(spec), "--out", out, "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["kind"] == "latetime_purity"
    assert summary["points"] == 4
    rows = read_bytes(os.path.join(out, "sweep.csv")).decode().splitlines()
    assert rows[0] == "tau_over_t0,gamma_inf"
    assert len(rows) == 5


# ---------------------------------------------------------------------------
# Sweep spec validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "mutation",
    [
        ("param = tau", "param = psi"),  # unsupported sweep parameter
        ("reduction = latetime_purity", "reduction = bogus"),
        ("min = 2.0", "min = -1.0"),
        ("count = 4", "count = 0"),
        ("grid = log", "grid = cubic"),
        ("max = 6.0", ""),  # missing required key
    ],
)
def test_sweep_spec_rejections(mutation):
    old, new = mutation
    with pytest.raises(ConfigError):
        parse_sweep_spec(SWEEP_SPEC.replace(old, new))


def test_sweep_spec_duplicate_key():
    with pytest.raises(ConfigError):
        parse_sweep_spec(SWEEP_SPEC + "\ncount = 7\n")


def test_sweep_grid_kinds():
    _, _, log_grid, _, _ = parse_sweep_spec(SWEEP_SPEC)
    assert np.allclose(np.diff(np.log(log_grid)), np.log(log_grid[1] / log_grid[0]))
    _, _, lin_grid, _, _ = parse_sweep_spec(
        SWEEP_SPEC.replace("grid = log", "grid = linear")
    )
    assert np.allclose(np.diff(lin_grid), lin_grid[1] - lin_grid[0])


# ---------------------------------------------------------------------------
# Other subcommands
# ---------------------------------------------------------------------------


def test_isoso_subcommand_with_expansion(tmp_path, capsys):
    t0, w, psi = REGIME_POINTS["U2a"]
    path = tmp_path / "u2a.cfg"
    path.write_text(
        "omega_s = 1\nomega_e = %r\npsi = %r\nt0 = %r\nprofile = isoso\n"
        % (1.0 / w, psi, t0)
    )
    out = str(tmp_path / "iso")
    rc = main(
        ["isoso", "--config", str(path), "--out", out, "--expansion", "U2a", "--json"]
    )
    assert rc == 0
    rows = read_bytes(os.path.join(out, "isoso.csv")).decode().splitlines()
    assert rows[0] == "t,purity_analytic,purity_expansion"
    assert len(rows) == 2002


def test_perturb_subcommand(config_file, tmp_path, capsys):
    path = tmp_path / "weak.cfg"
    path.write_text("omega_e = 2\npsi = 0.05\nt0 = 3\ntau = 0.5\n")
    out = str(tmp_path / "pt")
    assert main(["perturb", "--config", str(path), "--out", out, "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["gamma_min"] < 1.0
    assert os.path.exists(os.path.join(out, "perturb.csv"))


def test_adiabatic_subcommand_orders(tmp_path, capsys):
    path = tmp_path / "slow.cfg"
    path.write_text("omega_e = 2\npsi = 0.9\nt0 = 1\ntau = 4\n")
    out = str(tmp_path / "ad")
    assert main(["adiabatic", "--config", str(path), "--out", out, "--order", "1"]) == 0
    rows = read_bytes(os.path.join(out, "adiabatic.csv")).decode().splitlines()
    assert rows[0] == "t,purity_lo,delta_nlo"


def test_markov_subcommand(config_file, tmp_path, capsys):
    out = str(tmp_path / "mk")
    rc = main(
        [
            "markov",
            "--config",
            config_file,
            "--out",
            out,
            "--surrogate",
            "drop-negative",
            "--json",
        ]
    )
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["surrogate"] == "drop-negative"
    assert 0.0 <= summary["cp_fraction"] <= 1.0
    rows = read_bytes(os.path.join(out, "markov.csv")).decode().splitlines()
    assert rows[0].startswith("t,purity,lambda_minus")


# ---------------------------------------------------------------------------
# Phase diagram
# ---------------------------------------------------------------------------


def test_phase_diagram_symmetric_point():
    rows = phase_diagram(np.array([1.0]), np.array([1.0]))
    assert len(rows) == 1
    assert rows[0]["g_p"] == pytest.approx(0.5)
    assert rows[0]["near_critical"]


def test_phase_diagram_rejects_w_above_one():
    with pytest.raises(ConfigError):
        phase_diagram(np.array([1.5]), np.array([0.5]))


def test_phase_diagram_labels_regime_points():
    # Each labelled study point must classify to its own regime family.
    for case, (_, w, psi) in REGIME_POINTS.items():
        rows = phase_diagram(np.array([w]), np.array([psi]))
        family = case[0]
        assert rows[0]["label"].startswith(family), (case, rows[0]["label"])


def test_phase_diagram_cli(tmp_path, capsys):
    out = str(tmp_path / "pd")
    rc = main(
        ["phase-diagram", "--w", "0.1:0.9:3", "--psi", "0.1:10:4", "--out", out, "--json"]
    )
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["cells"] == 12
    rows = read_bytes(os.path.join(out, "phase_diagram.csv")).decode().splitlines()
    assert rows[0] == "w,psi,label,perturbative,g_p,near_critical"
    assert len(rows) == 13


def test_phase_diagram_bad_grid(capsys):
    assert main(["phase-diagram", "--w", "0.1:0.9", "--psi", "1:2:2"]) == 2


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def test_unknown_preset_is_config_error(capsys):
    assert main(["preset", "no-such-figure"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_preset_names_registry():
    assert len(PRESET_NAMES) == 15
    assert "fig2" in PRESET_NAMES and "fig14c" in PRESET_NAMES


def test_fast_preset_runs(tmp_path, capsys):
    out = str(tmp_path / "fig5")
    assert main(["preset", "fig5", "--out", out, "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["preset"] == "fig5"
    assert os.path.exists(os.path.join(out, "fig5_summary.json"))
