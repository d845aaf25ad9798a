"""End-to-end runner tests: each subcommand exercised in process."""

import json
import os

import numpy as np
import pytest

from abplab.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


def write_config(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


FIXED_POINT_TOML = """
[problem]
name = "cosine-1d"
c = 0.5
points = 64

[params]
alpha = 0.0
beta = 1.0
epsilon = 1e-2
"""


def test_fixed_point_writes_run_directory(tmp_path, capsys):
    cfg = write_config(tmp_path, FIXED_POINT_TOML)
    out = tmp_path / "run"
    code = run_cli("fixed-point", "--config", cfg, "--out", out)
    assert code == 0
    assert (out / "config.echo").read_text() == FIXED_POINT_TOML
    assert (out / "rho_star.csv").exists()
    summary = read_summary(out)
    assert summary["all_passed"] is True
    # alpha = 0 decouples the map, so one sweep of the iteration suffices
    assert summary["diagnostics"]["solver"]["iterations"] == 1
    assert summary["diagnostics"]["solver"]["converged"] is True
    assert "free_energy" in summary["diagnostics"]
    assert "timings" not in summary
    captured = capsys.readouterr()
    assert "[pass] fixed_point_converged" in captured.out
    assert f"outputs in {out}" in captured.out


def test_fixed_point_reruns_byte_identical(tmp_path):
    cfg = write_config(tmp_path, FIXED_POINT_TOML)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_cli("fixed-point", "--config", cfg, "--out", out_a) == 0
    assert run_cli("fixed-point", "--config", cfg, "--out", out_b) == 0
    for name in ("summary.json", "rho_star.csv", "config.echo"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_output_dir_from_config(tmp_path):
    run_dir = tmp_path / "from_config"
    text = FIXED_POINT_TOML + f'\n[output]\ndirectory = "{run_dir}"\n'
    cfg = write_config(tmp_path, text)
    assert run_cli("fixed-point", "--config", cfg) == 0
    assert (run_dir / "summary.json").exists()


SWEEP_TOML = """
[problem]
name = "cosine-1d"
c = 0.5
points = 64

[params]
alpha = 0.5

[sweep]
axis = "epsilon"
values = [1e-3, 1e-2, 1e-1]
"""


def test_sweep_epsilon_fits_slope(tmp_path):
    cfg = write_config(tmp_path, SWEEP_TOML)
    out = tmp_path / "sweep"
    assert run_cli("sweep", "--config", cfg, "--out", out) == 0
    header = (out / "table.csv").read_text().splitlines()[0]
    assert header == "value,sup,h1,tv,iterations,converged"
    for i in range(3):
        assert (out / f"point_{i:02d}" / "rho_star.csv").exists()
    summary = read_summary(out)
    assert summary["diagnostics"]["points_completed"] == 3
    # distance to the zero-smoothing profile shrinks roughly linearly in epsilon
    for key in ("log_log_sup", "log_log_h1"):
        fit = summary["rate_fits"][key]
        assert 0.5 < fit["slope"] < 1.3
        assert fit["r_squared"] > 0.95


def test_sweep_single_point_skips_fit(tmp_path):
    text = SWEEP_TOML.replace("values = [1e-3, 1e-2, 1e-1]", "values = [1e-2]")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "sweep1"
    assert run_cli("sweep", "--config", cfg, "--out", out) == 0
    summary = read_summary(out)
    assert summary["rate_fits"] == {}
    assert summary["diagnostics"]["points_completed"] == 1


def test_sweep_alpha_axis(tmp_path):
    text = """
[problem]
name = "smoothed-cosine-1d"
b = 1.0
epsilon = 0.05
points = 64

[params]
epsilon = 0.05

[sweep]
axis = "alpha"
values = [4.0, 8.0, 16.0]
"""
    cfg = write_config(tmp_path, text)
    out = tmp_path / "asweep"
    assert run_cli("sweep", "--config", cfg, "--out", out) == 0
    header = (out / "table.csv").read_text().splitlines()[0]
    assert header == "value,entropy_gap,iterations,converged"
    summary = read_summary(out)
    fit = summary["rate_fits"]["log_log_entropy_gap"]
    # stronger bias flattens the marginal, so the gap decays with alpha
    assert fit["slope"] < -0.4


EVOLVE_TOML = """
[problem]
name = "cosine-1d"
c = 1.0
points = 64

[params]
alpha = 0.5
beta = 1.0
epsilon = 1e-2

[dynamics]
dt = 1e-3
t_end = 0.02
record_every = 5
"""


def test_evolve_grid_run(tmp_path, capsys):
    cfg = write_config(tmp_path, EVOLVE_TOML)
    out = tmp_path / "evolve"
    code = run_cli("evolve", "--config", cfg, "--out", out)
    assert code == 0
    assert (out / "density.csv").exists()
    trace_lines = (out / "trace.csv").read_text().splitlines()
    assert trace_lines[0].startswith("t,")
    summary = read_summary(out)
    assert summary["diagnostics"]["rows_recorded"] == 5
    assert summary["diagnostics"]["t_final"] == pytest.approx(0.02)
    assert summary["diagnostics"]["sandwich_max_violation"] <= 1e-9
    names = {c["name"]: c["passed"] for c in summary["checks"]}
    assert names == {"sandwich_ordering": True, "completed": True}
    captured = capsys.readouterr()
    assert "[pass] completed" in captured.out


def test_evolve_grid_kinetic_writes_phase_density(tmp_path):
    text = EVOLVE_TOML + '\nintegrator = "grid-kinetic"\nn_velocity = 32\n'
    cfg = write_config(tmp_path, text)
    out = tmp_path / "kin"
    assert run_cli("evolve", "--config", cfg, "--out", out) == 0
    phase = np.loadtxt(out / "phase_density.csv", skiprows=1)
    assert phase.size == 64 * 32
    assert (out / "density.csv").exists()


PARTICLE_TOML = """
[problem]
name = "cosine-1d"
c = 1.0
points = 64

[params]
alpha = 0.5
beta = 1.0
epsilon = 1e-2

[dynamics]
dt = 1e-3
t_end = 0.01
record_every = 5
integrator = "particles-overdamped"

[particles]
n = 200
seed = 3
"""


def test_evolve_particles_deterministic(tmp_path):
    cfg = write_config(tmp_path, PARTICLE_TOML)
    out_a, out_b = tmp_path / "pa", tmp_path / "pb"
    assert run_cli("evolve", "--config", cfg, "--out", out_a) == 0
    assert run_cli("evolve", "--config", cfg, "--out", out_b) == 0
    for name in ("trace.csv", "snapshot.csv", "density.csv", "summary.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_seed_override_changes_run_and_summary(tmp_path):
    cfg = write_config(tmp_path, PARTICLE_TOML)
    base, other = tmp_path / "base", tmp_path / "other"
    assert run_cli("evolve", "--config", cfg, "--out", base) == 0
    assert run_cli("evolve", "--config", cfg, "--out", other, "--seed", 4) == 0
    assert (base / "trace.csv").read_bytes() != (other / "trace.csv").read_bytes()
    # the summary records the seed that actually ran; the echo stays raw
    assert read_summary(other)["config"]["particles"]["seed"] == 4
    assert (other / "config.echo").read_text() == PARTICLE_TOML


def test_evolve_abort_persists_state(tmp_path, capsys):
    # a target solver capped at 2 sweeps stalls on a strongly biased problem
    text = PARTICLE_TOML.replace("alpha = 0.5", "alpha = 6.0")
    text += "\n[solver]\nmax_iter = 2\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "abort"
    code = run_cli("evolve", "--config", cfg, "--out", out)
    assert code == 1
    summary = read_summary(out)
    names = {c["name"]: c["passed"] for c in summary["checks"]}
    assert names["completed"] is False
    assert "abort_reason" in summary["diagnostics"]
    assert (out / "snapshot.csv").exists()
    assert (out / "trace.csv").exists()
    captured = capsys.readouterr()
    assert "[FAIL] completed" in captured.out


TOY_TOML = """
[toy]
sigma0_sq = 1.0
alpha = 0.9
epsilon = 0.5
"""


def test_toy_tables(tmp_path):
    cfg = write_config(tmp_path, TOY_TOML)
    out = tmp_path / "toy"
    assert run_cli("toy", "--config", cfg, "--out", out) == 0
    summary = read_summary(out)
    assert summary["all_passed"] is True
    assert summary["diagnostics"]["iteration"]["converged"] is True
    eps_table = (out / "toy_epsilon_table.csv").read_text().splitlines()
    assert eps_table[0] == "epsilon,sigma_sq,ratio_to_limit"
    # vanishing smoothing approaches the flat-bias limit (alpha + 1) sigma0^2
    last = eps_table[-1].split(",")
    assert float(last[0]) == 1e-6
    assert abs(float(last[2]) - 1.0) < 1e-4
    alpha_table = (out / "toy_alpha_table.csv").read_text().splitlines()
    assert alpha_table[0] == "alpha,sigma_sq,ratio_to_limit"
    assert len(alpha_table) == 7


def test_report_digests_run(tmp_path, capsys):
    cfg = write_config(tmp_path, EVOLVE_TOML)
    out = tmp_path / "run"
    assert run_cli("evolve", "--config", cfg, "--out", out) == 0
    capsys.readouterr()
    assert run_cli("report", "--out", out) == 0
    captured = capsys.readouterr()
    assert f"run directory: {out}" in captured.out
    assert "[pass] completed" in captured.out
    assert "trace: 5 rows" in captured.out


def test_report_missing_directory(tmp_path, capsys):
    code = run_cli("report", "--out", tmp_path / "nowhere")
    assert code == 2
    captured = capsys.readouterr()
    assert "report needs --out pointing at a run directory" in captured.err


def test_report_propagates_failure(tmp_path, capsys):
    text = PARTICLE_TOML.replace("alpha = 0.5", "alpha = 6.0")
    text += "\n[solver]\nmax_iter = 2\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "bad"
    assert run_cli("evolve", "--config", cfg, "--out", out) == 1
    capsys.readouterr()
    assert run_cli("report", "--out", out) == 1
    assert "[FAIL] completed" in capsys.readouterr().out


def test_malformed_config_exits_two(tmp_path, capsys):
    cfg = write_config(tmp_path, "[params]\ngamma = 1.0\n")
    code = run_cli("fixed-point", "--config", cfg, "--out", tmp_path / "x")
    assert code == 2
    captured = capsys.readouterr()
    assert "config error: unknown key 'params.gamma'" in captured.err
    code = run_cli("fixed-point", "--config", tmp_path / "missing.toml")
    assert code == 2
    assert "FileNotFoundError" in capsys.readouterr().err


def test_threads_flag_caps_blas_pools(tmp_path):
    saved = {
        var: os.environ.get(var)
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
    }
    try:
        cfg = write_config(tmp_path, TOY_TOML)
        assert run_cli("toy", "--config", cfg, "--out", tmp_path / "t", "--threads", 1) == 0
        for var in saved:
            assert os.environ[var] == "1"
    finally:
        for var, value in saved.items():
            if value is None:
                os.environ.pop(var, None)
            else:
                os.environ[var] = value
