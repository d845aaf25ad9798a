"""Config parsing: defaults, validation, and run-summary serialization."""

import json
import math

import numpy as np
import pytest

from abplab import (
    AlphaSchedule,
    alpha_at,
    ConfigError,
    RunSummary,
    load_config,
    parse_config,
    save_grid_values,
)
from abplab.config import INTEGRATORS, OUTPUT_FORMATS, SWEEP_AXES


FULL_TOML = """
[problem]
name = "double-well-1d"
c = 2.5
points = 512

[params]
alpha = 4.0
beta = 2.0
epsilon = 0.05
m = 1

[solver]
tol = 1e-9
max_iter = 500
damping = 0.3

[dynamics]
dt = 1e-3
t_end = 0.25
record_every = 10
integrator = "grid-kinetic"
friction = 2.0
n_velocity = 32
v_max = 5.0

[schedule]
kind = "logarithmic"
a_coef = 0.2
b_offset = 0.7

[particles]
n = 500
seed = 7

[toy]
sigma0_sq = 2.0
alpha = 0.9
epsilon = 0.5

[sweep]
axis = "epsilon"
values = [1e-3, 1e-2, 1e-1]

[output]
directory = "out"
formats = ["json"]
"""


def test_defaults_from_empty_config():
    cfg = parse_config("")
    assert cfg.problem == {"name": "cosine-1d", "c": 1.0, "points": None}
    assert cfg.params.alpha == 1.0
    assert cfg.params.beta == 1.0
    assert cfg.params.epsilon == 1e-2
    assert cfg.params.m == 1
    assert cfg.solver.tol == 1e-10
    assert cfg.solver.max_iter == 10000
    assert cfg.solver.damping is None
    assert cfg.dynamics.dt is None
    assert cfg.dynamics.t_end == 1.0
    assert cfg.dynamics.record_every == 1
    assert cfg.dynamics.integrator == "grid-overdamped"
    assert cfg.schedule is None
    assert cfg.particles.n == 10000
    assert cfg.particles.seed is None
    assert cfg.sweep is None
    assert cfg.output_dir == "runs"
    assert cfg.formats == tuple(OUTPUT_FORMATS)
    assert cfg.raw_text == ""


def test_full_config_round_trip():
    cfg = parse_config(FULL_TOML)
    assert cfg.problem["name"] == "double-well-1d"
    assert cfg.problem["c"] == 2.5
    assert cfg.problem["points"] == 512
    assert cfg.params.alpha == 4.0
    assert cfg.params.beta == 2.0
    assert cfg.solver.damping == 0.3
    assert cfg.dynamics.integrator == "grid-kinetic"
    assert cfg.dynamics.n_velocity == 32
    assert cfg.dynamics.v_max == 5.0
    assert cfg.particles.seed == 7
    assert cfg.toy.sigma0_sq == 2.0
    assert cfg.sweep.axis == "epsilon"
    assert cfg.sweep.values == (1e-3, 1e-2, 1e-1)
    assert cfg.output_dir == "out"
    assert cfg.formats == ("json",)
    assert cfg.raw_text == FULL_TOML
    sched = cfg.build_schedule()
    assert abs(alpha_at(sched, 0.0) - 0.7) < 1e-15


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(FULL_TOML)
    cfg = load_config(path)
    assert cfg.params.epsilon == 0.05


def test_invalid_toml_reported():
    with pytest.raises(ConfigError, match="not valid TOML"):
        parse_config("params = [unclosed")


def test_unknown_key_named_by_section():
    with pytest.raises(ConfigError, match="unknown key 'params.gamma'"):
        parse_config("[params]\ngamma = 1.0\n")
    with pytest.raises(ConfigError, match="unknown key 'config.prams'"):
        parse_config("[prams]\nalpha = 1.0\n")
    # only the alphabetically first extra is named
    with pytest.raises(ConfigError, match="unknown key 'solver.aaa'"):
        parse_config("[solver]\nzzz = 1\naaa = 2\n")


def test_wrong_value_type_reported():
    with pytest.raises(ConfigError, match="'solver.tol' has type str"):
        parse_config('[solver]\ntol = "tiny"\n')
    # booleans are ints in python but not acceptable as floats
    with pytest.raises(ConfigError, match="'solver.tol' has type bool"):
        parse_config("[solver]\ntol = true\n")
    with pytest.raises(ConfigError, match="'config.problem' has type int"):
        parse_config("problem = 5\n")
    with pytest.raises(ConfigError, match="section 'sweep' must be a table"):
        parse_config("sweep = 5\n")


def test_alpha_accepts_inf_string():
    cfg = parse_config('[params]\nalpha = "inf"\n')
    assert math.isinf(cfg.params.alpha)
    with pytest.raises(ConfigError, match="alpha accepts a number or the string"):
        parse_config('[params]\nalpha = "huge"\n')


def test_problem_name_and_file_exclusive(tmp_path):
    with pytest.raises(ConfigError, match="mutually exclusive"):
        parse_config('[problem]\nname = "cosine-1d"\nfile = "v.csv"\n')


def test_unknown_potential_rejected():
    with pytest.raises(ConfigError, match="unknown potential 'triple-well'"):
        parse_config('[problem]\nname = "triple-well"\n')


def test_builtin_potentials_buildable():
    cfg = parse_config('[problem]\nname = "coupled-2d"\nc1 = 0.4\nc2 = 0.7\nc3 = 0.2\n')
    pot = cfg.build_potential()
    assert pot.grid.shape == (128, 128)
    cfg = parse_config('[problem]\nname = "smoothed-cosine-1d"\nb = 2.0\npoints = 64\n')
    pot = cfg.build_potential()
    assert pot.grid.shape == (64,)
    # smoothing shrinks the amplitude below b
    assert 0.0 < pot.values.max() < 2.0


def test_file_potential_round_trip(tmp_path):
    grid_n = 64
    x = np.arange(grid_n) / grid_n
    values = np.cos(2.0 * np.pi * x) + 0.3 * np.sin(4.0 * np.pi * x)
    path = tmp_path / "v.csv"
    save_grid_values(path, values)
    cfg = parse_config(f'[problem]\nfile = "{path}"\n')
    pot = cfg.build_potential()
    assert pot.grid.shape == (grid_n,)
    np.testing.assert_array_equal(pot.values, values)


def test_unknown_integrator_and_format():
    with pytest.raises(ConfigError, match="unknown integrator 'leapfrog'"):
        parse_config('[dynamics]\nintegrator = "leapfrog"\n')
    with pytest.raises(ConfigError, match="unknown output format 'hdf5'"):
        parse_config('[output]\nformats = ["hdf5"]\n')
    assert "grid-overdamped" in INTEGRATORS
    assert set(OUTPUT_FORMATS) == {"csv", "json"}


def test_particle_runs_need_a_seed():
    with pytest.raises(ConfigError, match="missing required key 'particles.seed'"):
        parse_config('[dynamics]\nintegrator = "particles-overdamped"\n')
    # grid runs do not
    parse_config('[dynamics]\nintegrator = "grid-overdamped"\n')
    cfg = parse_config(
        '[dynamics]\nintegrator = "particles-kinetic"\n[particles]\nseed = 0\n'
    )
    assert cfg.particles.seed == 0


def test_schedule_defaults_follow_params():
    # constant schedule defaults to params.alpha
    cfg = parse_config('[params]\nalpha = 3.0\n[schedule]\nkind = "constant"\n')
    assert alpha_at(cfg.schedule, 17.0) == 3.0
    # logarithmic defaults: a_coef = epsilon / 2, b_offset = 1
    cfg = parse_config('[params]\nepsilon = 0.2\n[schedule]\nkind = "logarithmic"\n')
    t = math.e - 1.0
    assert abs(alpha_at(cfg.schedule, t) - 1.1) < 1e-12
    with pytest.raises(ConfigError, match="unknown schedule kind 'geometric'"):
        parse_config('[schedule]\nkind = "geometric"\n')


def test_build_schedule_without_section():
    cfg = parse_config('[params]\nalpha = 2.0\n')
    assert cfg.schedule is None
    sched = cfg.build_schedule()
    assert isinstance(sched, AlphaSchedule)
    assert alpha_at(sched, 5.0) == 2.0


def test_solver_bounds_checked():
    with pytest.raises(ConfigError, match="solver.tol must be positive"):
        parse_config("[solver]\ntol = 0.0\n")
    with pytest.raises(ConfigError, match="max_iter must be at least 1"):
        parse_config("[solver]\nmax_iter = 0\n")
    with pytest.raises(ConfigError, match="damping must lie in"):
        parse_config("[solver]\ndamping = 1.5\n")


def test_dynamics_bounds_checked():
    with pytest.raises(ConfigError, match="dt must be positive"):
        parse_config("[dynamics]\ndt = -1e-3\n")
    with pytest.raises(ConfigError, match="t_end must be nonnegative"):
        parse_config("[dynamics]\nt_end = -1.0\n")
    with pytest.raises(ConfigError, match="record_every must be at least 1"):
        parse_config("[dynamics]\nrecord_every = 0\n")
    with pytest.raises(ConfigError, match="friction must be positive"):
        parse_config("[dynamics]\nfriction = 0.0\n")


def test_sweep_validation():
    assert set(SWEEP_AXES) == {"epsilon", "alpha"}
    with pytest.raises(ConfigError, match="missing required key 'sweep.axis'"):
        parse_config("[sweep]\nvalues = [1.0]\n")
    with pytest.raises(ConfigError, match="sweep.axis must be one of"):
        parse_config('[sweep]\naxis = "beta"\nvalues = [1.0]\n')
    with pytest.raises(ConfigError, match="values must be nonempty"):
        parse_config('[sweep]\naxis = "alpha"\nvalues = []\n')
    with pytest.raises(ConfigError, match="values must be positive"):
        parse_config('[sweep]\naxis = "alpha"\nvalues = [0.0, 1.0]\n')
    with pytest.raises(ConfigError, match="values must be sorted ascending"):
        parse_config('[sweep]\naxis = "alpha"\nvalues = [2.0, 1.0]\n')


def test_summary_json_is_deterministic_and_sorted():
    summary = RunSummary(config={"b": 1, "a": 2})
    summary.diagnostics["free_energy"] = np.float64(0.25)
    summary.rate_fits["decay"] = {"slope": -1.5, "r_squared": 0.999}
    summary.add_check("mass", True, 1e-12, np.float64(3e-13))
    summary.timings["solve"] = 1.234
    text = summary.to_json()
    again = summary.to_json()
    assert text == again
    assert text.endswith("\n")
    body = json.loads(text)
    # timings never reach the serialized form
    assert "timings" not in body
    assert body["all_passed"] is True
    assert body["checks"][0] == {
        "name": "mass",
        "passed": True,
        "tolerance": 1e-12,
        "observed": 3e-13,
    }
    # keys come out sorted at every level
    assert list(body) == sorted(body)
    assert text.index('"a"') < text.index('"b"')


def test_summary_json_handles_nonfinite():
    summary = RunSummary(config={})
    summary.diagnostics["alpha"] = math.inf
    summary.diagnostics["gap"] = float("nan")
    summary.diagnostics["drop"] = -math.inf
    body = json.loads(summary.to_json())
    assert body["diagnostics"] == {"alpha": "inf", "gap": "nan", "drop": "-inf"}


def test_summary_all_passed_tracks_checks():
    summary = RunSummary(config={})
    assert summary.all_passed
    summary.add_check("good", True, 1e-9, 1e-10)
    summary.add_check("bad", False, 1e-9, 1e-2)
    assert not summary.all_passed
    assert [c["passed"] for c in summary.checks] == [True, False]
