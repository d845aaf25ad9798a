"""Experiment configuration parsing and run summaries.

Configs are TOML: one file, a handful of sections, every key validated
before any computation starts and unknown keys rejected by name.  Run
summaries serialize to JSON with sorted keys so reruns produce
byte-identical files; wall-clock timings stay in memory (and on the
terminal) because they are the one thing a rerun cannot reproduce.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .density import GridDensity, load_grid_values
from .exceptions import ConfigError
from .equilibria import BiasParams
from .grids import PeriodicGrid
from .potentials import (
    Potential,
    cosine_1d,
    coupled_2d,
    double_well_1d,
    smoothed_cosine_1d,
)
from .schedules import AlphaSchedule

INTEGRATORS = (
    "grid-overdamped",
    "grid-kinetic",
    "particles-overdamped",
    "particles-kinetic",
)
OUTPUT_FORMATS = ("csv", "json")
SWEEP_AXES = ("epsilon", "alpha")


class _Section:
    """Tracks which keys of a raw mapping have been consumed."""

    def __init__(self, name: str, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError(f"section '{name}' must be a table")
        self.name = name
        self.raw = raw
        self.seen = set()

    def take(self, key, default=None, required=False, kind=None):
        self.seen.add(key)
        if key not in self.raw:
            if required:
                raise ConfigError(f"missing required key '{self.name}.{key}'")
            return default
        value = self.raw[key]
        if kind is not None and not isinstance(value, kind):
            if kind is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            else:
                raise ConfigError(
                    f"key '{self.name}.{key}' has type {type(value).__name__}"
                )
        return value

    def finish(self):
        extra = sorted(set(self.raw) - self.seen)
        if extra:
            raise ConfigError(f"unknown key '{self.name}.{extra[0]}'")


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_iter: int = 10000
    damping: float | None = None


@dataclass(frozen=True)
class DynamicsSettings:
    dt: float | None = None
    t_end: float = 1.0
    record_every: int = 1
    integrator: str = "grid-overdamped"
    friction: float = 1.0
    n_velocity: int = 64
    v_max: float | None = None


@dataclass(frozen=True)
class ParticleSettings:
    n: int = 10000
    seed: int | None = None


@dataclass(frozen=True)
class ToySettings:
    sigma0_sq: float = 1.0
    alpha: float = 1.0
    epsilon: float = 1e-2
    epsilon_grid: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    alpha_grid: tuple = (1.0, 4.0, 16.0, 64.0, 256.0, 1024.0)


@dataclass(frozen=True)
class SweepSettings:
    axis: str
    values: tuple


@dataclass
class ExperimentConfig:
    """Validated contents of a single experiment file."""

    problem: dict
    params: BiasParams
    solver: SolverSettings
    dynamics: DynamicsSettings
    schedule: AlphaSchedule | None
    particles: ParticleSettings
    toy: ToySettings
    sweep: SweepSettings | None
    output_dir: str
    formats: tuple
    raw_text: str
    parsed: dict

    def build_potential(self) -> Potential:
        return _build_potential(self.problem, self.params)

    def build_schedule(self) -> AlphaSchedule:
        if self.schedule is not None:
            return self.schedule
        return AlphaSchedule.constant(self.params.alpha)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_config(text: str) -> ExperimentConfig:
    try:
        parsed = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc

    top = _Section("config", parsed)

    problem = _parse_problem(_Section("problem", top.take("problem", {}, kind=dict)))
    params = _parse_params(_Section("params", top.take("params", {}, kind=dict)))
    solver = _parse_solver(_Section("solver", top.take("solver", {}, kind=dict)))
    dynamics = _parse_dynamics(_Section("dynamics", top.take("dynamics", {}, kind=dict)))
    schedule = _parse_schedule(
        _Section("schedule", top.take("schedule", {}, kind=dict)), params
    )
    particles = _parse_particles(
        _Section("particles", top.take("particles", {}, kind=dict))
    )
    toy = _parse_toy(_Section("toy", top.take("toy", {}, kind=dict)))
    sweep_raw = top.take("sweep", None)
    sweep = _parse_sweep(_Section("sweep", sweep_raw)) if sweep_raw is not None else None
    out = _Section("output", top.take("output", {}, kind=dict))
    output_dir = out.take("directory", "runs", kind=str)
    formats = tuple(out.take("formats", list(OUTPUT_FORMATS), kind=list))
    for fmt in formats:
        if fmt not in OUTPUT_FORMATS:
            raise ConfigError(f"unknown output format '{fmt}'")
    out.finish()
    top.finish()

    if dynamics.integrator.startswith("particles") and particles.seed is None:
        raise ConfigError("missing required key 'particles.seed' for particle runs")

    return ExperimentConfig(
        problem=problem,
        params=params,
        solver=solver,
        dynamics=dynamics,
        schedule=schedule,
        particles=particles,
        toy=toy,
        sweep=sweep,
        output_dir=output_dir,
        formats=formats,
        raw_text=text,
        parsed=parsed,
    )


def _parse_problem(sec: _Section) -> dict:
    name = sec.take("name", None, kind=str)
    file_path = sec.take("file", None, kind=str)
    if name is not None and file_path is not None:
        raise ConfigError("problem.name and problem.file are mutually exclusive")
    out = {}
    if file_path is not None:
        out["file"] = file_path
        out["m"] = int(sec.take("m", 1, kind=int))
    else:
        if name is None:
            name = "cosine-1d"
        if name in ("cosine-1d", "double-well-1d"):
            out = {"name": name, "c": float(sec.take("c", 1.0, kind=float))}
        elif name == "coupled-2d":
            out = {
                "name": name,
                "c1": float(sec.take("c1", 1.0, kind=float)),
                "c2": float(sec.take("c2", 1.0, kind=float)),
                "c3": float(sec.take("c3", 1.0, kind=float)),
            }
        elif name == "smoothed-cosine-1d":
            out = {
                "name": name,
                "b": float(sec.take("b", 1.0, kind=float)),
                "epsilon": float(sec.take("epsilon", 0.05, kind=float)),
            }
        else:
            raise ConfigError(f"unknown potential '{name}' in problem.name")
        out["points"] = sec.take("points", None)
    sec.finish()
    return out


def _build_potential(problem: dict, params: BiasParams) -> Potential:
    if "file" in problem:
        values = load_grid_values(problem["file"])
        grid = PeriodicGrid(values.shape, m=problem["m"])
        return Potential(grid, values, name="tabulated")
    name = problem["name"]
    points = problem.get("points")
    if name == "cosine-1d":
        return cosine_1d(c=problem["c"], points=points or 256)
    if name == "double-well-1d":
        return double_well_1d(c=problem["c"], points=points or 256)
    if name == "coupled-2d":
        return coupled_2d(
            c1=problem["c1"],
            c2=problem["c2"],
            c3=problem["c3"],
            points=tuple(points) if points else (128, 128),
        )
    if name == "smoothed-cosine-1d":
        return smoothed_cosine_1d(
            b=problem["b"], epsilon=problem["epsilon"], points=points or 256
        )
    raise ConfigError(f"unknown potential '{name}'")


def _parse_params(sec: _Section) -> BiasParams:
    alpha = sec.take("alpha", 1.0)
    if isinstance(alpha, str):
        if alpha != "inf":
            raise ConfigError("params.alpha accepts a number or the string 'inf'")
        alpha = math.inf
    params = BiasParams(
        alpha=float(alpha),
        beta=float(sec.take("beta", 1.0, kind=float)),
        epsilon=float(sec.take("epsilon", 1e-2, kind=float)),
        m=int(sec.take("m", 1, kind=int)),
    )
    sec.finish()
    return params


def _parse_solver(sec: _Section) -> SolverSettings:
    damping = sec.take("damping", None)
    settings = SolverSettings(
        tol=float(sec.take("tol", 1e-10, kind=float)),
        max_iter=int(sec.take("max_iter", 10000, kind=int)),
        damping=None if damping is None else float(damping),
    )
    sec.finish()
    if settings.tol <= 0.0:
        raise ConfigError("solver.tol must be positive")
    if settings.max_iter < 1:
        raise ConfigError("solver.max_iter must be at least 1")
    if settings.damping is not None and not (0.0 < settings.damping <= 1.0):
        raise ConfigError("solver.damping must lie in (0, 1]")
    return settings


def _parse_dynamics(sec: _Section) -> DynamicsSettings:
    dt = sec.take("dt", None)
    v_max = sec.take("v_max", None)
    settings = DynamicsSettings(
        dt=None if dt is None else float(dt),
        t_end=float(sec.take("t_end", 1.0, kind=float)),
        record_every=int(sec.take("record_every", 1, kind=int)),
        integrator=sec.take("integrator", "grid-overdamped", kind=str),
        friction=float(sec.take("friction", 1.0, kind=float)),
        n_velocity=int(sec.take("n_velocity", 64, kind=int)),
        v_max=None if v_max is None else float(v_max),
    )
    sec.finish()
    if settings.integrator not in INTEGRATORS:
        raise ConfigError(f"unknown integrator '{settings.integrator}'")
    if settings.dt is not None and settings.dt <= 0.0:
        raise ConfigError("dynamics.dt must be positive when given")
    if settings.t_end < 0.0:
        raise ConfigError("dynamics.t_end must be nonnegative")
    if settings.record_every < 1:
        raise ConfigError("dynamics.record_every must be at least 1")
    if settings.friction <= 0.0:
        raise ConfigError("dynamics.friction must be positive")
    return settings


def _parse_schedule(sec: _Section, params: BiasParams) -> AlphaSchedule | None:
    if not sec.raw:
        sec.finish()
        return None
    kind = sec.take("kind", "constant", kind=str)
    if kind == "constant":
        alpha = float(sec.take("alpha", params.alpha, kind=float))
        sec.finish()
        return AlphaSchedule.constant(alpha)
    if kind == "logarithmic":
        a_coef = float(sec.take("a_coef", 0.5 * params.epsilon, kind=float))
        b_offset = float(sec.take("b_offset", 1.0, kind=float))
        sec.finish()
        return AlphaSchedule.logarithmic(a_coef, b_offset)
    raise ConfigError(f"unknown schedule kind '{kind}'")


def _parse_particles(sec: _Section) -> ParticleSettings:
    seed = sec.take("seed", None)
    settings = ParticleSettings(
        n=int(sec.take("n", 10000, kind=int)),
        seed=None if seed is None else int(seed),
    )
    sec.finish()
    if settings.n < 1:
        raise ConfigError("particles.n must be at least 1")
    if settings.seed is not None and settings.seed < 0:
        raise ConfigError("particles.seed must be nonnegative")
    return settings


def _parse_toy(sec: _Section) -> ToySettings:
    settings = ToySettings(
        sigma0_sq=float(sec.take("sigma0_sq", 1.0, kind=float)),
        alpha=float(sec.take("alpha", 1.0, kind=float)),
        epsilon=float(sec.take("epsilon", 1e-2, kind=float)),
        epsilon_grid=tuple(
            float(v)
            for v in sec.take("epsilon_grid", list(ToySettings.epsilon_grid), kind=list)
        ),
        alpha_grid=tuple(
            float(v)
            for v in sec.take("alpha_grid", list(ToySettings.alpha_grid), kind=list)
        ),
    )
    sec.finish()
    if settings.sigma0_sq <= 0.0:
        raise ConfigError("toy.sigma0_sq must be positive")
    if settings.alpha < 0.0:
        raise ConfigError("toy.alpha must be nonnegative")
    if settings.epsilon < 0.0:
        raise ConfigError("toy.epsilon must be nonnegative")
    return settings


def _parse_sweep(sec: _Section) -> SweepSettings:
    axis = sec.take("axis", required=True, kind=str)
    values = sec.take("values", required=True, kind=list)
    sec.finish()
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got '{axis}'")
    values = tuple(float(v) for v in values)
    if not values:
        raise ConfigError("sweep.values must be nonempty")
    if any(v <= 0.0 for v in values):
        raise ConfigError("sweep.values must be positive")
    if list(values) != sorted(values):
        raise ConfigError("sweep.values must be sorted ascending")
    return SweepSettings(axis=axis, values=values)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


@dataclass
class RunSummary:
    """Everything a run wants to say about itself.

    ``checks`` is a list of named pass/fail records, each carrying the
    tolerance it was judged against.  ``timings`` is kept out of the
    serialized form so identical configs reproduce identical files.
    """

    config: dict
    diagnostics: dict = field(default_factory=dict)
    rate_fits: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add_check(self, name: str, passed: bool, tolerance, observed) -> None:
        self.checks.append(
            {
                "name": name,
                "passed": bool(passed),
                "tolerance": tolerance,
                "observed": observed,
            }
        )

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        body = {
            "config": self.config,
            "diagnostics": self.diagnostics,
            "rate_fits": self.rate_fits,
            "checks": self.checks,
            "all_passed": self.all_passed,
        }
        return json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n"

    def timing_lines(self) -> list:
        return [f"{name}: {seconds:.3f} s" for name, seconds in self.timings.items()]
