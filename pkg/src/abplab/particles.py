"""Interacting-particle realization of the adaptively biased dynamics.

Particles carry the mean-field coupling through a kernel density
estimate of their own reaction-coordinate marginal: each step smooths
the empirical measure with the same wrapped Gaussian that regularizes
the free energy, evaluates the bias force on a coarse periodic grid,
and applies it to every particle by multilinear interpolation.

Randomness is counter based.  Every step s of a run seeded with S draws
from an independent Philox stream keyed by (S, s), so trajectories are
reproducible bit for bit and never depend on how particles are batched.
Initialization draws use reserved lanes far above any reachable step
index.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .density import GridDensity, distances
from .exceptions import DomainError, ParameterError
from .equilibria import BiasParams, free_energy
from .grids import PeriodicGrid, spectral_derivative, wrap_coordinates
from .kernels import WrappedGaussianKernel, convolve
from .potentials import Potential

# resolution of the grid the bias force is tabulated on before
# interpolation back to particle positions
BIAS_GRID_POINTS = 256

# Philox lanes reserved for initial draws; step lanes count up from 0
_INIT_X_LANE = 1 << 62
_INIT_V_LANE = (1 << 62) + 1

# log floor guarding against denormal KDE cells at very small bandwidth
_LOG_FLOOR = 1e-300


def _stream(seed: int, lane: int) -> np.random.Generator:
    key = np.array([seed, lane], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(eq=False)
class ParticleEnsemble:
    """Positions (and optional velocities) of N exchangeable particles.

    ``seed`` and ``step_count`` determine the noise of every future
    step, so an ensemble value is a complete snapshot of the run state.
    Arrays are frozen after validation; steps return new instances.
    """

    positions: np.ndarray
    velocities: np.ndarray | None = None
    seed: int = 0
    step_count: int = 0

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ParameterError(f"positions must be (N, d) with N >= 1, got {x.shape}")
        if not np.isfinite(x).all():
            raise ParameterError("positions contain non-finite entries")
        x = wrap_coordinates(x)
        x.flags.writeable = False
        self.positions = x
        if self.velocities is not None:
            v = np.asarray(self.velocities, dtype=float)
            if v.shape != x.shape:
                raise ParameterError(
                    f"velocity shape {v.shape} does not match positions {x.shape}"
                )
            if not np.isfinite(v).all():
                raise ParameterError("velocities contain non-finite entries")
            v = v.copy()
            v.flags.writeable = False
            self.velocities = v
        seed = int(self.seed)
        if seed < 0 or seed >= 1 << 63:
            raise ParameterError("seed must lie in [0, 2^63)")
        self.seed = seed
        if self.step_count < 0:
            raise ParameterError("step_count must be nonnegative")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    def advanced(self, positions, velocities=None) -> "ParticleEnsemble":
        """Successor state with the step counter bumped."""
        return ParticleEnsemble(
            positions=positions,
            velocities=velocities,
            seed=self.seed,
            step_count=self.step_count + 1,
        )


def kde_marginal(
    ensemble: ParticleEnsemble, kernel: WrappedGaussianKernel, grid: PeriodicGrid
) -> GridDensity:
    """Wrapped-Gaussian mixture over the leading coordinates, on a grid.

    Computed in Fourier space from the empirical characteristic
    function, which is exact for the band-limited part and drops only
    coefficients the kernel has already damped below 1e-16.  Mass is
    exactly one by construction (the zero mode is untouched).
    """
    if grid.d != kernel.m:
        raise ParameterError("diagnostic grid dimension does not match the kernel")
    if ensemble.d < kernel.m:
        raise ParameterError("ensemble has fewer coordinates than the kernel dimension")
    x = ensemble.positions[:, : kernel.m]
    if kernel.m == 1:
        vals = _kde_values_1d(x[:, 0], kernel, grid.shape[0])
    else:
        vals = _kde_values_2d(x, kernel, grid.shape)
    return GridDensity.from_unnormalized(grid, vals)


def _kde_values_1d(x: np.ndarray, kernel: WrappedGaussianKernel, n: int) -> np.ndarray:
    kmax = min(n // 2, kernel.spectral_cutoff)
    coeff = np.zeros(n // 2 + 1, dtype=complex)
    coeff[0] = 1.0
    z = np.exp(-2j * math.pi * x)
    zk = np.ones_like(z)
    for k in range(1, kmax + 1):
        zk = zk * z
        coeff[k] = zk.mean() * kernel.spectrum(k)
    # grid nodes start at -1/2, which shifts mode k by (-1)^k
    signs = np.where(np.arange(n // 2 + 1) % 2 == 0, 1.0, -1.0)
    return np.fft.irfft(coeff * signs, n) * n


def _kde_values_2d(x: np.ndarray, kernel: WrappedGaussianKernel, shape: tuple) -> np.ndarray:
    n0, n1 = shape
    k0 = np.fft.fftfreq(n0, d=1.0 / n0)
    k1 = np.fft.rfftfreq(n1, d=1.0 / n1)
    p0 = np.exp(-2j * math.pi * np.outer(x[:, 0], k0))
    p1 = np.exp(-2j * math.pi * np.outer(x[:, 1], k1))
    coeff = p0.T @ p1 / x.shape[0]
    coeff *= kernel.spectrum(np.abs(k0))[:, None]
    coeff *= kernel.spectrum(np.abs(k1))[None, :]
    signs0 = np.where(np.abs(k0).astype(int) % 2 == 0, 1.0, -1.0)
    signs1 = np.where(k1.astype(int) % 2 == 0, 1.0, -1.0)
    coeff *= np.outer(signs0, signs1)
    return np.fft.irfft2(coeff, s=shape) * (n0 * n1)


def bias_force(
    ensemble: ParticleEnsemble,
    kernel: WrappedGaussianKernel,
    params: BiasParams,
    grid: PeriodicGrid,
) -> np.ndarray:
    """-(alpha/beta) grad K*log(K*rho1) tabulated on the grid.

    Returns one component per marginal axis, stacked on the leading
    axis.  The mechanical -grad V part is applied separately from the
    potential's own gradient.
    """
    if math.isinf(params.alpha):
        raise ParameterError("bias force is undefined at alpha = inf")
    if params.alpha == 0.0:
        return np.zeros((grid.d,) + grid.shape)
    kde = kde_marginal(ensemble, kernel, grid)
    logs = np.log(np.maximum(kde.values, _LOG_FLOOR))
    b = params.alpha * convolve(kernel, logs)
    comps = [-spectral_derivative(b, ax) / params.beta for ax in range(grid.d)]
    return np.stack(comps)


def interpolate_field(field: np.ndarray, grid: PeriodicGrid, points: np.ndarray) -> np.ndarray:
    """Multilinear periodic interpolation of a grid function at points."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != grid.d:
        raise ParameterError("points dimension does not match the grid")
    idx0, frac = [], []
    for ax in range(grid.d):
        n = grid.shape[ax]
        u = (points[:, ax] + 0.5) * n
        base = np.floor(u)
        idx0.append(base.astype(int) % n)
        frac.append(u - base)
    out = np.zeros(points.shape[0])
    for corner in itertools.product((0, 1), repeat=grid.d):
        weight = np.ones(points.shape[0])
        index = []
        for ax, up in enumerate(corner):
            weight = weight * (frac[ax] if up else 1.0 - frac[ax])
            index.append((idx0[ax] + up) % grid.shape[ax])
        out += weight * field[tuple(index)]
    return out


def _mechanical_force(potential: Potential, positions: np.ndarray) -> np.ndarray:
    if potential.grad_fns is not None:
        return -np.stack([g(positions) for g in potential.grad_fns], axis=-1)
    comps = [
        interpolate_field(gv, potential.grid, positions)
        for gv in potential.gradient_grids()
    ]
    return -np.stack(comps, axis=-1)


def _bias_field(ensemble: ParticleEnsemble, params: BiasParams):
    """Per-step frozen bias force field plus its interpolator, or None."""
    if params.alpha == 0.0:
        return None
    if params.epsilon <= 0.0:
        raise ParameterError("particle bias needs epsilon > 0")
    grid = PeriodicGrid((BIAS_GRID_POINTS,) * params.m, m=params.m)
    force = bias_force(ensemble, params.kernel(), params, grid)

    def add_to(total: np.ndarray, positions: np.ndarray) -> None:
        pts = positions[:, : params.m]
        for ax in range(params.m):
            total[:, ax] += interpolate_field(force[ax], grid, pts)

    return add_to


def _total_force(potential, positions, bias_add) -> np.ndarray:
    force = _mechanical_force(potential, positions)
    if bias_add is not None:
        bias_add(force, positions)
    return force


def overdamped_particle_step(
    ensemble: ParticleEnsemble, potential: Potential, params: BiasParams, dt: float
) -> ParticleEnsemble:
    """Euler-Maruyama step x <- wrap(x - grad W dt + sqrt(2 dt/beta) xi).

    The bias field is computed once from the pre-step ensemble and held
    frozen through the update.
    """
    if not (dt >= 0.0 and math.isfinite(dt)):
        raise ParameterError(f"dt must be nonnegative and finite, got {dt}")
    if potential.grid.d != ensemble.d:
        raise ParameterError("potential dimension does not match the ensemble")
    if dt == 0.0:
        return ensemble
    force = _total_force(potential, ensemble.positions, _bias_field(ensemble, params))
    noise = _stream(ensemble.seed, ensemble.step_count).standard_normal(
        ensemble.positions.shape
    )
    x = ensemble.positions + force * dt + math.sqrt(2.0 * dt / params.beta) * noise
    return ensemble.advanced(x, ensemble.velocities)


def kinetic_particle_step(
    ensemble: ParticleEnsemble,
    potential: Potential,
    params: BiasParams,
    dt: float,
    friction: float = 1.0,
) -> ParticleEnsemble:
    """Symmetric splitting step: half kick, drift, exact OU, drift, half kick.

    The velocity refresh solves the Ornstein-Uhlenbeck substep exactly,
    so the Maxwellian at temperature 1/beta is preserved regardless of
    dt.  The bias field is frozen from the pre-step snapshot; the
    closing kick re-evaluates forces at the updated positions.
    """
    if ensemble.velocities is None:
        raise ParameterError("kinetic step needs velocities")
    if not (dt >= 0.0 and math.isfinite(dt)):
        raise ParameterError(f"dt must be nonnegative and finite, got {dt}")
    if friction <= 0.0:
        raise ParameterError("friction must be positive")
    if potential.grid.d != ensemble.d:
        raise ParameterError("potential dimension does not match the ensemble")
    if dt == 0.0:
        return ensemble
    bias_add = _bias_field(ensemble, params)
    x = ensemble.positions.copy()
    v = ensemble.velocities + 0.5 * dt * _total_force(potential, x, bias_add)
    x = wrap_coordinates(x + 0.5 * dt * v)
    decay = math.exp(-friction * dt)
    noise = _stream(ensemble.seed, ensemble.step_count).standard_normal(x.shape)
    v = decay * v + math.sqrt((1.0 - decay * decay) / params.beta) * noise
    x = wrap_coordinates(x + 0.5 * dt * v)
    v = v + 0.5 * dt * _total_force(potential, x, bias_add)
    return ensemble.advanced(x, v)


def ensemble_diagnostics(
    ensemble: ParticleEnsemble,
    reference: GridDensity,
    potential: Potential,
    params: BiasParams,
) -> dict:
    """Summary record against a grid reference marginal.

    tv_kde: total variation between the KDE marginal and the reference.
    free_energy_est: the biased free energy evaluated on the
    KDE-smoothed full density as a mean-field proxy.
    ess_x1: effective sample size (sum w)^2 / sum w^2 under importance
    weights exp(-bias) read off at the particle positions.
    """
    kernel = params.kernel()
    kde = kde_marginal(ensemble, kernel, reference.grid)
    tv = distances(kde, reference).tv
    if potential.grid.d == params.m:
        proxy = kde if potential.grid.shape == reference.grid.shape else kde_marginal(
            ensemble, kernel, potential.grid
        )
    else:
        full_kernel = WrappedGaussianKernel(params.epsilon, m=potential.grid.d)
        proxy = kde_marginal(ensemble, full_kernel, potential.grid)
    f_est = free_energy(proxy, potential, params)
    if params.alpha > 0.0:
        logs = np.log(np.maximum(kde.values, _LOG_FLOOR))
        b = params.alpha * convolve(kernel, logs)
        b_at = interpolate_field(b, reference.grid, ensemble.positions[:, : params.m])
        w = np.exp(-(b_at - b_at.min()))
    else:
        w = np.ones(ensemble.n_particles)
    ess = float(w.sum() ** 2 / (w * w).sum())
    return {"tv_kde": tv, "free_energy_est": f_est, "ess_x1": ess}


def particle_evolve(
    ensemble: ParticleEnsemble,
    potential: Potential,
    params: BiasParams,
    t_end: float,
    dt: float = 1e-3,
    schedule=None,
    record_every: int = 1,
    friction: float = 1.0,
    target_solver: dict | None = None,
):
    """Advance an ensemble to t_end, recording diagnostics rows.

    Kinetic when velocities are present, overdamped otherwise.  Rows
    compare the running KDE against the smoothed stationary marginal of
    the grid fixed point for the bias active at that instant; the
    envelope column applies the sqrt(t+1)/log(t+2) weight to tv_kde.
    Returns (final_ensemble, trace).
    """
    from .equilibria import fixed_point_solve, smoothed_marginal
    from .schedules import alpha_at, envelope_statistic
    from .trace import PARTICLE_TRACE_COLUMNS, DiagnosticsTrace
    from .exceptions import FlowAborted, NumericsError, StepSizeError

    if t_end < 0.0:
        raise ParameterError("t_end must be nonnegative")
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    record_every = int(record_every)
    if record_every < 1:
        raise ParameterError("record_every must be at least 1")
    kinetic = ensemble.velocities is not None
    solver_kwargs = dict(target_solver or {})
    cache: dict = {"alpha": None, "reference": None}

    def params_at(t: float) -> BiasParams:
        a = alpha_at(schedule, t) if schedule is not None else params.alpha
        return BiasParams(a, params.beta, params.epsilon, params.m)

    def reference_for(p: BiasParams) -> GridDensity:
        if cache["alpha"] != p.alpha or cache["reference"] is None:
            rho_star, report = fixed_point_solve(potential, p, **solver_kwargs)
            if not report.converged:
                raise NumericsError(
                    f"target solve stalled at alpha={p.alpha}: residual "
                    f"{report.final_residual_sup:.3e}"
                )
            cache["alpha"] = p.alpha
            cache["reference"] = smoothed_marginal(rho_star, p)
        return cache["reference"]

    trace = DiagnosticsTrace(PARTICLE_TRACE_COLUMNS)

    def record(state: ParticleEnsemble, t: float) -> None:
        p = params_at(t)
        diag = ensemble_diagnostics(state, reference_for(p), potential, p)
        trace.append({
            "t": t,
            "alpha": p.alpha,
            "free_energy": diag["free_energy_est"],
            "tv_kde": diag["tv_kde"],
            "ess_x1": diag["ess_x1"],
            "envelope": float(envelope_statistic(t, diag["tv_kde"])),
        })

    state = ensemble
    try:
        record(state, 0.0)
    except (StepSizeError, NumericsError, DomainError) as exc:
        raise FlowAborted(
            f"particle flow aborted at t = 0: {exc}",
            state=state, trace=trace, cause=exc,
        ) from exc
    if t_end == 0.0:
        return state, trace
    n_steps = max(1, math.ceil(t_end / dt - 1e-12))
    for step in range(1, n_steps + 1):
        t_prev = (step - 1) * dt
        dt_now = min(dt, t_end - t_prev)
        try:
            p_now = params_at(t_prev)
            if kinetic:
                state = kinetic_particle_step(state, potential, p_now, dt_now, friction)
            else:
                state = overdamped_particle_step(state, potential, p_now, dt_now)
            if step % record_every == 0 or step == n_steps:
                record(state, min(step * dt, t_end))
        except (StepSizeError, NumericsError, DomainError) as exc:
            raise FlowAborted(
                f"particle flow aborted at t = {t_prev:.6g}: {exc}",
                state=state, trace=trace, cause=exc,
            ) from exc
    return state, trace


def sample_from_density(rho: GridDensity, n_particles: int, seed: int) -> ParticleEnsemble:
    """Draw positions from a one-dimensional grid density by inverting
    its piecewise-linear CDF (cells are centered on the grid nodes)."""
    if rho.grid.d != 1:
        raise ParameterError("inverse-CDF sampling is one-dimensional")
    if n_particles < 1:
        raise ParameterError("need at least one particle")
    n = rho.grid.shape[0]
    h = 1.0 / n
    mass = rho.values * h
    edges = np.cumsum(mass)
    total = edges[-1]
    if total <= 0.0:
        raise DomainError("density has no mass to sample")
    edges = edges / total
    u = _stream(seed, _INIT_X_LANE).random(n_particles)
    cells = np.searchsorted(edges, u, side="right")
    cells = np.minimum(cells, n - 1)
    left = np.where(cells > 0, edges[cells - 1], 0.0)
    width = edges[cells] - left
    frac = np.where(width > 0.0, (u - left) / np.maximum(width, 1e-300), 0.5)
    x = (-0.5 + cells * h - 0.5 * h) + frac * h
    return ParticleEnsemble(positions=x[:, None], seed=seed)


def uniform_ensemble(n_particles: int, d: int, seed: int) -> ParticleEnsemble:
    """Positions drawn uniformly on the torus from the init lane."""
    if n_particles < 1 or d < 1:
        raise ParameterError("need at least one particle and one dimension")
    x = _stream(seed, _INIT_X_LANE).random((n_particles, d)) - 0.5
    return ParticleEnsemble(positions=x, seed=seed)


def maxwell_velocities(n_particles: int, d: int, beta: float, seed: int) -> np.ndarray:
    """Velocity draw from the Maxwellian at temperature 1/beta."""
    if beta <= 0.0:
        raise ParameterError("beta must be positive")
    g = _stream(seed, _INIT_V_LANE)
    return g.standard_normal((n_particles, d)) / math.sqrt(beta)


def save_snapshot(path, ensemble: ParticleEnsemble) -> None:
    """Write particle state as CSV: index, positions, then velocities."""
    d = ensemble.d
    cols = ["index"] + [f"x{i + 1}" for i in range(d)]
    if ensemble.velocities is not None:
        cols += [f"v{i + 1}" for i in range(d)]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(ensemble.n_particles):
            row = [str(i)]
            row += [repr(float(c)) for c in ensemble.positions[i]]
            if ensemble.velocities is not None:
                row += [repr(float(c)) for c in ensemble.velocities[i]]
            fh.write(",".join(row) + "\n")


def load_snapshot(path, seed: int, step_count: int = 0) -> ParticleEnsemble:
    """Read a snapshot written by save_snapshot."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    d = sum(1 for c in header if c.startswith("x"))
    has_v = any(c.startswith("v") for c in header)
    if d < 1 or header[0] != "index":
        raise ParameterError("not a particle snapshot file")
    data = np.array([[float(c) for c in row[1:]] for row in rows])
    positions = data[:, :d]
    velocities = data[:, d : 2 * d] if has_v else None
    return ParticleEnsemble(
        positions=positions, velocities=velocities, seed=seed, step_count=step_count
    )
