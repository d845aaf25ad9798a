"""Deterministic grid integrators for the biased Fokker-Planck flows.

Overdamped: exponential time differencing in Fourier space.  Diffusion
is integrated exactly by the heat multiplier; the nonlinear drift enters
through the phi1 weight, which makes the solved fixed point an exact
stationary state of the discrete update (no O(dt) stationarity bias).

Kinetic (d = 1): the phase-space density is conjugated by the local
Gibbs state, nu = nu_eq * h, and h is advanced by splitting: exact
spectral transport in x, finite differences for the velocity drift and
diffusion.  Every substep fixes constant h, so nu_eq itself is exactly
stationary on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import (
    GridDensity,
    distances,
    entropy,
    fisher_information,
    relative_entropy,
)
from .exceptions import (
    DomainError,
    FlowAborted,
    NumericsError,
    ParameterError,
    StepSizeError,
    TruncationError,
)
from .equilibria import (
    BiasParams,
    bias_potential,
    expand_profile,
    fixed_point_solve,
    free_energy,
    local_equilibrium,
    smoothed_marginal,
)
from .grids import PeriodicGrid, spectral_derivative, spectral_gradient, squared_wavenumbers
from .potentials import Potential
from .schedules import AlphaSchedule, alpha_at, envelope_statistic
from .trace import GRID_TRACE_COLUMNS, DiagnosticsTrace

# clipped negative mass above this aborts the step
NEGATIVE_TOL = 1e-10
# pre-renormalization mass drift above this signals blow-up; transient
# kinetic steps legitimately drift O(dt dv^2) before renormalization,
# so this is a divergence guard, not an accuracy contract
MASS_DRIFT_TOL = 1e-3
# floor for the conjugating Gibbs state (guards 0/0 in far tails)
EQ_FLOOR = 1e-30

KINETIC_MASS_TOL = 1e-9
BOUNDARY_REL_TOL = 1e-10


@dataclass(frozen=True)
class OverdampedState:
    rho: GridDensity
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0.0 or not math.isfinite(self.t):
            raise ParameterError(f"time must be finite and nonnegative, got {self.t}")


def mechanical_potential(rho: GridDensity, potential: Potential, params: BiasParams) -> np.ndarray:
    """W = V + (alpha/beta) K*log(K*rho1) on the potential's grid.

    rho may live on the full grid or directly on the marginal grid.
    """
    if params.alpha == 0.0:
        return potential.values
    bias = bias_potential(rho, params) / params.beta
    return potential.values + expand_profile(bias, potential.grid.shape)


def default_overdamped_dt(state: OverdampedState, potential: Potential, params: BiasParams) -> float:
    """Advective CFL guess 0.1 h / sup|grad W|."""
    w = mechanical_potential(state.rho, potential, params)
    gradsq = np.zeros(state.rho.grid.shape)
    for g in spectral_gradient(w, state.rho.grid):
        gradsq += g * g
    gmax = math.sqrt(float(gradsq.max()))
    h = min(state.rho.grid.spacing)
    return 0.1 * h / (gmax + 1e-12)


def _etd_factors(grid: PeriodicGrid, dt: float, beta: float):
    z = -4.0 * math.pi ** 2 * squared_wavenumbers(grid) * dt / beta
    growth = np.exp(z)
    phi1 = np.ones_like(z)
    nz = z != 0.0
    phi1[nz] = np.expm1(z[nz]) / z[nz]
    return growth, phi1


def _overdamped_advance(rho: GridDensity, potential: Potential, params: BiasParams,
                        dt: float, factors=None):
    grid = rho.grid
    if potential.grid.shape != grid.shape:
        raise ParameterError("potential and state grids differ")
    w = mechanical_potential(rho, potential, params)
    div = np.zeros(grid.shape)
    for ax, gw in enumerate(spectral_gradient(w, grid)):
        div += spectral_derivative(rho.values * gw, ax)
    if factors is None:
        factors = _etd_factors(grid, dt, params.beta)
    growth, phi1 = factors
    new_hat = growth * np.fft.fftn(rho.values) + dt * phi1 * np.fft.fftn(div)
    vals = np.fft.ifftn(new_hat).real
    floor = float(vals.min())
    if floor < -NEGATIVE_TOL:
        raise StepSizeError(f"density reached {floor:.3e}; reduce dt")
    clip_defect = 0.0
    if floor < 0.0:
        clip_defect = -float(vals[vals < 0.0].sum()) * grid.cell_volume
        vals = np.clip(vals, 0.0, None)
    mass = float(vals.sum()) * grid.cell_volume
    mass_defect = abs(mass - 1.0)
    if mass_defect > MASS_DRIFT_TOL:
        raise StepSizeError(f"mass drifted by {mass_defect:.3e}; reduce dt")
    return GridDensity(grid, vals / mass), mass_defect, clip_defect


def overdamped_step(state: OverdampedState, potential: Potential, params: BiasParams,
                    dt: float) -> OverdampedState:
    if dt < 0.0:
        raise ParameterError("dt must be nonnegative")
    if dt == 0.0:
        return state
    rho, _, _ = _overdamped_advance(state.rho, potential, params, dt)
    return OverdampedState(rho, state.t + dt)


def dissipation_identity_check(states, potential: Potential, params: BiasParams) -> float:
    """Max over consecutive pairs of |dF/dt + Fisher(rho, Gamma(rho))/beta|.

    Forward difference against the left endpoint, so the defect is
    first order in dt and halves when dt does.
    """
    if len(states) < 2:
        raise ParameterError("need at least two states")
    ts = np.array([s.t for s in states])
    dts = np.diff(ts)
    if dts.min() <= 0.0 or dts.max() - dts.min() > 1e-9 * dts.max():
        raise ParameterError("states must be uniformly spaced in time")
    f_vals = [free_energy(s.rho, potential, params) for s in states]
    worst = 0.0
    for i in range(len(states) - 1):
        rho = states[i].rho
        fisher = fisher_information(rho, local_equilibrium(rho, potential, params))
        defect = abs((f_vals[i + 1] - f_vals[i]) / dts[i] + fisher / params.beta)
        worst = max(worst, defect)
    return worst


@dataclass(frozen=True)
class KineticState:
    """Phase-space density on T^1 x [-v_max, v_max].

    values[i, j] is the density at x_i and the cell-centered velocity
    v_j = -v_max + (j + 1/2) dv.  Boundary rows must stay below 1e-10
    of the peak, which keeps the velocity truncation invisible.
    """

    grid: PeriodicGrid
    values: np.ndarray
    v_max: float
    t: float = 0.0

    def __post_init__(self):
        if self.grid.d != 1:
            raise ParameterError("kinetic states are one-dimensional in x")
        if not (self.v_max > 0.0 and math.isfinite(self.v_max)):
            raise ParameterError(f"v_max must be positive, got {self.v_max}")
        if self.t < 0.0 or not math.isfinite(self.t):
            raise ParameterError(f"time must be finite and nonnegative, got {self.t}")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != self.grid.shape[0]:
            raise ParameterError("values must have shape (n_x, n_v)")
        if vals.shape[1] < 8:
            raise ParameterError("need at least 8 velocity cells")
        if float(vals.min()) < 0.0:
            raise DomainError(f"negative phase-space density {vals.min():.3e}")
        mass = float(vals.sum()) * self.cell_of(vals.shape[1])
        if abs(mass - 1.0) > KINETIC_MASS_TOL:
            raise DomainError(f"phase-space mass {mass} is not 1 within {KINETIC_MASS_TOL}")
        peak = float(vals.max())
        boundary = max(float(vals[:, 0].max()), float(vals[:, -1].max()))
        if boundary > BOUNDARY_REL_TOL * peak:
            raise TruncationError(
                f"boundary density {boundary:.3e} exceeds {BOUNDARY_REL_TOL} of peak "
                f"{peak:.3e}; enlarge v_max"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def cell_of(self, n_v: int) -> float:
        return self.grid.cell_volume * (2.0 * self.v_max / n_v)

    @property
    def n_v(self) -> int:
        return self.values.shape[1]

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.n_v

    @property
    def v_axis(self) -> np.ndarray:
        return -self.v_max + (np.arange(self.n_v) + 0.5) * self.dv

    @property
    def cell(self) -> float:
        return self.grid.cell_volume * self.dv

    def mass(self) -> float:
        return float(self.values.sum()) * self.cell

    def x_marginal(self) -> GridDensity:
        return GridDensity.from_unnormalized(self.grid, self.values.sum(axis=1) * self.dv)

    def velocity_profile(self) -> np.ndarray:
        """Velocity marginal density on the cell-centered v axis."""
        return self.values.sum(axis=0) * self.grid.cell_volume


def default_v_max(beta: float) -> float:
    """Eight thermal widths: the Maxwell tail there is ~1e-14 of peak,
    comfortably under the boundary invariant."""
    return 8.0 / math.sqrt(beta)


def kinetic_equilibrium(potential: Potential, params: BiasParams,
                        marginal: GridDensity | None = None,
                        n_v: int = 64, v_max: float | None = None,
                        t: float = 0.0) -> KineticState:
    """Gibbs phase-space state exp(-beta(W + v^2/2))/Z, with W biased by
    the given marginal (no bias when it is omitted)."""
    if potential.grid.d != 1:
        raise ParameterError("kinetic states are one-dimensional in x")
    if v_max is None:
        v_max = default_v_max(params.beta)
    if marginal is None or params.alpha == 0.0:
        w = potential.values
    else:
        w = mechanical_potential(marginal, potential, params)
    dv = 2.0 * v_max / n_v
    v = -v_max + (np.arange(n_v) + 0.5) * dv
    vals = np.exp(-params.beta * (w[:, None] - w.min() + 0.5 * v[None, :] ** 2))
    vals /= vals.sum() * potential.grid.cell_volume * dv
    return KineticState(potential.grid, vals, v_max, t)


def default_kinetic_dt(state: KineticState, potential: Potential, params: BiasParams,
                       friction: float = 1.0) -> float:
    w = mechanical_potential(state.x_marginal(), potential, params)
    a_max = float(np.abs(spectral_derivative(w, 0)).max()) + friction * state.v_max
    diff = friction / params.beta
    dv = state.dv
    return 0.4 * min(dv / a_max, dv * dv / (2.0 * diff), 2.0 * diff / a_max ** 2)


def _kinetic_advance(state: KineticState, potential: Potential, params: BiasParams,
                     dt: float, friction: float = 1.0):
    if potential.grid.shape != state.grid.shape:
        raise ParameterError("potential and state grids differ")
    marg = state.x_marginal()
    w = mechanical_potential(marg, potential, params)
    grad_w = spectral_derivative(w, 0)
    v = state.v_axis
    dv = state.dv

    eq = np.exp(-params.beta * (w[:, None] - w.min() + 0.5 * v[None, :] ** 2))
    eq /= eq.sum() * state.cell
    eq = np.maximum(eq, EQ_FLOOR)
    h = state.values / eq

    # exact transport: h(x, v) <- h(x - v dt, v)
    k = state.grid.wavenumbers(0).astype(float)
    phase = np.exp(-2j * np.pi * dt * np.outer(k, v))
    h = np.fft.ifft(np.fft.fft(h, axis=0) * phase, axis=0).real

    # velocity drift (grad W - friction v) and diffusion friction/beta,
    # centered stencils, one-sided at the truncation boundary
    adv = grad_w[:, None] - friction * v[None, :]
    dv_h = np.empty_like(h)
    dv_h[:, 1:-1] = (h[:, 2:] - h[:, :-2]) / (2.0 * dv)
    dv_h[:, 0] = (h[:, 1] - h[:, 0]) / dv
    dv_h[:, -1] = (h[:, -1] - h[:, -2]) / dv
    lap_h = np.empty_like(h)
    lap_h[:, 1:-1] = (h[:, 2:] - 2.0 * h[:, 1:-1] + h[:, :-2]) / (dv * dv)
    lap_h[:, 0] = (h[:, 1] - h[:, 0]) / (dv * dv)
    lap_h[:, -1] = (h[:, -2] - h[:, -1]) / (dv * dv)
    h = h + dt * (adv * dv_h + (friction / params.beta) * lap_h)

    nu = eq * h
    floor = float(nu.min())
    clip_defect = 0.0
    if floor < 0.0:
        clip_defect = -float(nu[nu < 0.0].sum()) * state.cell
        if clip_defect > NEGATIVE_TOL:
            raise StepSizeError(f"clipped mass {clip_defect:.3e}; reduce dt")
        nu = np.clip(nu, 0.0, None)
    mass = float(nu.sum()) * state.cell
    mass_defect = abs(mass - 1.0)
    if mass_defect > MASS_DRIFT_TOL:
        raise StepSizeError(f"mass drifted by {mass_defect:.3e}; reduce dt")
    new_state = KineticState(state.grid, nu / mass, state.v_max, state.t + dt)
    return new_state, mass_defect, clip_defect


def kinetic_step(state: KineticState, potential: Potential, params: BiasParams,
                 dt: float, friction: float = 1.0) -> KineticState:
    if dt < 0.0:
        raise ParameterError("dt must be nonnegative")
    if dt == 0.0:
        return state
    return _kinetic_advance(state, potential, params, dt, friction)[0]


def extended_free_energy(state: KineticState, potential: Potential, params: BiasParams) -> float:
    """F plus the kinetic energy term, in units of 1/beta."""
    if math.isinf(params.alpha):
        raise ParameterError("free energy is undefined at alpha = inf")
    nu = state.values
    ent = np.zeros_like(nu)
    pos = nu > 0.0
    ent[pos] = nu[pos] * np.log(nu[pos])
    mech = potential.values[:, None] + 0.5 * state.v_axis[None, :] ** 2
    value = float((ent + params.beta * mech * nu).sum()) * state.cell
    if params.alpha > 0.0:
        value += params.alpha * entropy(smoothed_marginal(state.x_marginal(), params))
    return value


def evolve(initial, potential: Potential, params: BiasParams, t_end: float,
           dt: float | None = None, schedule: AlphaSchedule | None = None,
           record_every: int = 1, target_solver: dict | None = None,
           friction: float = 1.0):
    """Advance a grid state to t_end, recording diagnostics rows.

    Returns (final_state, trace).  Rows are recorded at t = 0, every
    record_every-th step, and at the final step.  Each row compares the
    current x-density against the solved fixed point for the bias
    active at that instant (warm-started across records).  The sandwich
    triple and Fisher information always refer to the x-marginal, which
    keeps them meaningful for both flows.
    """
    if t_end < 0.0:
        raise ParameterError("t_end must be nonnegative")
    record_every = int(record_every)
    if record_every < 1:
        raise ParameterError("record_every must be at least 1")
    kinetic = isinstance(initial, KineticState)
    if not kinetic and not isinstance(initial, OverdampedState):
        raise ParameterError("initial must be an OverdampedState or KineticState")
    solver_kwargs = dict(target_solver or {})
    cache: dict = {"alpha": None, "target": None, "f_target": None}

    def params_at(t: float) -> BiasParams:
        a = alpha_at(schedule, t) if schedule is not None else params.alpha
        return BiasParams(a, params.beta, params.epsilon, params.m)

    def target_for(p: BiasParams) -> GridDensity:
        if cache["alpha"] != p.alpha or cache["target"] is None:
            rho_star, report = fixed_point_solve(
                potential, p, init=cache["target"], **solver_kwargs
            )
            if not report.converged:
                raise NumericsError(
                    f"target solve stalled at alpha={p.alpha}: residual "
                    f"{report.final_residual_sup:.3e}"
                )
            cache["alpha"] = p.alpha
            cache["target"] = rho_star
            cache["f_target"] = free_energy(rho_star, potential, p)
        return cache["target"]

    trace = DiagnosticsTrace(GRID_TRACE_COLUMNS)

    def record(state, mass_defect: float, clip_defect: float) -> None:
        p = params_at(state.t)
        target = target_for(p)
        q = state.x_marginal() if kinetic else state.rho
        f_x = free_energy(q, potential, p)
        f_value = extended_free_energy(state, potential, p) if kinetic else f_x
        gamma_q = local_equilibrium(q, potential, p)
        middle = f_x - cache["f_target"]
        try:
            fisher = fisher_information(q, gamma_q)
        except DomainError:
            fisher = math.nan
        trace.append({
            "t": state.t,
            "alpha": p.alpha,
            "free_energy": f_value,
            "sandwich_lower": relative_entropy(q, target),
            "sandwich_middle": middle,
            "sandwich_upper": relative_entropy(q, gamma_q),
            "fisher": fisher,
            "tv_to_target": distances(q, target).tv,
            "envelope": float(envelope_statistic(state.t, middle)),
            "mass_defect": mass_defect,
            "clip_defect": clip_defect,
        })

    state = initial
    try:
        record(state, 0.0, 0.0)
    except (StepSizeError, NumericsError, TruncationError, DomainError) as exc:
        raise FlowAborted(
            f"flow aborted at t = {state.t:.6g}: {exc}",
            state=state, trace=trace, cause=exc,
        ) from exc
    if t_end == 0.0:
        return state, trace

    # accumulated roundoff in state.t grows with the step count; the margin
    # must exceed it or the loop appends a spurious sub-ulp final step
    eps_t = 1e-9 * max(1.0, t_end)
    etd_cache = None
    mass_acc = 0.0
    clip_acc = 0.0
    step_index = 0
    while state.t < t_end - eps_t:
        try:
            p_now = params_at(state.t)
            if dt is None:
                dt_now = (default_kinetic_dt(state, potential, p_now, friction)
                          if kinetic else default_overdamped_dt(state, potential, p_now))
            else:
                dt_now = dt
            dt_now = min(dt_now, t_end - state.t)
            if kinetic:
                state, md, cd = _kinetic_advance(state, potential, p_now, dt_now, friction)
            else:
                if etd_cache is None or etd_cache[0] != dt_now:
                    etd_cache = (dt_now, _etd_factors(state.rho.grid, dt_now, params.beta))
                rho, md, cd = _overdamped_advance(
                    state.rho, potential, p_now, dt_now, factors=etd_cache[1]
                )
                state = OverdampedState(rho, state.t + dt_now)
            mass_acc = max(mass_acc, md)
            clip_acc = max(clip_acc, cd)
            step_index += 1
            if step_index % record_every == 0 or state.t >= t_end - eps_t:
                record(state, mass_acc, clip_acc)
                mass_acc = 0.0
                clip_acc = 0.0
        except (StepSizeError, NumericsError, TruncationError, DomainError) as exc:
            raise FlowAborted(
                f"flow aborted at t = {state.t:.6g}: {exc}",
                state=state, trace=trace, cause=exc,
            ) from exc
    return state, trace
