"""Bias-strength schedules, the comparison ODE, and rate diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, FitError, ParameterError


@dataclass(frozen=True)
class AlphaSchedule:
    """Time profile for the bias strength.

    kind "constant" holds alpha fixed; kind "logarithmic" uses
    alpha(t) = a_coef * ln(t+1) + b_offset, the growth for which the
    envelope bound ln(t+1)/sqrt(t+1) on the free-energy gap holds.
    """

    kind: str
    alpha: float = 0.0
    a_coef: float = 0.0
    b_offset: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "logarithmic"):
            raise ParameterError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, alpha: float) -> "AlphaSchedule":
        return cls(kind="constant", alpha=alpha)

    @classmethod
    def logarithmic(cls, a_coef: float, b_offset: float = 1.0) -> "AlphaSchedule":
        return cls(kind="logarithmic", a_coef=a_coef, b_offset=b_offset)


def alpha_at(schedule: AlphaSchedule, t: float) -> float:
    if t < 0.0:
        raise ParameterError(f"schedule evaluated at negative time {t}")
    if schedule.kind == "constant":
        value = schedule.alpha
    else:
        value = schedule.a_coef * math.log(t + 1.0) + schedule.b_offset
    if value < 0.0:
        raise DomainError(f"schedule produced negative alpha {value} at t = {t}")
    return value


def envelope_statistic(t, value):
    """value * sqrt(t+1) / ln(t+2); bounded iff value = O(ln(t+1)/sqrt(t+1))
    up to the constant shift inside the logarithm."""
    t = np.asarray(t, dtype=float)
    return value * np.sqrt(t + 1.0) / np.log(t + 2.0)


def burn_in_time(t_end: float) -> float:
    """First 10% of the run or t = 1, whichever is larger."""
    return max(0.1 * t_end, 1.0)


@dataclass(frozen=True)
class OdeComparison:
    t: np.ndarray
    f: np.ndarray
    envelope_sup: float


def ode_comparison_solve(
    c1: float, c2: float, f0: float, t_end: float, dt: float = 1e-2
) -> OdeComparison:
    """RK4 solve of f' = -c1/sqrt(t+1) f + c2/(t+1) on [0, t_end].

    The right-hand side is the scalar comparison inequality behind the
    moving-schedule decay bound; the returned envelope_sup records
    sup_t f(t) sqrt(t+1)/ln(t+2) along the trace.
    """
    if c1 < 0.0 or c2 < 0.0:
        raise ParameterError("comparison ODE needs c1, c2 >= 0")
    if f0 < 0.0:
        raise ParameterError("comparison ODE needs f0 >= 0")
    if t_end < 0.0 or dt <= 0.0:
        raise ParameterError("need t_end >= 0 and dt > 0")
    # accuracy-limited, not stiffness-limited
    dt = min(dt, 1e-2)
    n_steps = max(0, int(math.ceil(t_end / dt - 1e-12)))

    def rhs(t, f):
        return -c1 / math.sqrt(t + 1.0) * f + c2 / (t + 1.0)

    ts = [0.0]
    fs = [float(f0)]
    t, f = 0.0, float(f0)
    for i in range(n_steps):
        h = min(dt, t_end - t)
        k1 = rhs(t, f)
        k2 = rhs(t + 0.5 * h, f + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, f + 0.5 * h * k2)
        k4 = rhs(t + h, f + h * k3)
        f = f + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
        ts.append(t)
        fs.append(f)
    ts = np.array(ts)
    fs = np.array(fs)
    env = float(envelope_statistic(ts, fs).max())
    return OdeComparison(t=ts, f=fs, envelope_sup=env)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
        }


def fit_exponential_rate(ts, values, window=None) -> RateFit:
    """Least squares of ln(value) against t over a time window.

    Raises FitError when the window holds nonpositive values or fewer
    than two points.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.shape != values.shape or ts.ndim != 1:
        raise ParameterError("need matching 1d time and value arrays")
    if window is None:
        window = (float(ts.min()), float(ts.max())) if ts.size else (0.0, 0.0)
    lo, hi = float(window[0]), float(window[1])
    mask = (ts >= lo) & (ts <= hi)
    if mask.sum() < 2:
        raise FitError(f"window [{lo}, {hi}] holds fewer than two samples")
    t_w = ts[mask]
    v_w = values[mask]
    if np.any(v_w <= 0.0):
        raise FitError("nonpositive values in fit window")
    y = np.log(v_w)
    slope, intercept = np.polyfit(t_w, y, 1)
    resid = y - (slope * t_w + intercept)
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    r_squared = min(1.0, max(0.0, r_squared))
    return RateFit(slope=float(slope), intercept=float(intercept),
                   r_squared=r_squared, window=(lo, hi))


def holley_stroock_bound(base_constant: float, psi: np.ndarray) -> float:
    """Log-Sobolev constant under a bounded potential perturbation psi:
    D -> D * exp(-osc(psi)) with osc = sup - inf."""
    if base_constant <= 0.0:
        raise ParameterError("base constant must be positive")
    psi = np.asarray(psi, dtype=float)
    if psi.size == 0 or not np.all(np.isfinite(psi)):
        raise ParameterError("perturbation must be finite and nonempty")
    osc = float(psi.max() - psi.min())
    return base_constant * math.exp(-osc)
