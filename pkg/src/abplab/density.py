"""Probability densities on periodic grids and information functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ParameterError
from .grids import PeriodicGrid, integrate, spectral_gradient

MASS_TOL = 1e-12
# negative dust below this size (relative to the peak) is treated as roundoff
CLIP_TOL = 1e-13


@dataclass(eq=False)
class GridDensity:
    """Nonnegative grid function with unit mass.

    The value array is frozen after validation; treat instances as
    immutable and build new ones through ``from_unnormalized``.
    """

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ParameterError(
                f"value shape {values.shape} does not match grid {self.grid.shape}"
            )
        if values.min() < 0.0:
            raise ParameterError("density has negative entries")
        mass = integrate(values, self.grid)
        if abs(mass - 1.0) > MASS_TOL:
            raise ParameterError(f"density mass {mass!r} deviates from 1")
        values = values.copy()
        values.flags.writeable = False
        self.values = values

    @classmethod
    def from_unnormalized(cls, grid: PeriodicGrid, values: np.ndarray) -> "GridDensity":
        """Clip roundoff-level negative dust, then rescale to unit mass."""
        values = np.asarray(values, dtype=float)
        peak = float(values.max(initial=0.0))
        if peak <= 0.0:
            raise ParameterError("values have no positive part")
        floor = float(values.min())
        if floor < -CLIP_TOL * max(1.0, peak):
            raise ParameterError(f"negative values of size {floor!r} are not roundoff dust")
        if floor < 0.0:
            values = np.maximum(values, 0.0)
        mass = integrate(values, grid)
        return cls(grid, values / mass)

    @classmethod
    def uniform(cls, grid: PeriodicGrid) -> "GridDensity":
        return cls(grid, np.ones(grid.shape))

    def marginal(self) -> "GridDensity":
        """Integrate out the trailing axes, keeping the first m."""
        g = self.grid
        if g.m == g.d:
            return self
        vol = 1.0
        for n in g.shape[g.m:]:
            vol /= n
        vals = self.values.sum(axis=tuple(range(g.m, g.d))) * vol
        return GridDensity(g.marginal_grid(), vals)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


def entropy(rho: GridDensity) -> float:
    """Integral of rho*log(rho), with 0*log(0) = 0."""
    v = rho.values
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return integrate(out, rho.grid)


def relative_entropy(rho: GridDensity, mu: GridDensity) -> float:
    """KL divergence of rho from mu; +inf when rho charges a null set of mu."""
    if rho.grid.shape != mu.grid.shape:
        raise ParameterError("densities live on different grids")
    r, m = rho.values, mu.values
    pos = r > 0
    if np.any(m[pos] == 0.0):
        return math.inf
    out = np.zeros_like(r)
    out[pos] = r[pos] * (np.log(r[pos]) - np.log(m[pos]))
    return integrate(out, rho.grid)


def fisher_information(rho: GridDensity, mu: GridDensity) -> float:
    """Integral of |grad log(rho/mu)|^2 rho, gradients taken spectrally."""
    if rho.grid.shape != mu.grid.shape:
        raise ParameterError("densities live on different grids")
    if rho.min() <= 0.0 or mu.min() <= 0.0:
        raise DomainError("fisher_information needs strictly positive densities")
    logratio = np.log(rho.values) - np.log(mu.values)
    sq = np.zeros(rho.grid.shape)
    for g in spectral_gradient(logratio, rho.grid):
        sq += g * g
    return integrate(sq * rho.values, rho.grid)


@dataclass(frozen=True)
class Distances:
    tv: float
    sup: float
    l2: float
    h1: float
    w1: float | None = None


def distances(rho: GridDensity, mu: GridDensity) -> Distances:
    """Bundle of distances between two densities on the same grid.

    The 1-Wasserstein entry is only defined in one dimension, where it
    is the circular CDF distance (the integral of |F_rho - F_mu - c|
    minimized over the free constant c).
    """
    if rho.grid.shape != mu.grid.shape:
        raise ParameterError("densities live on different grids")
    diff = rho.values - mu.values
    grid = rho.grid
    tv = 0.5 * integrate(np.abs(diff), grid)
    sup = float(np.abs(diff).max())
    l2 = math.sqrt(integrate(diff * diff, grid))
    gradsq = np.zeros(grid.shape)
    for g in spectral_gradient(diff, grid):
        gradsq += g * g
    h1 = l2 + math.sqrt(integrate(gradsq, grid))
    w1 = None
    if grid.d == 1:
        h = grid.spacing[0]
        cdf_gap = np.cumsum(diff) * h
        c = float(np.median(cdf_gap))
        w1 = float(np.abs(cdf_gap - c).sum() * h)
    return Distances(tv=tv, sup=sup, l2=l2, h1=h1, w1=w1)


def save_grid_values(path, values: np.ndarray) -> None:
    """Write a grid table as CSV: axis sizes on the first line, then
    row-major values, one per line, in round-trip decimal form."""
    values = np.asarray(values, dtype=float)
    with open(path, "w") as f:
        f.write(",".join(str(n) for n in values.shape) + "\n")
        for x in values.ravel(order="C"):
            f.write(f"{float(x)!r}\n")


def load_grid_values(path) -> np.ndarray:
    with open(path) as f:
        header = f.readline().strip()
        shape = tuple(int(tok) for tok in header.split(","))
        flat = np.array([float(line) for line in f if line.strip()])
    expected = 1
    for n in shape:
        expected *= n
    if flat.size != expected:
        raise ParameterError(f"file holds {flat.size} values, header promises {expected}")
    return flat.reshape(shape, order="C")


def save_density(path, rho: GridDensity) -> None:
    save_grid_values(path, rho.values)


def load_density(path, m: int = 1) -> GridDensity:
    values = load_grid_values(path)
    grid = PeriodicGrid(values.shape, m=m)
    return GridDensity(grid, values)
