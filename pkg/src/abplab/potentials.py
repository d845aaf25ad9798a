"""Confining potentials on the torus and their free-energy profiles."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import ParameterError
from .grids import PeriodicGrid, integrate
from .kernels import WrappedGaussianKernel

TWO_PI = 2.0 * math.pi


class Potential:
    """Grid potential with optional analytic gradient components.

    The free-energy profile A over the leading coordinates is defined by
    exp(-A(x1)) = integral of exp(-beta*V(x1, x2)) dx2, shifted so that
    exp(-A) has unit mass.  Profiles are cached per beta and exact to
    quadrature accuracy.
    """

    def __init__(self, grid: PeriodicGrid, values, name: str = "custom", grad_fns=None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ParameterError(
                f"potential shape {values.shape} does not match grid {grid.shape}"
            )
        if grad_fns is not None and len(grad_fns) != grid.d:
            raise ParameterError("need one gradient component per axis")
        self.grid = grid
        self.values = values
        self.values.flags.writeable = False
        self.name = name
        self.grad_fns = tuple(grad_fns) if grad_fns is not None else None
        self._profiles = {}

    def free_energy_profile(self, beta: float = 1.0) -> np.ndarray:
        """Profile A on the marginal grid, normalized so exp(-A) has mass 1."""
        key = float(beta)
        if key not in self._profiles:
            self._profiles[key] = self._compute_profile(key)
        return self._profiles[key]

    def _compute_profile(self, beta: float) -> np.ndarray:
        g = self.grid
        w = beta * self.values
        if g.m == g.d:
            raw = w
        else:
            trailing = tuple(range(g.m, g.d))
            vol = 1.0
            for n in g.shape[g.m:]:
                vol /= n
            c = w.min()
            raw = -np.log(np.exp(-(w - c)).sum(axis=trailing) * vol) + c
        mgrid = g.marginal_grid()
        shift = math.log(integrate(np.exp(-(raw - raw.min())), mgrid)) - raw.min()
        return raw + shift

    def gradient_grids(self):
        """Spectral gradient of V tabulated on the grid, one array per axis."""
        from .grids import spectral_gradient

        return spectral_gradient(self.values, self.grid)


def cosine_1d(c: float = 1.0, points: int = 256) -> Potential:
    grid = PeriodicGrid((points,))
    x = grid.axis(0)
    return Potential(
        grid,
        c * np.cos(TWO_PI * x),
        name="cosine-1d",
        grad_fns=(lambda p, c=c: -TWO_PI * c * np.sin(TWO_PI * p[..., 0]),),
    )


def double_well_1d(c: float = 1.0, points: int = 256) -> Potential:
    grid = PeriodicGrid((points,))
    x = grid.axis(0)
    values = c * np.cos(2.0 * TWO_PI * x) + 0.2 * np.cos(TWO_PI * x)
    return Potential(
        grid,
        values,
        name="double-well-1d",
        grad_fns=(
            lambda p, c=c: -2.0 * TWO_PI * c * np.sin(2.0 * TWO_PI * p[..., 0])
            - 0.2 * TWO_PI * np.sin(TWO_PI * p[..., 0]),
        ),
    )


def coupled_2d(c1: float = 1.0, c2: float = 1.0, c3: float = 1.0, points=(128, 128)) -> Potential:
    grid = PeriodicGrid(tuple(points), m=1)
    x1, x2 = grid.mesh()
    values = (
        c1 * np.cos(TWO_PI * x1)
        + c2 * np.cos(TWO_PI * x2)
        + c3 * np.cos(TWO_PI * x1) * np.cos(TWO_PI * x2)
    )

    def dv1(p, c1=c1, c3=c3):
        return -TWO_PI * np.sin(TWO_PI * p[..., 0]) * (c1 + c3 * np.cos(TWO_PI * p[..., 1]))

    def dv2(p, c2=c2, c3=c3):
        return -TWO_PI * np.sin(TWO_PI * p[..., 1]) * (c2 + c3 * np.cos(TWO_PI * p[..., 0]))

    return Potential(grid, values, name="coupled-2d", grad_fns=(dv1, dv2))


def smoothed_cosine_1d(b: float = 1.0, epsilon: float = 1e-2, points: int = 256) -> Potential:
    """Potential whose free-energy profile is the eps-smoothing of a
    bounded cosine by construction: smoothing a pure mode just damps its
    amplitude by the kernel coefficient."""
    kernel = WrappedGaussianKernel(epsilon)
    amp = b * float(kernel.spectrum(1))
    grid = PeriodicGrid((points,))
    x = grid.axis(0)
    return Potential(
        grid,
        amp * np.cos(TWO_PI * x),
        name="smoothed-cosine-1d",
        grad_fns=(lambda p, amp=amp: -TWO_PI * amp * np.sin(TWO_PI * p[..., 0]),),
    )


BUILTIN_POTENTIALS = {
    "cosine-1d": cosine_1d,
    "double-well-1d": double_well_1d,
    "coupled-2d": coupled_2d,
    "smoothed-cosine-1d": smoothed_cosine_1d,
}
