"""Uniform periodic grids on the unit torus and spectral helpers.

The domain is [-1/2, 1/2)^d with periodic identification and total
volume one.  All transforms below use integer wavenumbers, i.e. the
basis exp(2*pi*i*k*x) with k in Z^d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError


@dataclass(frozen=True)
class PeriodicGrid:
    """Tensor grid on the torus.

    Parameters
    ----------
    shape : tuple of int
        Points per axis.  One or two axes, every count even so the
        Nyquist mode is unambiguous.
    m : int
        Number of leading "reaction coordinate" axes.  Either m == d == 1
        or m < d.
    """

    shape: tuple
    m: int = 1

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        d = len(shape)
        if d not in (1, 2):
            raise ParameterError(f"grid supports 1 or 2 axes, got {d}")
        for n in shape:
            if n < 4 or n % 2 != 0:
                raise ParameterError(f"points per axis must be even and >= 4, got {n}")
        if not (1 <= self.m <= d):
            raise ParameterError(f"m must lie in [1, {d}], got {self.m}")
        if self.m == d and d != 1:
            raise ParameterError("m == d is only allowed in one dimension")

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple:
        return tuple(1.0 / n for n in self.shape)

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for n in self.shape:
            vol /= n
        return vol

    def axis(self, i: int) -> np.ndarray:
        """Coordinates along axis i, in [-1/2, 1/2)."""
        n = self.shape[i]
        return np.arange(n) / n - 0.5

    def mesh(self):
        """List of d coordinate arrays broadcast to the full shape."""
        axes = [self.axis(i) for i in range(self.d)]
        return np.meshgrid(*axes, indexing="ij")

    def wavenumbers(self, i: int) -> np.ndarray:
        """Integer wavenumbers along axis i in FFT order."""
        n = self.shape[i]
        return np.fft.fftfreq(n, d=1.0 / n).round().astype(int)

    def marginal_grid(self) -> "PeriodicGrid":
        return PeriodicGrid(self.shape[: self.m], m=self.m)


def integrate(values: np.ndarray, grid: PeriodicGrid) -> float:
    """Rectangle-rule integral over the torus (spectrally accurate for
    smooth periodic integrands)."""
    return float(values.sum() * grid.cell_volume)


def spectral_derivative(values: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """Differentiate a real grid function along one periodic axis.

    Odd orders zero the Nyquist mode, which keeps the operator real and
    exactly antisymmetric under the grid inner product.
    """
    n = values.shape[axis]
    k = np.fft.rfftfreq(n, d=1.0 / n)
    mult = (2j * np.pi * k) ** order
    if order % 2 == 1:
        mult = mult.copy()
        mult[-1] = 0.0
    fh = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = k.size
    fh *= mult.reshape(shape)
    return np.fft.irfft(fh, n=n, axis=axis)


def spectral_gradient(values: np.ndarray, grid: PeriodicGrid):
    """List of partial derivatives along every grid axis."""
    return [spectral_derivative(values, ax) for ax in range(grid.d)]


def squared_wavenumbers(grid: PeriodicGrid, axes=None) -> np.ndarray:
    """|k|^2 on the full FFT layout, restricted to the given axes."""
    if axes is None:
        axes = range(grid.d)
    out = np.zeros(grid.shape)
    for ax in axes:
        k = grid.wavenumbers(ax).astype(float)
        shape = [1] * grid.d
        shape[ax] = k.size
        out = out + (k.reshape(shape)) ** 2
    return out


def wrap_coordinates(x: np.ndarray) -> np.ndarray:
    """Map arbitrary reals to the fundamental domain [-1/2, 1/2)."""
    return (np.asarray(x, dtype=float) + 0.5) % 1.0 - 0.5
