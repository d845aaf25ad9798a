"""Wrapped Gaussian smoothing on the circle: profiles, semigroup, gaps."""
import numpy as np

from abplab import WrappedGaussianKernel, convolve, smoothing_gap, log_smoothing_gap
from abplab.grids import PeriodicGrid

grid = PeriodicGrid((256,))
x = grid.axis(0)

# Kernel profiles sharpen as epsilon shrinks
for eps in (1e-1, 1e-2, 1e-3):
    k = WrappedGaussianKernel(epsilon=eps)
    prof = k.density(x.reshape(-1, 1))
    print(f"eps={eps:7.0e}  peak={prof.max():8.3f}  "
          f"effective width ~ {1.0 / prof.max():.4f}")

# Two smoothing passes equal one pass at the summed scale (exact in Fourier)
f = np.cos(2 * np.pi * x) + 0.5 * np.sin(6 * np.pi * x)
ka, kb = WrappedGaussianKernel(epsilon=0.02), WrappedGaussianKernel(epsilon=0.03)
kc = WrappedGaussianKernel(epsilon=0.05)
defect = np.abs(convolve(ka, convolve(kb, f)) - convolve(kc, f)).max()
print(f"semigroup defect: {defect:.2e}")

# The commutator gap between smoothing and the pointwise logarithm scales
# like sqrt(eps); it quantifies how far K*ln(K*g) sits from ln g
g = np.exp(np.cos(2 * np.pi * x))
g /= g.mean()
print("\n  eps      log gap      gap/sqrt(eps)")
for eps in (1e-1, 1e-2, 1e-3):
    k = WrappedGaussianKernel(epsilon=eps)
    gap = log_smoothing_gap(g, k)
    print(f"  {eps:7.0e}  {gap:.4e}   {gap / np.sqrt(eps):.4f}")

# Plain smoothing gap for comparison: first order in eps on smooth data
for eps in (1e-1, 1e-2):
    k = WrappedGaussianKernel(epsilon=eps)
    print(f"smoothing gap at eps={eps}: {smoothing_gap(g, k):.4e}")
