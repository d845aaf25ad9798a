"""The solvable Gaussian case: one quadratic equation tells the story."""
from abplab import GaussianModel

# Stationary variance solves s^2 - (sigma0^2 (1+alpha) - eps) s
# - eps sigma0^2 = 0; the positive root is explicit
model = GaussianModel(sigma0_sq=1.0, alpha=1.0, epsilon=0.5)
print(f"sigma^2 at eps=0.5: {model.variance():.6f}")

# Vanishing smoothing recovers the flat-bias limit (alpha + 1) sigma0^2
print("\n  eps       sigma^2     ratio to limit")
for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
    s = GaussianModel(1.0, 1.0, eps).variance()
    print(f"  {eps:7.0e}   {s:.6f}   {s / 2.0:.8f}")

# The precision iteration u -> 1/sigma0^2 - alpha/(1/u + eps) contracts
# for alpha < 1 and lands on the same root from any admissible start
model = GaussianModel(1.0, 0.9, 0.5)
print(f"\nclosed form at alpha=0.9: {model.variance():.12f}")
for u0 in (0.2, 1.0, 2.0):
    s, steps, ok = model.iterate(u0, tol=1e-15)
    print(f"  start u0={u0:.1f}: {s:.12f} after {steps} steps (converged={ok})")

# Strong bias scales the variance linearly in alpha
print("\n  alpha     sigma^2 / (alpha+1)")
for a in (1.0, 4.0, 16.0, 64.0, 256.0):
    s = GaussianModel(1.0, a, 1e-2).variance()
    print(f"  {a:6.0f}    {s / (a + 1.0):.6f}")
