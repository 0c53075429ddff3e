"""Caputo fractional-order gradient descent on a one-dimensional quadratic.

The fractional step rescales the ordinary gradient by
|w|^(1-alpha) / Gamma(2-alpha). Below alpha = 1 it shrinks steps far from
the origin; above 1 it enlarges them. At alpha = 1 it is plain gradient
descent.

    python demos/02_fractional_descent.py
"""

import numpy as np

from fracdenoise.fractional import caputo_power_factor, frac_gradient

target = 3.0
print("power factor at w = 0.5, 1, 4:")
for alpha in (0.8, 1.0, 1.2, 1.5):
    vals = [caputo_power_factor(w, alpha) for w in (0.5, 1.0, 4.0)]
    print(f"  alpha {alpha:.1f}: " + "  ".join(f"{v:.4f}" for v in vals))

print("\niterations to reach |w - 3| < 1e-3 from w = 0 with eta = 0.01:")
for alpha in (0.8, 1.0, 1.2, 1.5):
    w = np.array([0.0])
    for step in range(1, 20001):
        w = w - 0.01 * frac_gradient(w, 2.0 * (w - target), alpha)
        if abs(w[0] - target) < 1e-3:
            break
    print(f"  alpha {alpha:.1f}: {step:5d} steps, w = {w[0]:.5f}")
