"""Randomized SVD on a weight-sized matrix and the optimized-rank rule.

A 250 x 3968 matrix (the shape of the dense layer) with a polynomially
decaying spectrum is factored at a few ranks. The error is compared with
the best possible truncation, and the rank that keeps 90% of the squared
singular-value mass is reported.

    python demos/03_rsvd_compression.py
"""

import time

import numpy as np

from fracdenoise.lowrank import RsvdConfig, optimized_rank, reconstruct, rsvd

rng = np.random.default_rng(0)
m, n = 250, 3968
u, _ = np.linalg.qr(rng.standard_normal((m, m)))
v, _ = np.linalg.qr(rng.standard_normal((n, m)))
s = 1.0 / np.arange(1, m + 1) ** 0.8
a = (u * s) @ v.T

print(f"optimized rank (90% mass): {optimized_rank(s)} of {m}")
for r in (5, 25, 100):
    t0 = time.perf_counter()
    f = rsvd(a, RsvdConfig(r))
    dt = time.perf_counter() - t0
    err = np.linalg.norm(a - reconstruct(f))
    best = np.sqrt(np.sum(s[r:] ** 2))
    print(f"rank {r:3d}: error {err:.4f}, best {best:.4f}, ratio {err / best:.4f}, {dt:.2f}s")
