"""Discrete Tchebichef moments of a 250-sample fragment.

Builds the orthonormal basis, checks it is orthonormal, and shows how
much of a smooth signal's energy lands in the low-order moments compared
with additive high-frequency noise.

    python demos/01_tchebichef_moments.py
"""

import numpy as np

from fracdenoise import datapipe as dp
from fracdenoise.tchebichef import build_basis, forward, inverse

N = 250
basis = build_basis(N)
print(f"basis rows x samples: {basis.q.shape}")
print(f"max |Q Q^T - I|     : {np.max(np.abs(basis.q @ basis.q.T - np.eye(N))):.2e}")

# One clean fragment and the same fragment with band-limited noise.
clean, noise = dp.synth_corpus(1, N, seed=4)
noisy = dp.mix_noise(clean[0], noise[0], 0.0)

for label, x in (("clean", clean[0]), ("noisy", noisy)):
    t = forward(basis, x)
    energy = np.cumsum(t**2) / np.sum(t**2)
    k90 = int(np.searchsorted(energy, 0.9)) + 1
    print(f"{label}: 90% of energy in the first {k90:3d} moments, "
          f"first 50 hold {100 * energy[49]:.1f}%")

# Truncating the noisy moments is a crude low-pass filter.
t = forward(basis, noisy)
for keep in (25, 50, 100, 250):
    kept = np.where(np.arange(N) < keep, t, 0.0)
    est = inverse(basis, kept)
    err = est - clean[0]
    snr = 10 * np.log10(np.sum(clean[0] ** 2) / np.sum(err**2))
    print(f"keep {keep:3d} moments -> SNR {snr:6.2f} dB")
