"""Randomized SVD with subspace iteration and low-rank reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ContractError, as_matrix, qr, svd

__all__ = [
    "RsvdConfig",
    "LowRankFactors",
    "VARIANCE_SHARE",
    "reshape_kernel",
    "unreshape_kernel",
    "rsvd",
    "optimized_rank",
    "reconstruct",
    "numerical_rank",
]

# Fraction of squared singular-value mass the optimized rank must keep.
VARIANCE_SHARE = 0.90


@dataclass(frozen=True)
class RsvdConfig:
    rank: int
    oversampling: int = 5
    subspace_iters: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ContractError(f"rank must be >= 1, got {self.rank}")
        if self.oversampling < 0 or self.subspace_iters < 0:
            raise ContractError("oversampling and subspace_iters must be non-negative")


@dataclass(frozen=True)
class LowRankFactors:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return self.s.size


def reshape_kernel(kernel) -> np.ndarray:
    """``(filters, channels, width)`` kernel to a ``filters x (channels*width)`` matrix."""
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 3:
        raise ContractError(f"kernel must be 3-D, got shape {k.shape}")
    return k.reshape(k.shape[0], k.shape[1] * k.shape[2])


def unreshape_kernel(a, shape) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).reshape(shape)


def rsvd(a, cfg: RsvdConfig) -> LowRankFactors:
    """Rank-``cfg.rank`` factors of ``a`` by Gaussian sketching.

    Sketch ``Q0 = A O`` with ``rank + oversampling`` Gaussian columns, refine
    with ``subspace_iters`` QR-stabilized power iterations
    (``G = qr(A^T Q)``, ``Q = qr(A G)``), condense ``B = Q^T A`` and take its
    exact SVD. The sketch width must not exceed the short side of ``a``.
    """
    a = as_matrix(a, "a")
    n, m = a.shape
    width = cfg.rank + cfg.oversampling
    if width > min(n, m):
        raise ContractError(f"rank + oversampling = {width} exceeds the short side of {a.shape}")
    rng = np.random.default_rng(cfg.seed)
    omega = rng.standard_normal((m, width))
    q, _ = qr(a @ omega)
    for _ in range(cfg.subspace_iters):
        g, _ = qr(a.T @ q)
        q, _ = qr(a @ g)
    b = q.T @ a
    ub, s, vb = svd(b)
    r = cfg.rank
    return LowRankFactors(q @ ub[:, :r], s[:r].copy(), vb[:, :r])


def optimized_rank(s, share: float = VARIANCE_SHARE) -> int:
    """Smallest ``r`` whose leading ``s[:r]**2`` hold ``share`` of the total."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ContractError("spectrum must be a non-empty vector")
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise ContractError("spectrum must be non-negative and descending")
    energy = s * s
    total = energy.sum()
    if total == 0.0:
        return 1
    cum = np.cumsum(energy) / total
    # Tolerance absorbs rounding in the cumulative sum at an exact boundary.
    return int(np.searchsorted(cum, share - 1e-12 * s.size) + 1)


def reconstruct(factors: LowRankFactors, target_rank: int | None = None) -> np.ndarray:
    r = factors.rank if target_rank is None else int(target_rank)
    if not 1 <= r <= factors.rank:
        raise ContractError(f"target rank must lie in [1, {factors.rank}], got {r}")
    return (factors.u[:, :r] * factors.s[:r]) @ factors.v[:, :r].T


def numerical_rank(a, rtol: float = 1e-10) -> int:
    """Number of singular values above ``rtol`` times the largest."""
    _, s, _ = svd(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))
