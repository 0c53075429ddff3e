"""Orthonormal discrete Tchebichef polynomials and the 1-D moment transform.

The basis matrix ``q`` has one polynomial per row: ``q[p, x] = t_p(x)`` for
``x = 0 .. N-1``. Forward moments are ``X @ q.T`` and reconstruction is
``T @ q``; at full order the pair is an orthogonal change of basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import ContractError

__all__ = [
    "TchebichefBasis",
    "MomentVector",
    "build_basis",
    "order_recurrence",
    "forward",
    "inverse",
]


@dataclass(frozen=True)
class TchebichefBasis:
    length: int
    order: int
    q: np.ndarray

    def __post_init__(self):
        if self.q.shape != (self.order + 1, self.length):
            raise ContractError(
                f"basis matrix shape {self.q.shape} does not match "
                f"order {self.order} and length {self.length}"
            )


@dataclass(frozen=True)
class MomentVector:
    coeffs: np.ndarray
    basis_length: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.coeffs)):
            raise ContractError("moment vector has non-finite entries")


def order_recurrence(n: int, order: int | None = None) -> np.ndarray:
    """Rows ``t_0 .. t_order`` from the three-term recurrence in the order.

    This is the textbook form ``t_p = b1 (2x+1-N) t_{p-1} + b2 t_{p-2}``. It
    loses orthogonality quickly once N grows past a few dozen samples, so it
    is kept only as a cross-check for :func:`build_basis` on short lengths.
    """
    order = n - 1 if order is None else order
    x = np.arange(n, dtype=np.float64)
    q = np.zeros((order + 1, n))
    q[0] = 1.0 / np.sqrt(n)
    if order >= 1:
        q[1] = (2 * x + 1 - n) * np.sqrt(3.0 / (n * (n * n - 1.0)))
    for p in range(2, order + 1):
        b1 = np.sqrt((4.0 * p * p - 1.0) / (n * n - p * p)) / p
        b2 = (
            (1.0 - p)
            / p
            * np.sqrt((2.0 * p + 1.0) / (2.0 * p - 3.0))
            * np.sqrt((n * n - (p - 1.0) ** 2) / (n * n - p * p))
        )
        q[p] = b1 * (2 * x + 1 - n) * q[p - 1] + b2 * q[p - 2]
    return q


@lru_cache(maxsize=16)
def _full_basis(n: int) -> np.ndarray:
    # Seed each row at x = 0, 1 and run the recurrence along x up to the
    # midpoint; the second half follows from t_p(N-1-x) = (-1)^p t_p(x).
    q = np.zeros((n, n))
    p = np.arange(n, dtype=np.float64)
    start = np.empty(n)
    start[0] = 1.0 / np.sqrt(n)
    if n > 1:
        ratio = -np.sqrt((n - p[1:]) / (n + p[1:])) * np.sqrt((2 * p[1:] + 1) / (2 * p[1:] - 1))
        start[1:] = start[0] * np.cumprod(ratio)
    q[:, 0] = start
    half = (n + 1) // 2
    if n > 1:
        q[:, 1] = (1.0 + p * (p + 1) / (1.0 - n)) * start
    for x in range(2, half):
        g1 = (-p * (p + 1) - (2 * x - 1) * (x - n - 1) - x) / (x * (n - x))
        g2 = (x - 1.0) * (x - n - 1.0) / (x * (n - x))
        q[:, x] = g1 * q[:, x - 1] + g2 * q[:, x - 2]
    parity = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
    q[:, half:] = parity * q[:, : n - half][:, ::-1]
    q.setflags(write=False)
    return q


def build_basis(n: int, order: int | None = None) -> TchebichefBasis:
    """Orthonormal Tchebichef basis for signals of ``n`` samples.

    ``order`` defaults to ``n - 1`` (complete basis). Bases are cached per
    length, so repeated calls are cheap.
    """
    if n < 2:
        raise ContractError(f"basis length must be at least 2, got {n}")
    order = n - 1 if order is None else int(order)
    if not 1 <= order <= n - 1:
        raise ContractError(f"order must lie in [1, {n - 1}], got {order}")
    return TchebichefBasis(length=n, order=order, q=_full_basis(n)[: order + 1])


def forward(basis: TchebichefBasis, signal) -> np.ndarray:
    """Moments of one signal (shape ``(N,)``) or a batch (shape ``(M, N)``)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] != basis.length:
        raise ContractError(
            f"signal length {x.shape[-1]} does not match basis length {basis.length}"
        )
    return x @ basis.q.T


def inverse(basis: TchebichefBasis, moments) -> np.ndarray:
    t = np.asarray(moments.coeffs if isinstance(moments, MomentVector) else moments, dtype=np.float64)
    if t.shape[-1] != basis.order + 1:
        raise ContractError(
            f"got {t.shape[-1]} moments for a basis of order {basis.order}"
        )
    return t @ basis.q
