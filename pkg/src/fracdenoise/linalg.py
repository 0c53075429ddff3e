"""Dense linear-algebra kernels: matrix product, Householder QR, Jacobi SVD.

Matrices are plain 2-D ``float64`` numpy arrays. Every routine validates its
input with :func:`as_matrix`, so NaN/Inf never enter the factorizations.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ContractError",
    "NumericFailure",
    "as_matrix",
    "matmul",
    "qr",
    "svd",
    "SVD_MAX_SWEEPS",
]

# One-sided Jacobi converges quadratically; 60 sweeps is far beyond what any
# finite matrix of the sizes used here needs.
SVD_MAX_SWEEPS = 60
QR_BLOCK = 32


class ContractError(ValueError):
    """Raised when an operation is called outside its preconditions."""


class NumericFailure(ArithmeticError):
    """Raised when an iterative kernel fails to converge."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array or raise ContractError."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def qr(a) -> tuple[np.ndarray, np.ndarray]:
    """Thin Householder QR of a tall matrix.

    Returns ``q`` (rows x cols, orthonormal columns) and ``r`` (cols x cols,
    upper triangular). Rank-deficient inputs are fine: a zero column simply
    gets an identity reflector and the matching diagonal of ``r`` is zero.

    Reflectors are grouped in panels of ``QR_BLOCK`` columns and applied in
    the compact form ``I - V T V^T`` so the trailing updates are matrix
    products.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if m < n:
        raise ContractError(f"thin QR needs rows >= cols, got {a.shape}")
    r = a.copy()
    panels = []
    for j0 in range(0, n, QR_BLOCK):
        j1 = min(j0 + QR_BLOCK, n)
        v, t = _panel(r[j0:, j0:j1])
        if j1 < n:
            trail = r[j0:, j1:]
            trail -= v @ (t.T @ (v.T @ trail))
        panels.append((j0, v, t))
    q = np.eye(m, n)
    for j0, v, t in reversed(panels):
        # Columns left of j0 are still unit vectors above row j0 here.
        block = q[j0:, j0:]
        block -= v @ (t @ (v.T @ block))
    return q, np.triu(r[:n, :])


def _panel(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factor one panel in place; return its reflectors ``V`` and the
    triangular ``T`` with ``H_1 ... H_b = I - V T V^T``."""
    rows, b = p.shape
    v = np.zeros((rows, b))
    t = np.zeros((b, b))
    for k in range(b):
        x = p[k:, k]
        norm = np.sqrt(x @ x)
        if norm == 0.0:
            continue
        u = x.copy()
        u[0] += norm if x[0] >= 0 else -norm
        u /= np.sqrt(u @ u)
        p[k:, k:] -= 2.0 * np.outer(u, u @ p[k:, k:])
        v[k:, k] = u
        t[:k, k] = -2.0 * (t[:k, :k] @ (v[:, :k].T @ v[:, k]))
        t[k, k] = 2.0
    return v, t


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 (or n) rounds of disjoint column pairs."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(p), max(p)) for p in pairs if -1 not in p]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_columns(a: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonalize the columns of ``a`` (m x n, m >= n) by plane rotations.

    Returns the rotated matrix ``w = a v`` and the accumulated rotation ``v``.
    """
    # Columns are stored as rows so that pair gathers are contiguous.
    wt = np.array(a.T, order="C")
    n = wt.shape[0]
    vt = np.eye(n)
    rounds = _round_robin(n)
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            if p.size == 0:
                continue
            wp, wq = wt[p], wt[q]
            alpha = np.einsum("ij,ij->i", wp, wp)
            beta = np.einsum("ij,ij->i", wq, wq)
            gamma = np.einsum("ij,ij->i", wp, wq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            wp, wq = wp[active], wq[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = c * t[:, None]
            wt[p], wt[q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = vt[p], vt[q]
            vt[p], vt[q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return wt.T, vt.T
    raise NumericFailure(f"Jacobi SVD did not converge in {SVD_MAX_SWEEPS} sweeps")


def svd(a, tol: float = 1e-15) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``a = u @ diag(s) @ v.T`` by one-sided Jacobi rotations.

    ``s`` is sorted descending. Wide inputs are handled through the
    transpose so the rotations always act on the shorter dimension.
    Columns of ``u`` belonging to zero singular values are completed to an
    orthonormal set.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if m < n:
        u, s, v = svd(a.T, tol)
        return v, s, u
    if n == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0))
    if m >= 2 * n:
        # Rotations on the n x n triangular factor are far cheaper.
        q, r = qr(a)
        ur, s, v = svd(r, tol)
        return q @ ur, s, v
    w, v = _jacobi_columns(a, tol)
    s = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-s, kind="stable")
    s, w, v = s[order], w[:, order], v[:, order]
    u = np.zeros((m, n))
    scale = s[0] if s[0] > 0 else 1.0
    nonzero = s > scale * 1e-13 * max(m, n)
    u[:, nonzero] = w[:, nonzero] / s[nonzero]
    s = np.where(nonzero, s, 0.0)
    if not np.all(nonzero):
        u = _complete_basis(u, nonzero)
    return u, s, v


def _complete_basis(u: np.ndarray, filled: np.ndarray) -> np.ndarray:
    # Gram-Schmidt coordinate vectors against the existing columns.
    m = u.shape[0]
    out = u.copy()
    basis = [out[:, j] for j in np.flatnonzero(filled)]
    candidate = 0
    for j in np.flatnonzero(~filled):
        while True:
            e = np.zeros(m)
            e[candidate % m] = 1.0
            candidate += 1
            for _ in range(2):
                for b in basis:
                    e -= (b @ e) * b
            norm = np.sqrt(e @ e)
            if norm > 1e-8:
                break
        out[:, j] = e / norm
        basis.append(out[:, j])
    return out
