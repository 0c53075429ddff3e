"""Caputo fractional-order gradients for power terms and the update rule.

With lower limit 0, the Caputo derivative of ``w**k`` is
``Gamma(k+1) / Gamma(k+1-alpha) * w**(k-alpha)``. Backpropagation only ever
needs ``k = 1`` (the chain-rule factor for a parameter) and ``k = 2`` (the
L2 penalty), which is what the two helpers below evaluate.

Powers of negative numbers are taken on ``|w|`` floored at ``epsilon``; the
power factor is therefore always positive and the descent direction of every
coordinate matches plain gradient descent.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .linalg import ContractError

__all__ = [
    "FracConfig",
    "EPSILON_FLOOR",
    "caputo_power_factor",
    "caputo_reg_term",
    "frac_gradient",
    "frac_update",
]

EPSILON_FLOOR = 1e-8


@dataclass(frozen=True)
class FracConfig:
    """Training hyperparameters. Defaults are the published settings."""

    alpha: float = 1.2
    eta: float = 5e-4
    lam: float = 1e-5
    epsilon_floor: float = EPSILON_FLOOR
    epochs: int = 300
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ContractError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.eta <= 0.0:
            raise ContractError(f"eta must be positive, got {self.eta}")
        if self.lam < 0.0:
            raise ContractError(f"lambda must be non-negative, got {self.lam}")
        if self.epsilon_floor <= 0.0:
            raise ContractError("epsilon_floor must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ContractError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 2.0:
        raise ContractError(f"alpha must lie in (0, 2), got {alpha}")


def caputo_power_factor(w, alpha: float, epsilon: float = EPSILON_FLOOR):
    """``max(|w|, eps)**(1 - alpha) / Gamma(2 - alpha)``, elementwise.

    Exactly 1.0 at ``alpha == 1``.
    """
    _check_alpha(alpha)
    w = np.asarray(w, dtype=np.float64)
    if alpha == 1.0:
        return np.ones_like(w)
    return np.maximum(np.abs(w), epsilon) ** (1.0 - alpha) / math.gamma(2.0 - alpha)


def caputo_reg_term(w, alpha: float, lam: float, epsilon: float = EPSILON_FLOOR):
    """Fractional derivative of ``lam/2 * w**2``: ``lam sign(w) |w|**(2-alpha) / Gamma(3-alpha)``."""
    _check_alpha(alpha)
    w = np.asarray(w, dtype=np.float64)
    if alpha == 1.0:
        return lam * w
    mag = np.maximum(np.abs(w), epsilon) ** (2.0 - alpha)
    return lam * np.sign(w) * mag / math.gamma(3.0 - alpha)


def frac_gradient(param, grad, alpha: float, lam: float = 0.0, epsilon: float = EPSILON_FLOOR):
    """Fractional gradient of a parameter given its integer-order data gradient.

    Pass ``lam = 0`` for biases, which carry no penalty.
    """
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape:
        raise ContractError(f"parameter shape {param.shape} != gradient shape {grad.shape}")
    out = grad * caputo_power_factor(param, alpha, epsilon)
    if lam:
        out = out + caputo_reg_term(param, alpha, lam, epsilon)
    return out


def frac_update(param, grad, cfg: FracConfig, regularize: bool = True) -> np.ndarray:
    """One fractional gradient-descent step; returns the new parameter array."""
    lam = cfg.lam if regularize else 0.0
    return np.asarray(param, dtype=np.float64) - cfg.eta * frac_gradient(
        param, grad, cfg.alpha, lam, cfg.epsilon_floor
    )
