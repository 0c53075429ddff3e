"""Signal-quality metrics between a reference ``x`` and an estimate ``x_hat``.

All functions take 1-D arrays. ``metric_table`` evaluates a batch of
fragments (rows) and returns one :class:`MetricSet` per row.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .linalg import ContractError

__all__ = ["MetricSet", "SNR_CAP_DB", "snr", "cc", "prd", "rmse", "evaluate", "metric_table", "aggregate"]

# Returned by snr() when the error energy is numerically zero.
SNR_CAP_DB = 300.0


@dataclass(frozen=True)
class MetricSet:
    snr_db: float
    cc: float
    prd: float
    rmse: float

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(x, x_hat):
    x = np.asarray(x, dtype=np.float64).ravel()
    x_hat = np.asarray(x_hat, dtype=np.float64).ravel()
    if x.size == 0 or x.shape != x_hat.shape:
        raise ContractError(f"metric inputs must be equal non-empty lengths, got {x.size} and {x_hat.size}")
    return x, x_hat


def snr(x, x_hat) -> float:
    x, x_hat = _pair(x, x_hat)
    signal = float(x @ x)
    if signal <= 0.0:
        raise ContractError("SNR undefined for a zero-energy reference")
    d = x - x_hat
    err = float(d @ d)
    if err < 1e-30:
        return SNR_CAP_DB
    return 10.0 * np.log10(signal / err)


def cc(x, x_hat) -> float:
    """Pearson correlation coefficient."""
    x, x_hat = _pair(x, x_hat)
    dx = x - x.mean()
    dy = x_hat - x_hat.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise ContractError("correlation undefined for a constant signal")
    return float(np.clip((dx @ dy) / np.sqrt(sx * sy), -1.0, 1.0))


def prd(x, x_hat) -> float:
    x, x_hat = _pair(x, x_hat)
    signal = float(x @ x)
    if signal <= 0.0:
        raise ContractError("PRD undefined for a zero-energy reference")
    d = x - x_hat
    return 100.0 * np.sqrt(float(d @ d) / signal)


def rmse(x, x_hat) -> float:
    x, x_hat = _pair(x, x_hat)
    d = x - x_hat
    return float(np.sqrt(d @ d / x.size))


def evaluate(x, x_hat) -> MetricSet:
    return MetricSet(float(snr(x, x_hat)), float(cc(x, x_hat)), float(prd(x, x_hat)), float(rmse(x, x_hat)))


def metric_table(clean, estimate) -> list[MetricSet]:
    clean = np.atleast_2d(clean)
    estimate = np.atleast_2d(estimate)
    if clean.shape != estimate.shape:
        raise ContractError(f"shape mismatch {clean.shape} vs {estimate.shape}")
    return [evaluate(a, b) for a, b in zip(clean, estimate)]


def aggregate(rows: list[MetricSet]) -> MetricSet:
    """Mean of each metric over fragments."""
    if not rows:
        raise ContractError("cannot aggregate an empty metric table")
    arr = np.array([[r.snr_db, r.cc, r.prd, r.rmse] for r in rows])
    return MetricSet(*(float(v) for v in arr.mean(axis=0)))
