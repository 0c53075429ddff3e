"""Layer-wise low-rank compression of a trained network.

Two steps:

* :func:`optimize_after_training` replaces CONV2, CONV3 and FC by their
  optimized-rank reconstruction (rank keeping 90% of squared singular-value
  mass).
* :func:`compress_at_rate` takes such an optimized layer and keeps
  ``round((1 - c_r) * rank)`` of its rank, for one layer at a time.

CONV1, CONV4 and all biases are never touched.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .linalg import ContractError
from .lowrank import RsvdConfig, optimized_rank, reconstruct, reshape_kernel, rsvd
from .metrics import MetricSet
from .network import NetworkParams

__all__ = [
    "COMPRESSIBLE_LAYERS",
    "MAX_RATE",
    "LayerRank",
    "SweepRow",
    "CompressionReport",
    "layer_matrix",
    "with_layer_matrix",
    "retained_rank",
    "optimize_layer",
    "optimize_after_training",
    "compress_at_rate",
    "default_cr_grid",
    "sweep",
]

COMPRESSIBLE_LAYERS = ("conv2", "conv3", "fc")
MAX_RATE = 0.95

_PARAM_NAME = {"conv2": "conv2.kernel", "conv3": "conv3.kernel", "fc": "fc.weight"}


@dataclass(frozen=True)
class LayerRank:
    layer: str
    original_rank: int
    optimized_rank: int
    alpha: float | None = None


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    layer: str
    c_r: float
    rank: int
    metrics: MetricSet


@dataclass
class CompressionReport:
    ranks: list[LayerRank] = field(default_factory=list)
    rows: list[SweepRow] = field(default_factory=list)

    METRIC_COLUMNS = ("alpha", "layer", "c_r", "snr_db", "cc", "prd", "rmse")
    RANK_COLUMNS = ("alpha", "layer", "original_rank", "optimized_rank")

    def write_metrics(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.METRIC_COLUMNS)
            for r in self.rows:
                m = r.metrics
                w.writerow([f"{r.alpha:g}", r.layer, f"{r.c_r:.2f}", repr(m.snr_db), repr(m.cc), repr(m.prd), repr(m.rmse)])

    def write_ranks(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.RANK_COLUMNS)
            for r in self.ranks:
                alpha = "" if r.alpha is None else f"{r.alpha:g}"
                w.writerow([alpha, r.layer, r.original_rank, r.optimized_rank])


def _param_name(layer: str) -> str:
    try:
        return _PARAM_NAME[layer]
    except KeyError:
        raise ContractError(f"layer must be one of {COMPRESSIBLE_LAYERS}, got {layer!r}") from None


def layer_matrix(params: NetworkParams, layer: str) -> np.ndarray:
    a = params[_param_name(layer)]
    return reshape_kernel(a) if a.ndim == 3 else np.array(a)


def with_layer_matrix(params: NetworkParams, layer: str, matrix) -> NetworkParams:
    name = _param_name(layer)
    return params.replace(name, np.asarray(matrix).reshape(params[name].shape))


def retained_rank(rank: int, c_r: float) -> int:
    """``(1 - c_r) * rank`` rounded half-up, at least 1."""
    if not 0.0 <= c_r <= MAX_RATE:
        raise ContractError(f"compression rate must lie in [0, {MAX_RATE}], got {c_r}")
    return max(1, int(math.floor((1.0 - c_r) * rank + 0.5 + 1e-9)))


def _factor(a: np.ndarray, rank: int, cfg: RsvdConfig):
    # Near full rank the sketch cannot be oversampled past the short side.
    room = min(a.shape) - rank
    over = max(0, min(cfg.oversampling, room))
    return rsvd(a, RsvdConfig(rank, over, cfg.subspace_iters, cfg.seed))


def optimize_layer(a, cfg: RsvdConfig | None = None) -> tuple[np.ndarray, int, int]:
    """Optimized-rank reconstruction of one matrix.

    Returns ``(matrix_opt, original_rank, optimized_rank)``; the original
    rank is the short side of the matrix.
    """
    a = np.asarray(a, dtype=np.float64)
    cfg = cfg or RsvdConfig(rank=1)
    full = min(a.shape)
    factors = _factor(a, full, cfg)
    opt = optimized_rank(factors.s)
    return reconstruct(factors, opt), full, opt


def optimize_after_training(
    params: NetworkParams, layers: Iterable[str] = COMPRESSIBLE_LAYERS, cfg: RsvdConfig | None = None
) -> tuple[NetworkParams, list[LayerRank]]:
    out = params
    ranks = []
    for layer in layers:
        mat, full, opt = optimize_layer(layer_matrix(params, layer), cfg)
        out = with_layer_matrix(out, layer, mat)
        ranks.append(LayerRank(layer, full, opt))
    return out, ranks


def compress_at_rate(
    params_opt: NetworkParams, layer: str, c_r: float, opt_rank: int, cfg: RsvdConfig | None = None
) -> tuple[NetworkParams, int]:
    """Keep ``retained_rank(opt_rank, c_r)`` of one optimized layer.

    Returns the new parameter set and the rank actually kept.
    """
    r = retained_rank(opt_rank, c_r)
    cfg = cfg or RsvdConfig(rank=1)
    a = layer_matrix(params_opt, layer)
    if r > min(a.shape):
        raise ContractError(f"rank {r} exceeds the size of layer {layer}")
    return with_layer_matrix(params_opt, layer, reconstruct(_factor(a, r, cfg))), r


def default_cr_grid() -> list[float]:
    """0.05, 0.10, ..., 0.95."""
    return [round(0.05 * k, 2) for k in range(1, 20)]


def sweep(
    params_opt: NetworkParams,
    ranks: dict[str, int],
    evaluate: Callable[[NetworkParams], MetricSet],
    alpha: float,
    layers: Iterable[str] = COMPRESSIBLE_LAYERS,
    cr_grid: Iterable[float] | None = None,
    cfg: RsvdConfig | None = None,
) -> list[SweepRow]:
    """Evaluate every (layer, rate) point, one compressed layer at a time."""
    grid = list(default_cr_grid() if cr_grid is None else cr_grid)
    rows = []
    for layer in layers:
        for c_r in grid:
            compressed, r = compress_at_rate(params_opt, layer, c_r, ranks[layer], cfg)
            rows.append(SweepRow(alpha, layer, float(c_r), r, evaluate(compressed)))
    return rows
