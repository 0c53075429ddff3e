"""Mini-batch training with fractional updates, and spatial-domain evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import network as net
from .datapipe import Scaler, features_to_signals
from .fractional import FracConfig, frac_update
from .metrics import MetricSet, aggregate, metric_table
from .tchebichef import TchebichefBasis

__all__ = ["TrainingDiverged", "History", "train_step", "train", "denoise_features", "evaluate_fragments"]

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)


def train_step(params: net.NetworkParams, arch: net.ArchSpec, x, y, cfg: FracConfig):
    """Forward, backward and fractional update on one batch.

    Returns ``(new_params, batch_loss)``; the loss is evaluated before the
    update and includes the L2 term.
    """
    pred, tape = net.forward(params, arch, x)
    value = net.loss(pred, y, params, cfg.lam)
    grads, _ = net.backward(tape, params, arch, net.loss_grad(pred, y))
    updated = [
        (name, frac_update(arr, grads[name], cfg, regularize=params.is_regularized(name)))
        for name, arr in params.items()
    ]
    return net.NetworkParams.from_items(updated), value


def train(
    params: net.NetworkParams,
    arch: net.ArchSpec,
    x_train,
    y_train,
    cfg: FracConfig,
    x_test=None,
    y_test=None,
    epoch_hook: Callable[[int, net.NetworkParams], net.NetworkParams] | None = None,
) -> tuple[net.NetworkParams, History]:
    """Train for ``cfg.epochs`` epochs over shuffled mini-batches.

    The recorded train loss of an epoch is the mean of its batch losses.
    ``epoch_hook(epoch, params)`` runs after each epoch's updates and may
    return replacement parameters (used for per-epoch compression).
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    history = History()
    n = x_train.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses, weights = [], []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            params, value = train_step(params, arch, x_train[idx], y_train[idx], cfg)
            losses.append(value)
            weights.append(idx.size)
        epoch_loss = float(np.average(losses, weights=weights))
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(f"loss became {epoch_loss} in epoch {epoch} (alpha={cfg.alpha})")
        if epoch_hook is not None:
            params = epoch_hook(epoch, params)
        history.train_loss.append(epoch_loss)
        if x_test is not None:
            pred = net.predict(params, arch, x_test)
            history.test_loss.append(net.loss(pred, y_test, params, cfg.lam))
        log.info(
            "epoch %d/%d train %.6f%s",
            epoch,
            cfg.epochs,
            epoch_loss,
            f" test {history.test_loss[-1]:.6f}" if history.test_loss else "",
        )
    return params, history


def denoise_features(params, arch, features, basis: TchebichefBasis, scaler: Scaler) -> np.ndarray:
    """Network output mapped back to spatial-domain fragments."""
    return features_to_signals(net.predict(params, arch, features), basis, scaler)


def evaluate_fragments(
    params, arch, noisy_features, clean_fragments, basis: TchebichefBasis, scaler: Scaler
) -> tuple[MetricSet, list[MetricSet]]:
    """Per-fragment metrics and their mean."""
    estimate = denoise_features(params, arch, noisy_features, basis, scaler)
    rows = metric_table(clean_fragments, estimate)
    return aggregate(rows), rows
