"""The experiment protocol as library calls.

Data preparation, training with optional per-epoch rank optimization,
fragment evaluation, whole-signal denoising and the compression sweep.
The command-line front end in :mod:`fracdenoise.cli` is a thin layer over
these functions.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import compression as cp
from . import datapipe as dp
from . import network as net
from .fractional import FracConfig
from .lowrank import RsvdConfig
from .metrics import MetricSet, aggregate, metric_table
from .tchebichef import TchebichefBasis, build_basis, forward as tm_forward
from .training import History, denoise_features, train

__all__ = [
    "RANK_OPT_MODES",
    "Seeds",
    "DataConfig",
    "Prepared",
    "TrainResult",
    "save_corpus",
    "load_corpus",
    "synthetic_corpus",
    "prepare_data",
    "prepare_test",
    "train_model",
    "evaluate_model",
    "input_quality",
    "denoise_signal",
    "compression_sweep",
    "config_dict",
]

log = logging.getLogger(__name__)

RANK_OPT_MODES = ("epoch", "final", "none")


@dataclass(frozen=True)
class Seeds:
    """Independent seeds for every random step, derived from one integer."""

    corpus: int
    mix: int
    split: int
    fragments: int
    init: int
    shuffle: int
    rsvd: int

    @classmethod
    def derive(cls, seed: int) -> "Seeds":
        state = np.random.SeedSequence(seed).generate_state(7)
        return cls(*(int(s) for s in state))


@dataclass(frozen=True)
class DataConfig:
    fragment_len: int = 250
    n_fragments: int = 20000
    test_fraction: float = 0.2


@dataclass
class Prepared:
    basis: TchebichefBasis
    scaler: dp.Scaler
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    test_fragments: dp.FragmentSet
    train_ids: np.ndarray
    test_ids: np.ndarray


@dataclass
class TrainResult:
    params: net.NetworkParams
    history: History
    ranks: list[cp.LayerRank] = field(default_factory=list)


# -- corpus files -------------------------------------------------------------


def save_corpus(directory, corpus: dp.Corpus, manifest: dict) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dp.write_signals(d / "clean.csv", corpus.clean)
    dp.write_signals(d / "noisy.csv", corpus.noisy)
    manifest = {**manifest, "measured_snr_db": [float(v) for v in corpus.input_snr_db]}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_corpus(directory, sample_rate: float | None = None) -> dp.Corpus:
    d = Path(directory)
    clean = dp.read_signals(d / "clean.csv")
    noisy = dp.read_signals(d / "noisy.csv")
    if len(clean) != len(noisy):
        raise ValueError(f"{d}: {len(clean)} clean signals but {len(noisy)} noisy ones")
    for i, (c, y) in enumerate(zip(clean, noisy)):
        if c.size != y.size:
            raise ValueError(f"{d}: signal {i} has clean length {c.size} and noisy length {y.size}")
    manifest = {}
    if (d / "manifest.json").exists():
        manifest = json.loads((d / "manifest.json").read_text())
    rate = sample_rate or manifest.get("sample_rate", 200.0)
    snr = []
    for c, y in zip(clean, noisy):
        e = y - c
        snr.append(10.0 * np.log10((c @ c) / (e @ e)) if e @ e > 0 else float("inf"))
    return dp.Corpus(clean, noisy, float(rate), snr)


def synthetic_corpus(n_signals: int, length: int, snr_db: float, seeds: Seeds, fs: float = 200.0) -> dp.Corpus:
    clean, noise = dp.synth_corpus(n_signals, length, seeds.corpus, fs)
    return dp.make_noisy_corpus(clean, noise, snr_db, seeds.mix, fs)


# -- training and evaluation --------------------------------------------------


def prepare_data(corpus: dp.Corpus, cfg: DataConfig, seeds: Seeds) -> Prepared:
    """Split by signal, draw training fragments, tile the test signals and
    standardize both with a scaler fitted on the training inputs."""
    train_ids, test_ids = dp.split_by_signal(len(corpus), cfg.test_fraction, seeds.split)
    train_frags = dp.fragment_augment(corpus.subset(train_ids), cfg.fragment_len, cfg.n_fragments, seeds.fragments)
    test_frags = dp.fragment_tiles(corpus.subset(test_ids), cfg.fragment_len)
    basis = build_basis(cfg.fragment_len)
    x_train, y_train, scaler = dp.prepare_features(train_frags, basis)
    x_test, y_test, _ = dp.prepare_features(test_frags, basis, scaler, "apply")
    return Prepared(basis, scaler, x_train, y_train, x_test, y_test, test_frags, train_ids, test_ids)


def prepare_test(corpus: dp.Corpus, test_ids, fragment_len: int, scaler: dp.Scaler) -> Prepared:
    """Held-out tiles only, standardized with an already fitted scaler."""
    test_ids = np.asarray(test_ids, dtype=int)
    test_frags = dp.fragment_tiles(corpus.subset(test_ids), fragment_len)
    basis = build_basis(fragment_len)
    x_test, y_test, _ = dp.prepare_features(test_frags, basis, scaler, "apply")
    empty = np.zeros((0, fragment_len))
    return Prepared(basis, scaler, empty, empty, x_test, y_test, test_frags, np.zeros(0, int), test_ids)


def train_model(
    data: Prepared,
    arch: net.ArchSpec,
    cfg: FracConfig,
    rank_opt: str = "epoch",
    init: str = "glorot",
    seeds: Seeds | None = None,
) -> TrainResult:
    """Train from a seeded init.

    ``rank_opt`` places the optimized-rank step: after every epoch
    (``"epoch"``), once after the last epoch (``"final"``) or never.
    """
    if rank_opt not in RANK_OPT_MODES:
        raise ValueError(f"rank_opt must be one of {RANK_OPT_MODES}, got {rank_opt!r}")
    seeds = seeds or Seeds.derive(cfg.seed)
    rcfg = RsvdConfig(rank=1, seed=seeds.rsvd)
    ranks: list[cp.LayerRank] = []

    def hook(epoch, params):
        if rank_opt == "epoch" or (rank_opt == "final" and epoch == cfg.epochs):
            params, found = cp.optimize_after_training(params, cp.COMPRESSIBLE_LAYERS, rcfg)
            ranks[:] = found
            log.info("epoch %d optimized ranks %s", epoch, {r.layer: r.optimized_rank for r in found})
        return params

    params = net.init_params(arch, seeds.init, init)
    shuffled = FracConfig(**{**cfg.to_dict(), "seed": seeds.shuffle})
    params, history = train(params, arch, data.x_train, data.y_train, shuffled, data.x_test, data.y_test, hook)
    return TrainResult(params, history, ranks)


def input_quality(fragments: dp.FragmentSet) -> tuple[MetricSet, list[MetricSet]]:
    """Metrics of the noisy fragments themselves, the baseline to beat."""
    rows = metric_table(fragments.clean, fragments.noisy)
    return aggregate(rows), rows


def evaluate_model(params, arch, data: Prepared) -> tuple[MetricSet, list[MetricSet]]:
    estimate = denoise_features(params, arch, data.x_test, data.basis, data.scaler)
    rows = metric_table(data.test_fragments.clean, estimate)
    return aggregate(rows), rows


def denoise_signal(params, arch, basis: TchebichefBasis, scaler: dp.Scaler, signal) -> np.ndarray:
    """Denoise a signal of any length by non-overlapping tiles."""
    tiles, length = dp.tile_signal(signal, basis.length)
    features = scaler.transform(tm_forward(basis, tiles))
    return dp.untile_signal(denoise_features(params, arch, features, basis, scaler), length)


def compression_sweep(
    params_opt,
    arch,
    data: Prepared,
    ranks: dict[str, int],
    alpha: float,
    layers=cp.COMPRESSIBLE_LAYERS,
    cr_grid=None,
    seed: int = 0,
) -> list[cp.SweepRow]:
    def score(p):
        return evaluate_model(p, arch, data)[0]

    return cp.sweep(params_opt, ranks, score, alpha, layers, cr_grid, RsvdConfig(rank=1, seed=seed))


def config_dict(**parts) -> dict:
    out = {}
    for key, value in parts.items():
        if hasattr(value, "to_dict"):
            value = value.to_dict()
        elif hasattr(value, "__dataclass_fields__"):
            value = asdict(value)
        out[key] = value
    return out
