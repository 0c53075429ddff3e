"""Signal corpora, noise mixing, fragmenting and moment-domain features.

Clean signals and artifact-noise signals are plain 1-D arrays. A corpus is
a pair of equally long lists (``clean[i]`` is contaminated by ``noise[i]``).
Randomness always flows from an explicit integer seed; per-signal work uses
independent child streams so results do not depend on processing order.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import ContractError
from .tchebichef import TchebichefBasis, forward as tm_forward, inverse as tm_inverse

__all__ = [
    "Signal",
    "Corpus",
    "FragmentSet",
    "Scaler",
    "SCALER_STD_FLOOR",
    "synth_corpus",
    "mix_noise",
    "make_noisy_corpus",
    "split_by_signal",
    "fragment_augment",
    "fragment_tiles",
    "prepare_features",
    "features_to_signals",
    "tile_signal",
    "untile_signal",
    "read_signals",
    "write_signals",
]

log = logging.getLogger(__name__)

SCALER_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    sample_rate: float = 200.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or not np.all(np.isfinite(s)):
            raise ContractError("signal samples must be a finite 1-D array")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class Corpus:
    clean: list[np.ndarray]
    noisy: list[np.ndarray]
    sample_rate: float = 200.0
    input_snr_db: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clean)

    def subset(self, ids) -> "Corpus":
        ids = list(ids)
        snr = [self.input_snr_db[i] for i in ids] if self.input_snr_db else []
        return Corpus(
            [self.clean[i] for i in ids], [self.noisy[i] for i in ids], self.sample_rate, snr
        )


@dataclass
class FragmentSet:
    clean: np.ndarray
    noisy: np.ndarray
    source: np.ndarray
    offset: np.ndarray
    skipped: int = 0

    def __len__(self) -> int:
        return self.clean.shape[0]


# -- synthetic corpus ---------------------------------------------------------


def _child_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _clean_signal(rng: np.random.Generator, length: int, fs: float) -> np.ndarray:
    t = np.arange(length) / fs
    n_tones = int(rng.integers(3, 9))
    freqs = rng.uniform(0.5, 40.0, n_tones)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_tones)
    amps = 1.0 / freqs
    return np.sum(amps[:, None] * np.sin(2.0 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)


def _bandlimit(x: np.ndarray, fs: float, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / fs)
    spec[(f < lo) | (f > hi)] = 0.0
    return np.fft.irfft(spec, n=x.size)


def _emg_surrogate(rng: np.random.Generator, length: int, fs: float) -> np.ndarray:
    white = rng.standard_normal(length)
    envelope = np.full(length, 0.2)
    for _ in range(int(rng.integers(2, 7))):
        width = int(rng.uniform(0.2, 1.0) * fs)
        start = int(rng.integers(-width // 2, length))
        lo, hi = max(start, 0), min(start + width, length)
        if hi > lo:
            window = np.hanning(width)[lo - start : hi - start]
            envelope[lo:hi] += rng.uniform(0.5, 2.0) * window
    # Filtering after the envelope keeps the spectrum strictly in band.
    return _bandlimit(white * envelope, fs, 20.0, 90.0)


def synth_corpus(n_signals: int, length: int = 2000, seed: int = 0, fs: float = 200.0):
    """Seeded clean/noise signal pairs standing in for recorded EEG and EMG.

    Clean signals are sums of 3-8 sinusoids in 0.5-40 Hz with amplitude
    ``1/f``. Noise signals are bursty white noise band-limited to 20-90 Hz.
    Returns ``(clean, noise)`` as arrays of shape ``(n_signals, length)``.
    """
    rngs = _child_rngs(seed, 2 * n_signals)
    clean = np.stack([_clean_signal(rngs[i], length, fs) for i in range(n_signals)])
    noise = np.stack([_emg_surrogate(rngs[n_signals + i], length, fs) for i in range(n_signals)])
    return clean, noise


# -- mixing -------------------------------------------------------------------


def mix_noise(clean, noise, target_snr_db: float, seed: int = 0) -> np.ndarray:
    """Add ``noise`` to ``clean`` scaled to the requested SNR in dB.

    A longer noise record is cropped at a random offset; a shorter one is
    wrapped around.
    """
    x = clean.samples if isinstance(clean, Signal) else np.asarray(clean, dtype=np.float64)
    z = noise.samples if isinstance(noise, Signal) else np.asarray(noise, dtype=np.float64)
    if z.size != x.size:
        rng = np.random.default_rng(seed)
        start = int(rng.integers(0, z.size))
        z = np.take(z, np.arange(start, start + x.size), mode="wrap")
    ex = float(x @ x)
    ez = float(z @ z)
    if ex <= 0.0 or ez <= 0.0:
        raise ContractError("clean and noise signals must have non-zero energy")
    # Amplitude form: a huge target underflows to zero gain instead of overflowing.
    gain = np.sqrt(ex / ez) * 10.0 ** (-target_snr_db / 20.0)
    return x + gain * z


def make_noisy_corpus(clean, noise, snr_db: float = 0.0, seed: int = 0, sample_rate: float = 200.0) -> Corpus:
    """Pair every clean signal with a randomly chosen noise record and mix."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(noise), size=len(clean))
    mix_seeds = rng.integers(0, 2**31, size=len(clean))
    noisy, measured = [], []
    for c, k, s in zip(clean, picks, mix_seeds):
        y = mix_noise(c, noise[k], snr_db, int(s))
        c = np.asarray(c, dtype=np.float64)
        noisy.append(y)
        d = y - c
        measured.append(10.0 * np.log10(float(c @ c) / float(d @ d)))
    return Corpus([np.asarray(c, dtype=np.float64) for c in clean], noisy, sample_rate, measured)


def split_by_signal(n_signals: int, test_fraction: float = 0.2, seed: int = 0):
    """Shuffle signal indices and split them; fragments never cross the split."""
    order = np.random.default_rng(seed).permutation(n_signals)
    n_test = int(round(test_fraction * n_signals))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


# -- fragments ----------------------------------------------------------------


def fragment_augment(corpus: Corpus, fragment_len: int = 250, target_count: int = 20000, seed: int = 0) -> FragmentSet:
    """Draw ``target_count`` fragments at uniformly random offsets.

    The source signal is picked uniformly among signals long enough to hold
    a fragment; clean and noisy fragments share the offset.
    """
    lengths = np.array([len(c) for c in corpus.clean])
    usable = np.flatnonzero(lengths >= fragment_len)
    skipped = len(corpus) - usable.size
    if skipped:
        log.warning("skipped %d signals shorter than %d samples", skipped, fragment_len)
    if usable.size == 0:
        raise ContractError(f"no signal holds a {fragment_len}-sample fragment")
    rng = np.random.default_rng(seed)
    src = usable[rng.integers(0, usable.size, size=target_count)]
    offsets = np.floor(rng.random(target_count) * (lengths[src] - fragment_len + 1)).astype(int)
    idx = offsets[:, None] + np.arange(fragment_len)
    clean = np.stack([corpus.clean[s][i] for s, i in zip(src, idx)]) if target_count else np.zeros((0, fragment_len))
    noisy = np.stack([corpus.noisy[s][i] for s, i in zip(src, idx)]) if target_count else np.zeros((0, fragment_len))
    return FragmentSet(clean, noisy, src, offsets, skipped)


def fragment_tiles(corpus: Corpus, fragment_len: int = 250) -> FragmentSet:
    """Non-overlapping fragments covering each signal (trailing remainder dropped)."""
    clean, noisy, src, off = [], [], [], []
    skipped = 0
    for s, (c, y) in enumerate(zip(corpus.clean, corpus.noisy)):
        n = len(c) // fragment_len
        if n == 0:
            skipped += 1
        for k in range(n):
            sl = slice(k * fragment_len, (k + 1) * fragment_len)
            clean.append(c[sl])
            noisy.append(y[sl])
            src.append(s)
            off.append(k * fragment_len)
    if not clean:
        raise ContractError(f"no signal holds a {fragment_len}-sample fragment")
    return FragmentSet(np.stack(clean), np.stack(noisy), np.array(src), np.array(off), skipped)


# -- features -----------------------------------------------------------------


@dataclass
class Scaler:
    """Per-feature standardization ``(x - mean) / std``."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x) -> "Scaler":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ContractError("scaler needs a non-empty 2-D sample matrix")
        return cls(x.mean(axis=0), np.maximum(x.std(axis=0), SCALER_STD_FLOOR))

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


def prepare_features(fragments: FragmentSet, basis: TchebichefBasis, scaler: Scaler | None = None, mode: str = "fit"):
    """Moments of both fragment sets, standardized with one shared scaler.

    In ``fit`` mode the scaler is fitted to the noisy (input) moments of
    ``fragments``; in ``apply`` mode ``scaler`` must be given. Returns
    ``(noisy_features, clean_features, scaler)``.
    """
    if basis.length != fragments.clean.shape[1]:
        raise ContractError(
            f"basis length {basis.length} != fragment length {fragments.clean.shape[1]}"
        )
    noisy_m = tm_forward(basis, fragments.noisy)
    clean_m = tm_forward(basis, fragments.clean)
    if mode == "fit":
        scaler = Scaler.fit(noisy_m)
    elif mode == "apply":
        if scaler is None:
            raise ContractError("apply mode requires a fitted scaler")
    else:
        raise ContractError(f"unknown scaler mode {mode!r}")
    return scaler.transform(noisy_m), scaler.transform(clean_m), scaler


def features_to_signals(features, basis: TchebichefBasis, scaler: Scaler) -> np.ndarray:
    """Undo standardization and the moment transform."""
    return tm_inverse(basis, scaler.inverse_transform(features))


def tile_signal(x, fragment_len: int = 250) -> tuple[np.ndarray, int]:
    """Split a signal into non-overlapping tiles, zero-padding the last one."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n_tiles = max(1, -(-x.size // fragment_len))
    padded = np.zeros(n_tiles * fragment_len)
    padded[: x.size] = x
    return padded.reshape(n_tiles, fragment_len), x.size


def untile_signal(tiles, length: int) -> np.ndarray:
    return np.asarray(tiles).reshape(-1)[:length]


# -- delimited text I/O -------------------------------------------------------


def read_signals(path, delimiter: str = ",") -> list[np.ndarray]:
    """One signal per row of decimal floats; rows may differ in length."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(v.strip() for v in r)]
    except OSError as exc:
        raise OSError(f"cannot read signals from {path}: {exc}") from exc
    out = []
    for lineno, row in enumerate(rows, start=1):
        try:
            out.append(np.array([float(v) for v in row if v.strip()], dtype=np.float64))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_signals(path, signals, delimiter: str = ",") -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            for s in signals:
                w.writerow([repr(float(v)) for v in np.asarray(s).ravel()])
    except OSError as exc:
        raise OSError(f"cannot write signals to {path}: {exc}") from exc
