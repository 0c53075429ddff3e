import logging

import numpy as np
import pytest
from scipy import stats

from fracdenoise import datapipe as dp
from fracdenoise.linalg import ContractError
from fracdenoise.tchebichef import build_basis


def band_fraction(x, fs, lo, hi):
    power = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1.0 / fs)
    return power[(f >= lo) & (f <= hi)].sum() / power.sum()


@pytest.fixture(scope="module")
def corpus():
    clean, noise = dp.synth_corpus(20, 1000, seed=0)
    return dp.make_noisy_corpus(clean, noise, 0.0, seed=1)


class TestSynth:
    def test_deterministic(self):
        a = dp.synth_corpus(4, 500, seed=7)
        b = dp.synth_corpus(4, 500, seed=7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_seed_changes_output(self):
        assert not np.array_equal(dp.synth_corpus(2, 200, seed=1)[0], dp.synth_corpus(2, 200, seed=2)[0])

    def test_shapes(self):
        clean, noise = dp.synth_corpus(3, 400)
        assert clean.shape == noise.shape == (3, 400)

    def test_clean_spectrum_below_50hz(self):
        clean, _ = dp.synth_corpus(30, 2000, seed=3)
        for x in clean:
            assert band_fraction(x, 200.0, 50.0, 100.0) < 0.05

    def test_noise_spectrum_above_15hz(self):
        _, noise = dp.synth_corpus(30, 2000, seed=4)
        for z in noise:
            assert band_fraction(z, 200.0, 0.0, 15.0) < 0.10


class TestMix:
    def test_zero_db(self):
        rng = np.random.default_rng(0)
        x, z = rng.standard_normal(500), rng.standard_normal(500)
        d = dp.mix_noise(x, z, 0.0) - x
        assert abs(x @ x - d @ d) / (x @ x) < 1e-9

    def test_huge_snr_returns_clean(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(500)
        np.testing.assert_allclose(dp.mix_noise(x, rng.standard_normal(500), 1e6), x, atol=1e-10)

    @pytest.mark.parametrize("target", [-5.0, 0.0, 3.0, 12.5])
    def test_measured_snr(self, target):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(400)
        d = dp.mix_noise(x, rng.standard_normal(900), target, seed=3) - x
        assert abs(10 * np.log10((x @ x) / (d @ d)) - target) < 1e-6

    def test_short_noise_wraps(self):
        x = np.ones(10)
        y = dp.mix_noise(x, np.array([1.0, -1.0, 1.0]), 0.0, seed=0)
        assert y.shape == (10,)

    def test_zero_energy(self):
        with pytest.raises(ContractError):
            dp.mix_noise(np.zeros(5), np.ones(5), 0.0)

    def test_corpus_records_input_snr(self, corpus):
        np.testing.assert_allclose(corpus.input_snr_db, 0.0, atol=1e-6)
        assert len(corpus) == 20


class TestSplit:
    def test_eighty_twenty_without_leakage(self):
        train, test = dp.split_by_signal(200, 0.2, seed=0)
        assert (train.size, test.size) == (160, 40)
        assert not set(train) & set(test)
        assert sorted(set(train) | set(test)) == list(range(200))

    def test_fragments_stay_in_their_split(self, corpus):
        train, test = dp.split_by_signal(len(corpus), 0.2, seed=1)
        frags = dp.fragment_augment(corpus.subset(test), 250, 100, seed=0)
        for f, s, o in zip(frags.clean, frags.source, frags.offset):
            np.testing.assert_array_equal(f, corpus.clean[test[s]][o : o + 250])


class TestFragments:
    def test_single_valid_offset(self):
        c = dp.Corpus([np.arange(250.0)], [np.arange(250.0) + 1])
        frags = dp.fragment_augment(c, 250, 5, seed=0)
        np.testing.assert_array_equal(frags.offset, 0)
        np.testing.assert_array_equal(frags.clean, np.tile(np.arange(250.0), (5, 1)))

    def test_pairs_share_offset(self, corpus):
        frags = dp.fragment_augment(corpus, 250, 50, seed=2)
        for k in range(50):
            s, o = frags.source[k], frags.offset[k]
            np.testing.assert_array_equal(frags.noisy[k], corpus.noisy[s][o : o + 250])
            np.testing.assert_array_equal(frags.clean[k], corpus.clean[s][o : o + 250])

    def test_deterministic(self, corpus):
        a = dp.fragment_augment(corpus, 250, 300, seed=5)
        b = dp.fragment_augment(corpus, 250, 300, seed=5)
        np.testing.assert_array_equal(a.noisy, b.noisy)
        np.testing.assert_array_equal(a.offset, b.offset)

    def test_offsets_uniform(self):
        # 1000 valid offsets fall into 10 equal bins.
        c = dp.Corpus([np.zeros(1249)], [np.zeros(1249)])
        frags = dp.fragment_augment(c, 250, 20000, seed=0)
        counts = np.bincount(frags.offset // 100, minlength=10)
        assert counts.size == 10
        assert stats.chisquare(counts).pvalue > 0.01

    def test_short_signals_skipped(self, caplog):
        c = dp.Corpus([np.zeros(100), np.zeros(300)], [np.zeros(100), np.zeros(300)])
        with caplog.at_level(logging.WARNING):
            frags = dp.fragment_augment(c, 250, 10, seed=0)
        assert frags.skipped == 1 and np.all(frags.source == 1)
        assert "skipped 1" in caplog.text

    def test_no_usable_signal(self):
        with pytest.raises(ContractError):
            dp.fragment_augment(dp.Corpus([np.zeros(10)], [np.zeros(10)]), 250, 1)

    def test_tiles_cover_signal(self, corpus):
        frags = dp.fragment_tiles(corpus.subset([0]), 250)
        assert len(frags) == 4
        np.testing.assert_array_equal(frags.clean.ravel(), corpus.clean[0])


@pytest.fixture(scope="module")
def prepared(corpus):
    frags = dp.fragment_augment(corpus, 250, 400, seed=3)
    basis = build_basis(250)
    x, y, scaler = dp.prepare_features(frags, basis)
    return frags, basis, x, y, scaler


class TestFeatures:
    def test_standardized(self, prepared):
        _, _, x, _, _ = prepared
        assert np.max(np.abs(x.mean(axis=0))) < 1e-10
        assert np.max(np.abs(x.std(axis=0) - 1.0)) < 1e-10

    def test_apply_is_idempotent(self, prepared):
        frags, basis, x, y, scaler = prepared
        x2, y2, _ = dp.prepare_features(frags, basis, scaler, "apply")
        assert np.max(np.abs(x2 - x)) < 1e-12 and np.max(np.abs(y2 - y)) < 1e-12

    def test_inverse_path(self, prepared):
        frags, basis, x, y, scaler = prepared
        assert np.max(np.abs(dp.features_to_signals(x, basis, scaler) - frags.noisy)) < 1e-8
        assert np.max(np.abs(dp.features_to_signals(y, basis, scaler) - frags.clean)) < 1e-8

    def test_apply_needs_scaler(self, prepared):
        frags, basis, *_ = prepared
        with pytest.raises(ContractError):
            dp.prepare_features(frags, basis, None, "apply")

    def test_basis_length_mismatch(self, prepared):
        frags = prepared[0]
        with pytest.raises(ContractError):
            dp.prepare_features(frags, build_basis(16))

    def test_std_floor(self):
        s = dp.Scaler.fit(np.ones((5, 3)))
        assert np.all(s.std == dp.SCALER_STD_FLOOR)


class TestTiling:
    @pytest.mark.parametrize("n", [1, 249, 250, 251, 1000])
    def test_round_trip(self, n):
        x = np.arange(float(n))
        tiles, length = dp.tile_signal(x, 250)
        assert tiles.shape == (-(-n // 250), 250)
        np.testing.assert_array_equal(dp.untile_signal(tiles, length), x)

    def test_zero_padded(self):
        tiles, _ = dp.tile_signal(np.ones(260), 250)
        np.testing.assert_array_equal(tiles[1, 10:], 0.0)


class TestIO:
    def test_round_trip_ragged(self, tmp_path):
        sigs = [np.array([0.1, -2.5, 1e-17]), np.array([3.0])]
        dp.write_signals(tmp_path / "s.csv", sigs)
        back = dp.read_signals(tmp_path / "s.csv")
        assert len(back) == 2
        for a, b in zip(sigs, back):
            np.testing.assert_array_equal(a, b)

    def test_bad_value_reports_location(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1.0,2.0\n3.0,oops\n")
        with pytest.raises(ValueError, match="bad.csv:2"):
            dp.read_signals(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError, match="missing.csv"):
            dp.read_signals(tmp_path / "missing.csv")


def test_signal_rejects_non_finite():
    with pytest.raises(ContractError):
        dp.Signal(np.array([1.0, np.inf]))
