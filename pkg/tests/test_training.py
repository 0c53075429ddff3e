import numpy as np
import pytest

from fracdenoise import datapipe as dp
from fracdenoise import network as net
from fracdenoise import training as tr
from fracdenoise.fractional import FracConfig
from fracdenoise.tchebichef import build_basis


@pytest.fixture
def problem():
    arch = net.ArchSpec.tiny(8)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((96, 8))
    y = 0.5 * x + 0.1 * rng.standard_normal((96, 8))
    return arch, x, y


@pytest.mark.parametrize("alpha", [0.9, 1.0, 1.2])
def test_loss_goes_down(problem, alpha):
    arch, x, y = problem
    cfg = FracConfig(alpha=alpha, eta=0.05, lam=1e-5, epochs=40, batch_size=16)
    _, hist = tr.train(net.init_params(arch, 0), arch, x, y, cfg)
    assert len(hist.train_loss) == 40
    assert hist.train_loss[-1] < 0.75 * hist.train_loss[0]


def test_deterministic(problem):
    arch, x, y = problem
    cfg = FracConfig(eta=0.05, epochs=3, batch_size=16)
    p1, h1 = tr.train(net.init_params(arch, 1), arch, x, y, cfg)
    p2, h2 = tr.train(net.init_params(arch, 1), arch, x, y, cfg)
    assert h1.train_loss == h2.train_loss
    for (_, a), (_, b) in zip(p1.items(), p2.items()):
        np.testing.assert_array_equal(a, b)


def test_test_loss_recorded(problem):
    arch, x, y = problem
    cfg = FracConfig(eta=0.05, epochs=2, batch_size=32)
    _, hist = tr.train(net.init_params(arch), arch, x[:64], y[:64], cfg, x[64:], y[64:])
    assert len(hist.test_loss) == 2


def test_hook_can_replace_params(problem):
    arch, x, y = problem
    seen = []

    def hook(epoch, params):
        seen.append(epoch)
        return net.NetworkParams.from_items([(n, np.zeros_like(a)) for n, a in params.items()])

    params, _ = tr.train(net.init_params(arch), arch, x, y, FracConfig(epochs=2, batch_size=48), epoch_hook=hook)
    assert seen == [1, 2]
    assert all(np.all(a == 0) for _, a in params.items())


def test_divergence_raises(problem):
    arch, x, y = problem
    cfg = FracConfig(alpha=1.0, eta=1e6, epochs=5, batch_size=16)
    with np.errstate(all="ignore"), pytest.raises(tr.TrainingDiverged):
        tr.train(net.init_params(arch), arch, 100 * x, y, cfg)


def test_step_loss_is_pre_update(problem):
    arch, x, y = problem
    params = net.init_params(arch, 2)
    cfg = FracConfig(eta=0.1, lam=1e-3)
    _, value = tr.train_step(params, arch, x, y, cfg)
    assert value == net.loss(net.predict(params, arch, x), y, params, cfg.lam)


def test_zero_network_predicts_mean_fragment():
    # Zero weights with fc.bias = 0 predict the feature mean, i.e. the scaler's
    # mean moments, so the estimate is the mean noisy fragment.
    arch = net.ArchSpec.tiny(8)
    basis = build_basis(8)
    rng = np.random.default_rng(3)
    clean = rng.standard_normal((10, 8))
    frags = dp.FragmentSet(clean, clean + 0.1, np.zeros(10, int), np.zeros(10, int))
    x, _, scaler = dp.prepare_features(frags, basis)
    zero = net.NetworkParams.from_items([(n, np.zeros_like(a)) for n, a in net.init_params(arch).items()])
    est = tr.denoise_features(zero, arch, x, basis, scaler)
    np.testing.assert_allclose(est, np.tile(frags.noisy.mean(axis=0), (10, 1)), atol=1e-12)
    agg, rows = tr.evaluate_fragments(zero, arch, x, clean, basis, scaler)
    assert len(rows) == 10 and np.isfinite(agg.snr_db)
