import csv

import numpy as np
import pytest

from fracdenoise import compression as cp
from fracdenoise import network as net
from fracdenoise.linalg import ContractError
from fracdenoise.lowrank import numerical_rank
from fracdenoise.metrics import MetricSet


@pytest.fixture(scope="module")
def params():
    return net.init_params(net.ArchSpec.default(), seed=0)


class TestRetainedRank:
    @pytest.mark.parametrize("rank,c_r,expected", [(250, 0.5, 125), (64, 0.0, 64), (10, 0.95, 1), (48, 0.25, 36), (5, 0.5, 3)])
    def test_values(self, rank, c_r, expected):
        assert cp.retained_rank(rank, c_r) == expected

    @pytest.mark.parametrize("c_r", [-0.1, 0.96, 1.0])
    def test_out_of_range(self, c_r):
        with pytest.raises(ContractError):
            cp.retained_rank(10, c_r)


def test_default_grid():
    grid = cp.default_cr_grid()
    assert len(grid) == 19 and grid[0] == 0.05 and grid[-1] == 0.95


def test_flat_rank_five_layer():
    a = np.zeros((64, 48))
    a[:5, :5] = np.eye(5)
    mat, full, opt = cp.optimize_layer(a)
    assert (full, opt) == (48, 5)
    np.testing.assert_allclose(mat, a, atol=1e-12)


def test_layer_matrix_round_trip(params):
    for layer, shape in [("conv2", (64, 48)), ("conv3", (64, 192)), ("fc", (250, 3968))]:
        m = cp.layer_matrix(params, layer)
        assert m.shape == shape
        back = cp.with_layer_matrix(params, layer, m)
        np.testing.assert_array_equal(back[cp._PARAM_NAME[layer]], params[cp._PARAM_NAME[layer]])


def test_unknown_layer(params):
    with pytest.raises(ContractError):
        cp.layer_matrix(params, "conv1")


def test_optimize_touches_only_listed_layers(params):
    out, ranks = cp.optimize_after_training(params, ["conv2"])
    assert ranks[0].layer == "conv2" and ranks[0].original_rank == 48
    assert numerical_rank(cp.layer_matrix(out, "conv2")) == ranks[0].optimized_rank
    for name, a in params.items():
        if name != "conv2.kernel":
            np.testing.assert_array_equal(out[name], a)


def test_zero_rate_leaves_optimized_layer(params):
    opt, ranks = cp.optimize_after_training(params, ["conv3"])
    out, r = cp.compress_at_rate(opt, "conv3", 0.0, ranks[0].optimized_rank)
    assert r == ranks[0].optimized_rank
    np.testing.assert_allclose(out["conv3.kernel"], opt["conv3.kernel"], atol=1e-10)


def test_rate_sets_rank(params):
    opt, ranks = cp.optimize_after_training(params, ["conv3"])
    out, r = cp.compress_at_rate(opt, "conv3", 0.5, ranks[0].optimized_rank)
    assert numerical_rank(cp.layer_matrix(out, "conv3")) == r == cp.retained_rank(ranks[0].optimized_rank, 0.5)


def test_sweep_and_report(params, tmp_path):
    opt, ranks = cp.optimize_after_training(params, ["conv2"])
    fake = lambda p: MetricSet(float(np.sum(p["conv2.kernel"] ** 2)), 0.5, 1.0, 0.1)
    rows = cp.sweep(opt, {r.layer: r.optimized_rank for r in ranks}, fake, 1.2, ["conv2"], [0.1, 0.5, 0.9])
    assert [row.c_r for row in rows] == [0.1, 0.5, 0.9]
    assert rows[0].metrics.snr_db > rows[-1].metrics.snr_db
    report = cp.CompressionReport(ranks, rows)
    report.write_metrics(tmp_path / "m.csv")
    report.write_ranks(tmp_path / "r.csv")
    table = list(csv.reader((tmp_path / "m.csv").open()))
    assert table[0] == list(cp.CompressionReport.METRIC_COLUMNS) and len(table) == 4
    assert list(csv.reader((tmp_path / "r.csv").open()))[1][:2] == ["", "conv2"]
