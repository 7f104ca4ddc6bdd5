import io
import math

import numpy as np
import pytest

from relunet import Layer, Network
from relunet.analysis import (REPORT_COLUMNS, best_affine_error, count_slice_pieces,
                              depth_lower_bound, hf_distance_check, lp_error, piece_bound,
                              rate_fit, write_report)
from relunet.approximators import approximate_smooth
from relunet.network import depth, num_weights
from relunet.primitives import heaviside_network, sawtooth_network
from relunet.targets import trigonometric_target

from oracles import affine_projection_error


def test_lp_error_examples():
    f = lambda X: X[:, 0]
    assert lp_error(f, f, 2, 2, resolution=16).value == 0.0
    for p in (0.5, 1, 2, 3):
        e = lp_error(lambda X: np.ones(len(X)), lambda X: np.zeros(len(X)), p, 3, resolution=8)
        assert e.value == pytest.approx(1.0)
    e = lp_error(f, lambda X: np.zeros(len(X)), 2, 1, resolution=10000)
    assert abs(e.value - math.sqrt(1 / 12)) <= 1e-3
    assert e.method == "grid" and e.seed is None


def test_lp_error_monte_carlo_is_deterministic():
    f = lambda X: np.sin(X.sum(axis=1))
    g = lambda X: np.zeros(len(X))
    a = lp_error(f, g, 2, 5, seed=3, resolution=20000)
    b = lp_error(f, g, 2, 5, seed=3, resolution=20000)
    assert a == b and a.method == "monte_carlo"


def test_lp_error_monotone_in_p():
    f = lambda X: X[:, 0] * X[:, 1] + 0.3 * np.cos(5 * X[:, 0])
    g = lambda X: np.zeros(len(X))
    vals = [lp_error(f, g, p, 2, resolution=64).value for p in (0.5, 1, 2, 4)]
    assert all(a <= b * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


def test_rate_fit():
    eps = [0.1, 0.05, 0.01, 0.001]
    assert rate_fit([(e, e ** -2) for e in eps]) == pytest.approx(2.0, abs=1e-9)
    assert rate_fit([(e, 7 * e ** -1.5) for e in eps]) == pytest.approx(1.5, abs=1e-9)
    with pytest.raises(ValueError, match="need ≥3 points"):
        rate_fit([(0.1, 10)])


def test_rate_fit_on_smooth_sweep():
    f = trigonometric_target(1, 1 / math.pi ** 2, math.pi, beta=2.0)
    pts = [(e, num_weights(approximate_smooth(f, e, 2))) for e in (2.0 ** -k for k in range(3, 8))]
    assert rate_fit(pts) <= 0.75


def test_count_slice_pieces():
    affine = Network(2, [Layer.from_dense([[1.0, -2.0]], [0.5])])
    assert count_slice_pieces(affine, [0.0, 0.0], [0.6, 0.8], (-1, 1)) == 1
    relu = Network(1, [Layer.from_dense([[1.0]]), Layer.from_dense([[1.0]])])
    assert count_slice_pieces(relu, [0.0], [1.0], (-1, 1)) == 2
    assert count_slice_pieces(sawtooth_network(3), [0.0], [1.0], (0, 1)) == 8


def test_piece_bound():
    one = Network(3, [Layer.from_dense([[1.0, 2.0, 3.0]])])
    assert piece_bound(one) == 2 * (4 - 1)
    hv = heaviside_network(2, 0.25)
    assert piece_bound(hv) == 16
    assert count_slice_pieces(hv, [-0.5, 0.0], [1.0, 0.0], (0, 1)) <= 16
    for t in range(1, 7):
        g = sawtooth_network(t)
        assert count_slice_pieces(g, [0.0], [1.0], (0, 1)) == 2 ** t <= piece_bound(g)


def test_depth_lower_bound():
    assert depth_lower_bound(1) == 0.5
    assert depth_lower_bound(2 * (2 - 1) / 4) == 1.0
    f = trigonometric_target(2, 0.05, math.pi, beta=2.0)
    assert depth(approximate_smooth(f, 0.1, 2)) > depth_lower_bound(2 / 2.0)
    with pytest.raises(ValueError):
        depth_lower_bound(0)


def test_hf_distance_check_examples():
    g = lambda Y: 0.1 * Y[:, 0]
    assert hf_distance_check(g, g, 2, 2, 10000) == (0.0, 0.0)
    lhs, rhs = hf_distance_check(lambda Y: np.full(len(Y), 0.25), lambda Y: np.full(len(Y), -0.25),
                                 2, 2, 10 ** 6)
    assert abs(lhs - math.sqrt(0.5)) <= 0.01 and abs(rhs - math.sqrt(0.5)) <= 0.01
    lhs, rhs = hf_distance_check(g, lambda Y: np.zeros(len(Y)), 1, 2, 10 ** 6)
    assert abs(lhs - 0.025) <= 3e-3 and abs(rhs - 0.025) <= 3e-3


def test_best_affine_error():
    assert best_affine_error(lambda x: 3 * x - 1, 0, 1, 2) <= 1e-12
    assert best_affine_error(lambda x: 3 * x - 1, 0, 1, 1) <= 1e-6
    e = best_affine_error(lambda x: x ** 2, 0, 1, 2)
    assert abs(e - affine_projection_error(0, 1)) <= 1e-3
    assert abs(e - 1 / (6 * math.sqrt(5))) <= 1e-3
    for p in (1, 2, 3):
        e1 = best_affine_error(lambda x: x ** 2, 0, 1, p)
        for h in (0.5, 0.25):
            ratio = best_affine_error(lambda x: x ** 2, 0, h, p) / e1
            assert abs(ratio / h ** (2 + 1 / p) - 1) <= 0.1
    with pytest.raises(ValueError):
        best_affine_error(lambda x: x, 1, 1, 2)


def test_write_report():
    buf = io.StringIO()
    write_report([{"target_name": "t", "eps": 0.1, "M": 5}], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == REPORT_COLUMNS
    assert lines[1].startswith("t,0.1,")
