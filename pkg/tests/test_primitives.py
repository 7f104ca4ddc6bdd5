import math

import numpy as np
import pytest

from relunet import Layer, Network, depth, num_weights, realize
from relunet.analysis import count_slice_pieces, lp_error
from relunet.primitives import (Box, cutoff_array, cutoff_network, heaviside_network,
                                monomial_network, multiplication_network, polynomial_unit,
                                sawtooth_network, square_network)

from oracles import sawtooth, square_partial_sum


def test_heaviside_regimes():
    net = heaviside_network(2, 0.5)
    assert realize(net, [-0.1, 0.3])[0] == 0.0
    assert realize(net, [0.25, 0.0])[0] == 0.5
    assert realize(net, [0.6, -0.4])[0] == 1.0
    assert depth(net) == 2 and num_weights(net) == 5


def test_sawtooth_values_and_oracle():
    g = sawtooth_network(1)
    assert [realize(g, [x])[0] for x in (0.25, 0.5, 0.75)] == [0.5, 1.0, 0.5]
    assert realize(sawtooth_network(2), [0.25])[0] == 1.0
    x = np.linspace(0, 1, 1001)[:, None]
    for t in range(7):
        for block in (None, 2):
            net = sawtooth_network(t, block)
            assert np.allclose(realize(net, x)[:, 0], sawtooth(t, x[:, 0]), atol=1e-12)


def test_sawtooth_pieces():
    assert count_slice_pieces(sawtooth_network(3), [0.0], [1.0], (0.0, 1.0)) == 8


def test_square_network():
    x = np.linspace(0, 1, 10001)[:, None]
    for m in (1, 2, 3):
        for L in (1, 2):
            net = square_network(m, L)
            assert realize(net, [0.0])[0] == 0.0
            y = realize(net, x)[:, 0]
            assert np.allclose(y, square_partial_sum(m, x[:, 0]), atol=1e-12)
            assert np.max(np.abs(y - x[:, 0] ** 2)) <= 2.0 ** (-2 - 2 * m)
    assert realize(square_network(1, 1), [0.5])[0] == 0.25


def test_multiplication_examples():
    for M, L in [(1, 1), (2, 2)]:
        net = multiplication_network(M, 0.01, L)
        assert depth(net) == 2 * L + 8
        for x in (-1.0, 0.7, float(M)):
            assert realize(net, [x, 0.0])[0] == 0.0
            assert realize(net, [0.0, x])[0] == 0.0
    assert abs(realize(multiplication_network(2, 0.01, 2), [0.5, 0.5])[0] - 0.25) <= 0.01
    assert abs(realize(multiplication_network(2, 0.001, 2), [-1.3, 1.7])[0] + 2.21) <= 0.001
    with pytest.raises(ValueError, match="eps must be in"):
        multiplication_network(2, 0.6, 1)


def test_monomials():
    g = np.linspace(-0.5, 0.5, 101)
    X = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    assert np.all(realize(monomial_network((0, 0), 0.1, 1), X) == 1.0)
    assert np.array_equal(realize(monomial_network((0, 1), 0.1, 1), X)[:, 0], X[:, 1])
    err = np.abs(realize(monomial_network((2, 0), 0.05, 1), X)[:, 0] - X[:, 0] ** 2).max()
    assert err <= 0.05
    err = np.abs(realize(monomial_network((1, 2), 0.05, 2), X)[:, 0] - X[:, 0] * X[:, 1] ** 2).max()
    assert err <= 0.05


def test_polynomial_unit_examples():
    x = np.linspace(-0.5, 0.5, 201)[:, None]
    one = polynomial_unit({(0, (0,)): 1.0}, [[0.0]], 0.05, 2.0)
    assert np.abs(realize(one, x) - 1.0).max() <= 0.05
    sq = polynomial_unit({(0, (2,)): 1.0}, [[0.25]], 0.05, 3.0)
    assert abs(realize(sq, [0.25])[0]) <= 0.05
    assert abs(realize(sq, [-0.25])[0] - 0.25) <= 0.05


def test_polynomial_unit_shares_the_monomial_bank():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 0.5, size=(50, 1))
    coeffs1 = {(0, (1,)): 0.5, (0, (0,)): 0.25}
    coeffs50 = {(l, a): v for l in range(50) for (_, a), v in coeffs1.items()}
    M1 = num_weights(polynomial_unit(coeffs1, pts[:1], 0.05, 2.0))
    M50 = num_weights(polynomial_unit(coeffs50, pts, 0.05, 2.0))
    # additive growth: 49 extra outputs cost a bounded number of weights each
    assert M50 - M1 <= 49 * 8
    X = np.linspace(-0.5, 0.5, 101)[:, None]
    out = realize(polynomial_unit(coeffs50, pts, 0.05, 2.0), X)
    expect = 0.5 * (X - pts[:, 0][None, :]) + 0.25
    assert np.abs(out - expect).max() <= 0.05


def test_cutoff_network_regimes():
    box = Box((-0.25, -0.25), (0.25, 0.25))
    net = cutoff_network(box, 1, 0.1, 2)
    assert depth(net) == 4
    assert realize(net, [0.0, 0.0, 0.7])[0] == pytest.approx(0.7, abs=1e-12)
    assert realize(net, [0.45, 0.0, 0.7])[0] == 0.0
    rng = np.random.default_rng(1)
    X = np.hstack([rng.uniform(-0.5, 0.5, size=(100, 2)), rng.uniform(-1, 1, size=(100, 1))])
    assert np.all(np.abs(realize(net, X)[:, 0]) <= np.abs(X[:, 2]) + 1e-12)


def test_cutoff_degenerate_box_is_zero():
    net = cutoff_network(Box((0.1, -0.5), (0.1, 0.5)), 1, 0.1, 1)
    assert net.meta["degenerate"]
    assert num_weights(net) == 0


def _constant_net(d, values):
    m = len(values)
    return Network(d, [Layer.from_entries(m, d, [], [(i, v) for i, v in enumerate(values)])])


def test_cutoff_array():
    full = Box((-0.5, -0.5), (0.5, 0.5))
    phi = _constant_net(2, [0.5])
    psi = cutoff_array(phi, [full], 1, 0.1, 2)
    assert depth(psi) == 6 + depth(phi)
    err = lp_error(lambda X: np.full(len(X), 0.5), lambda X: realize(psi, X)[:, 0], 2, 2,
                   resolution=128)
    assert err.value <= 0.1
    boxes = [Box((-0.5, -0.5), (0.0, 0.5)), Box((0.0, -0.5), (0.5, 0.5))]
    psi = cutoff_array(_constant_net(2, [1.0, -1.0]), boxes, 1, 0.1, 2)
    assert realize(psi, [-0.25, 0.0])[0] == pytest.approx(1.0, abs=1e-12)
    assert realize(psi, [0.25, 0.0])[0] == pytest.approx(-1.0, abs=1e-12)
    assert realize(psi, [3.0, 0.0])[0] == 0.0


def test_cutoff_array_l2_against_indicator():
    boxes = [Box((-0.5,), (-0.1,)), Box((-0.1,), (0.3,))]
    phi = _constant_net(1, [1.0, 0.5])
    psi = cutoff_array(phi, boxes, 1, 0.05, 2)

    def target(X):
        x = X[:, 0]
        return np.where(x <= -0.1, 1.0, np.where(x <= 0.3, 0.5, 0.0))

    err = lp_error(target, lambda X: realize(psi, X)[:, 0], 2, 1, resolution=8192)
    assert err.value <= 0.05
    assert math.isfinite(err.value)
