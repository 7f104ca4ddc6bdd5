import json

import numpy as np
import pytest

from relunet import Layer, Network, NetworkError, depth, num_neurons, num_weights, realize, validate
from relunet.calculus import identity_network
from relunet.network import check, from_dict, load_json, save_json, to_dict
from relunet.primitives import heaviside_network

from oracles import dense_realize, random_network


def relu_net():
    return Network(1, [Layer.from_dense([[1.0]]), Layer.from_dense([[1.0]])])


def test_single_layer_identity_is_affine():
    net = Network(2, [Layer.from_dense(np.eye(2))])
    assert np.array_equal(realize(net, [3.0, -4.0]), [3.0, -4.0])


def test_identity_network_realization():
    assert realize(identity_network(1, 2), [-5.0])[0] == -5.0


def test_relu_net():
    net = relu_net()
    assert realize(net, [-3.0])[0] == 0.0
    assert realize(net, [2.0])[0] == 2.0


def test_batch_matches_dense_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        net = random_network(rng, 3, int(rng.integers(1, 5)))
        X = rng.normal(size=(40, 3))
        assert np.allclose(realize(net, X), dense_realize(net, X), rtol=1e-12, atol=1e-12)


def test_realize_dimension_error_names_layer():
    with pytest.raises(NetworkError, match="layer 1"):
        realize(relu_net(), [1.0, 2.0])


def test_counts():
    assert num_weights(Network(2, [Layer.zero(1, 2)])) == 0
    assert num_weights(heaviside_network(2, 0.5)) == 5
    assert num_neurons(Network(2, [Layer.from_dense([[1.0, 2.0]])])) == 3
    assert num_neurons(heaviside_network(2, 0.25)) == 5
    assert num_neurons(identity_network(3, 2)) == 12
    assert depth(Network(2, [Layer.from_dense([[1.0, 2.0]])])) == 1
    assert depth(heaviside_network(3, 0.1)) == 2
    for d, L in [(1, 1), (2, 3), (3, 4)]:
        assert num_weights(identity_network(d, L)) <= 2 * d * L


def test_validate_ok_and_violations():
    assert validate(heaviside_network(2, 0.5)) == []
    bad = Network(2, [Layer.from_dense(np.ones((3, 2))), Layer.from_dense(np.ones((1, 4)))])
    v = validate(bad)
    assert len(v) == 1 and v[0].layer == 2
    zero = Layer(1, 2, [0], [1], [0.0], [], [])
    v = validate(Network(2, [zero]))
    assert len(v) == 1 and v[0].layer == 1
    with pytest.raises(NetworkError):
        check(bad)


def test_from_entries_rejects_zero_and_duplicates():
    with pytest.raises(NetworkError):
        Layer.from_entries(2, 2, [(0, 0, 0.0)])
    with pytest.raises(NetworkError):
        Layer.from_entries(2, 2, [(0, 0, 1.0), (0, 0, 2.0)])
    layer = Layer.from_entries(2, 2, [(1, 0, 2.0), (0, 1, 1.0)], [(1, 3.0)])
    assert list(layer.row_idx) == [0, 1] and layer.nnz == 3  # bias entries count as weights


def test_json_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    net = random_network(rng, 2, 3)
    path = tmp_path / "net.json"
    save_json(net, path)
    data = json.loads(path.read_text())
    assert set(data) == {"input_dim", "layers"}
    assert set(data["layers"][0]) == {"rows", "cols", "entries", "bias"}
    entries = data["layers"][0]["entries"]
    assert entries == sorted(entries)
    assert load_json(path) == net
    assert from_dict(to_dict(net)) == net
