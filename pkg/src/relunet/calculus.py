"""Composition, parallelization and padding of networks.

Every operation builds its result layer by layer from the sparse matrices of
its arguments, so weight counts follow directly from the block structure.
"""

import math

import numpy as np
import scipy.sparse as sp

from .network import Layer, Network, NetworkError, depth


def _check_chain(first, second):
    if second.output_dim != first.input_dim:
        raise NetworkError(f"cannot compose: inner output dim {second.output_dim} "
                           f"!= outer input dim {first.input_dim}")


def concatenate(first, second):
    """first . second, merging the last layer of second into the first of first."""
    _check_chain(first, second)
    A1, b1 = first.layers[0].matrix, first.layers[0].bias
    AL, bL = second.layers[-1].matrix, second.layers[-1].bias
    mid = Layer.from_sparse(A1 @ AL, A1 @ bL + b1)
    layers = second.layers[:-1] + (mid,) + first.layers[1:]
    return Network(second.input_dim, layers)


def identity_network(d, L):
    """Network with L layers realizing the identity on R^d."""
    if d < 1 or L < 1:
        raise ValueError("identity_network needs d >= 1 and L >= 1")
    eye = sp.identity(d, format="csr")
    if L == 1:
        return Network(d, [Layer.from_sparse(eye)])
    layers = [Layer.from_sparse(sp.vstack([eye, -eye]))]
    layers += [Layer.from_sparse(sp.identity(2 * d, format="csr"))] * (L - 2)
    layers.append(Layer.from_sparse(sp.hstack([eye, -eye])))
    return Network(d, layers)


def sparse_concatenate(first, second):
    """first (.) second: composition through a doubled identity block.

    The last layer of second is stacked with its negative, and the first
    layer of first is applied to the difference of the two halves.
    """
    _check_chain(first, second)
    AL, bL = second.layers[-1].matrix, second.layers[-1].bias
    A1, b1 = first.layers[0].matrix, first.layers[0].bias
    doubled = Layer.from_sparse(sp.vstack([AL, -AL]), np.concatenate([bL, -bL]))
    split = Layer.from_sparse(sp.hstack([A1, -A1]), b1)
    layers = second.layers[:-1] + (doubled, split) + first.layers[1:]
    return Network(second.input_dim, layers)


def pad_depth(net, target_L):
    """Extend net to target_L layers by an identity network on the output side."""
    L = depth(net)
    if target_L < L:
        raise ValueError(f"cannot pad a depth-{L} network to depth {target_L}")
    if target_L == L:
        return net
    return sparse_concatenate(identity_network(net.output_dim, target_L - L), net)


def parallelize(first, second):
    """P(first, second): both realizations on the same input, outputs stacked."""
    return parallelize_many([first, second])


def parallelize_many(nets):
    """Parallelize a sequence of networks sharing one input.

    All nets are padded to the largest depth.  The first layers are stacked
    and the later layers placed block-diagonally, which gives the same network
    as the right-nested fold P(n1, P(n2, ...)).
    """
    nets = list(nets)
    if not nets:
        raise ValueError("parallelize needs at least one network")
    d = nets[0].input_dim
    for k, net in enumerate(nets):
        if net.input_dim != d:
            raise NetworkError(f"network {k} has input dim {net.input_dim}, expected {d}")
    if len(nets) == 1:
        return nets[0]
    L = max(depth(net) for net in nets)
    nets = [pad_depth(net, L) for net in nets]
    first = Layer.from_sparse(sp.vstack([n.layers[0].matrix for n in nets], format="csr"),
                              np.concatenate([n.layers[0].bias for n in nets]))
    layers = [first]
    for k in range(1, L):
        blocks = [n.layers[k] for n in nets]
        layers.append(Layer.from_sparse(block_diag([b.matrix for b in blocks]),
                                        np.concatenate([b.bias for b in blocks])))
    return Network(d, layers)


def block_diag(mats):
    """Block-diagonal CSR matrix (faster than scipy's for many small blocks)."""
    rows = np.array([m.shape[0] for m in mats], dtype=np.int64)
    cols = np.array([m.shape[1] for m in mats], dtype=np.int64)
    r_off = np.concatenate([[0], np.cumsum(rows)])
    c_off = np.concatenate([[0], np.cumsum(cols)])
    coos = [m.tocoo() for m in mats]
    r = np.concatenate([c.row.astype(np.int64) + r_off[k] for k, c in enumerate(coos)])
    c = np.concatenate([c.col.astype(np.int64) + c_off[k] for k, c in enumerate(coos)])
    v = np.concatenate([c.data for c in coos])
    return sp.csr_matrix((v, (r, c)), shape=(int(r_off[-1]), int(c_off[-1])))


def parallelize_separate(nets):
    """Networks on separate inputs: x = (x_1, ..., x_k) -> (net_1(x_1), ...).

    Each net is composed with the coordinate selection of its input block and
    the results are parallelized on the joint input.
    """
    nets = list(nets)
    total = sum(n.input_dim for n in nets)
    parts, off = [], 0
    for n in nets:
        sel = sp.csr_matrix((np.ones(n.input_dim),
                             (np.arange(n.input_dim), off + np.arange(n.input_dim))),
                            shape=(n.input_dim, total))
        parts.append(concatenate(n, Network(total, [Layer.from_sparse(sel)])))
        off += n.input_dim
    return parallelize_many(parts)


def linear_network(matrix, bias=None):
    """Single affine layer x -> A x + b."""
    a = sp.csr_matrix(np.atleast_2d(matrix) if not sp.issparse(matrix) else matrix)
    return Network(a.shape[1], [Layer.from_sparse(a, bias)])


def clamp_layers(k, B):
    """Two-layer network realizing tau_B componentwise on R^k."""
    c = float(math.ceil(B))
    i = np.arange(k)
    A1 = sp.csr_matrix((np.ones(2 * k), (np.concatenate([2 * i, 2 * i + 1]),
                                         np.concatenate([i, i]))), shape=(2 * k, k))
    b1 = np.tile([c, -c], k)
    A2 = sp.csr_matrix((np.concatenate([np.ones(k), -np.ones(k)]),
                        (np.concatenate([i, i]), np.concatenate([2 * i, 2 * i + 1]))),
                       shape=(k, 2 * k))
    b2 = np.full(k, -c)
    return Network(k, [Layer.from_sparse(A1, b1), Layer.from_sparse(A2, b2)])


def clamp_network(net, B):
    """tau_B after net, where tau_B(y) = sign(y) min(|y|, ceil(B)).

    tau_B(y) = relu(y + c) - relu(y - c) - c with c = ceil(B).
    """
    if not B > 0:
        raise ValueError("clamp bound B must be positive")
    return sparse_concatenate(clamp_layers(net.output_dim, B), net)


def lipschitz_log2(net):
    """log2 of the product of the layer infinity-norms (max absolute row sum)."""
    total = 0.0
    for layer in net.layers:
        rs = np.asarray(abs(layer.matrix).sum(axis=1)).ravel()
        norm = rs.max() if rs.size else 0.0
        if norm == 0:
            return -math.inf
        total += math.log2(norm)
    return total
