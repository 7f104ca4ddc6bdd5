"""Sparse ReLU networks: storage, realization and complexity counts.

A network is a sequence of affine layers (A_l, b_l).  The realization applies
the ReLU after every layer except the last one, which stays affine.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# evaluation works on blocks of points so that the widest hidden layer times
# the block size stays below this many float64 values
_CHUNK_BUDGET = 2_000_000


class NetworkError(ValueError):
    """Raised for malformed networks or inputs of the wrong size."""


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


class Layer:
    """One affine layer with a sparse matrix and a sparse bias.

    Entries are kept as coordinate lists sorted by (row, col).  The public
    constructors reject or drop zero values, so the number of stored entries
    is the l0 norm of the layer.
    """

    __slots__ = ("rows", "cols", "row_idx", "col_idx", "values",
                 "bias_idx", "bias_values", "_csr", "_bias_dense")

    def __init__(self, rows, cols, row_idx, col_idx, values, bias_idx, bias_values):
        # raw constructor: arrays are stored as given (see validate)
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_idx = _frozen(row_idx, np.int64)
        self.col_idx = _frozen(col_idx, np.int64)
        self.values = _frozen(values, np.float64)
        self.bias_idx = _frozen(bias_idx, np.int64)
        self.bias_values = _frozen(bias_values, np.float64)
        self._csr = None
        self._bias_dense = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_entries(cls, rows, cols, entries=(), bias=()):
        """Build from (i, j, value) triples and (i, value) pairs.

        Zero values are rejected, as are duplicate positions.
        """
        ent = np.asarray(list(entries), dtype=np.float64).reshape(-1, 3)
        bia = np.asarray(list(bias), dtype=np.float64).reshape(-1, 2)
        if np.any(ent[:, 2] == 0) or np.any(bia[:, 1] == 0):
            raise NetworkError("explicit zero entries are not allowed")
        r, c = ent[:, 0].astype(np.int64), ent[:, 1].astype(np.int64)
        bi = bia[:, 0].astype(np.int64)
        if np.any(r < 0) or np.any(r >= rows) or np.any(c < 0) or np.any(c >= cols):
            raise NetworkError("matrix entry index out of range")
        if np.any(bi < 0) or np.any(bi >= rows):
            raise NetworkError("bias index out of range")
        key = r * max(cols, 1) + c
        if len(np.unique(key)) != len(key) or len(np.unique(bi)) != len(bi):
            raise NetworkError("duplicate entry position")
        return cls.from_coo(rows, cols, r, c, ent[:, 2], bi, bia[:, 1])

    @classmethod
    def from_coo(cls, rows, cols, r, c, v, bias_idx=(), bias_values=()):
        """Build from coordinate arrays; duplicates are summed, zeros dropped."""
        m = sp.coo_matrix((np.asarray(v, dtype=np.float64),
                           (np.asarray(r, dtype=np.int64), np.asarray(c, dtype=np.int64))),
                          shape=(rows, cols))
        b = np.zeros(rows)
        np.add.at(b, np.asarray(bias_idx, dtype=np.int64), np.asarray(bias_values, dtype=np.float64))
        return cls.from_sparse(m, b)

    @classmethod
    def from_sparse(cls, matrix, bias=None):
        """Build from a scipy sparse matrix and a dense bias vector."""
        m = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        rows, cols = m.shape
        b = np.zeros(rows) if bias is None else np.asarray(bias, dtype=np.float64).reshape(-1)
        if b.shape[0] != rows:
            raise NetworkError(f"bias has length {b.shape[0]}, expected {rows}")
        row_idx = np.repeat(np.arange(rows, dtype=np.int64), np.diff(m.indptr))
        bi = np.flatnonzero(b)
        layer = cls(rows, cols, row_idx, m.indices, m.data, bi, b[bi])
        layer._csr = m
        return layer

    @classmethod
    def from_dense(cls, matrix, bias=None):
        a = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        return cls.from_sparse(sp.csr_matrix(a), bias)

    @classmethod
    def zero(cls, rows, cols):
        return cls(rows, cols, [], [], [], [], [])

    # -- views ----------------------------------------------------------

    @property
    def matrix(self):
        """The weight matrix as a (read-only by convention) CSR matrix."""
        if self._csr is None:
            m = sp.csr_matrix((self.values, (self.row_idx, self.col_idx)),
                              shape=(self.rows, self.cols))
            m.sort_indices()
            self._csr = m
        return self._csr

    @property
    def bias(self):
        """The bias as a dense vector."""
        if self._bias_dense is None:
            b = np.zeros(self.rows)
            b[self.bias_idx] = self.bias_values
            b.setflags(write=False)
            self._bias_dense = b
        return self._bias_dense

    @property
    def nnz(self):
        return len(self.values) + len(self.bias_values)

    def dense(self):
        return self.matrix.toarray(), np.array(self.bias)

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (self.rows == other.rows and self.cols == other.cols
                and np.array_equal(self.row_idx, other.row_idx)
                and np.array_equal(self.col_idx, other.col_idx)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.bias_idx, other.bias_idx)
                and np.array_equal(self.bias_values, other.bias_values))

    def __hash__(self):
        return hash((self.rows, self.cols, self.values.tobytes(), self.bias_values.tobytes()))

    def __repr__(self):
        return f"Layer({self.rows}x{self.cols}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class Violation:
    layer: int  # 1-based, 0 for network-level problems
    message: str

    def __str__(self):
        return f"layer {self.layer}: {self.message}"


@dataclass(frozen=True, eq=False)
class Network:
    """Phi = ((A_1, b_1), ..., (A_L, b_L)) acting on R^input_dim.

    ``meta`` carries construction parameters (accuracy, reported s, ...) and
    is ignored by equality.
    """

    input_dim: int
    layers: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.input_dim) < 1:
            raise NetworkError("input dimension must be positive")
        if len(self.layers) == 0:
            raise NetworkError("a network needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def output_dim(self):
        return self.layers[-1].rows

    def widths(self):
        return [self.input_dim] + [layer.rows for layer in self.layers]

    def with_meta(self, **kw):
        meta = dict(self.meta)
        meta.update(kw)
        return Network(self.input_dim, self.layers, meta)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.input_dim == other.input_dim
                and len(self.layers) == len(other.layers)
                and all(a == b for a, b in zip(self.layers, other.layers)))

    def __hash__(self):
        return hash((self.input_dim, self.layers))

    def __repr__(self):
        return (f"Network(d={self.input_dim}, L={depth(self)}, "
                f"M={num_weights(self)}, widths={self.widths()})")

    def __call__(self, x):
        return realize(self, x)


def num_weights(net):
    """M(Phi): number of nonzero matrix and bias entries."""
    return int(sum(layer.nnz for layer in net.layers))


def num_neurons(net):
    """N(Phi) = d + N_1 + ... + N_L."""
    return int(net.input_dim + sum(layer.rows for layer in net.layers))


def depth(net):
    return len(net.layers)


def validate(net):
    """Return the list of invariant violations (empty when the net is valid)."""
    out = []
    prev = net.input_dim
    for k, layer in enumerate(net.layers, start=1):
        if layer.cols != prev:
            out.append(Violation(k, f"matrix has {layer.cols} columns, expected {prev}"))
        n = len(layer.values)
        if len(layer.row_idx) != n or len(layer.col_idx) != n:
            out.append(Violation(k, "coordinate arrays have different lengths"))
        elif n:
            if (layer.row_idx.min() < 0 or layer.row_idx.max() >= layer.rows
                    or layer.col_idx.min() < 0 or layer.col_idx.max() >= layer.cols):
                out.append(Violation(k, "matrix entry index out of range"))
            key = layer.row_idx * max(layer.cols, 1) + layer.col_idx
            if np.any(np.diff(key) <= 0):
                out.append(Violation(k, "matrix entries not strictly sorted by (row, col)"))
        if np.any(layer.values == 0):
            out.append(Violation(k, "explicit zero stored in matrix (normalization)"))
        nb = len(layer.bias_values)
        if len(layer.bias_idx) != nb:
            out.append(Violation(k, "bias arrays have different lengths"))
        elif nb:
            if layer.bias_idx.min() < 0 or layer.bias_idx.max() >= layer.rows:
                out.append(Violation(k, "bias index out of range"))
            if np.any(np.diff(layer.bias_idx) <= 0):
                out.append(Violation(k, "bias entries not strictly sorted"))
        if np.any(layer.bias_values == 0):
            out.append(Violation(k, "explicit zero stored in bias (normalization)"))
        if not (np.all(np.isfinite(layer.values)) and np.all(np.isfinite(layer.bias_values))):
            out.append(Violation(k, "non-finite weight"))
        prev = layer.rows
    return out


def check(net):
    """Raise NetworkError on the first violation."""
    bad = validate(net)
    if bad:
        raise NetworkError(str(bad[0]))
    return net


def realize(net, x):
    """Evaluate the realization at one point (1d input) or a batch (n, d).

    Points are processed in blocks; within a block the activations are stored
    as (features, points) so every layer is one sparse-dense product.
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise NetworkError(f"layer 1: input has length {X.shape[-1]}, expected {net.input_dim}")
    prev = net.input_dim
    for k, layer in enumerate(net.layers, start=1):
        if layer.cols != prev:
            raise NetworkError(f"layer {k}: matrix has {layer.cols} columns, expected {prev}")
        prev = layer.rows
    n = X.shape[0]
    width = max(net.widths())
    chunk = max(1, _CHUNK_BUDGET // max(width, 1))
    out = np.empty((n, net.output_dim))
    last = len(net.layers) - 1
    for lo in range(0, n, chunk):
        H = np.ascontiguousarray(X[lo:lo + chunk].T)
        for k, layer in enumerate(net.layers):
            H = np.asarray(layer.matrix @ H)
            nb = len(layer.bias_idx)
            if 4 * nb > layer.rows:
                H += layer.bias[:, None]
            elif nb:
                H[layer.bias_idx] += layer.bias_values[:, None]
            if k < last:
                np.maximum(H, 0.0, out=H)
        out[lo:lo + chunk] = H.T
    return out[0] if single else out


def scalar_function(net):
    """Wrap a scalar-output network as a function of an (n, d) array."""
    if net.output_dim != 1:
        raise NetworkError("network output is not scalar")
    return lambda X: realize(net, np.atleast_2d(X))[:, 0]


# -- JSON interchange -----------------------------------------------------

def to_dict(net):
    layers = []
    for layer in net.layers:
        layers.append({
            "rows": layer.rows,
            "cols": layer.cols,
            "entries": [[int(i), int(j), float(v)] for i, j, v in
                        zip(layer.row_idx, layer.col_idx, layer.values)],
            "bias": [[int(i), float(v)] for i, v in zip(layer.bias_idx, layer.bias_values)],
        })
    return {"input_dim": net.input_dim, "layers": layers}


def from_dict(data):
    layers = []
    for k, item in enumerate(data["layers"], start=1):
        try:
            layers.append(Layer.from_entries(item["rows"], item["cols"],
                                             item.get("entries", []), item.get("bias", [])))
        except NetworkError as exc:
            raise NetworkError(f"layer {k}: {exc}") from None
    return check(Network(int(data["input_dim"]), layers))


def save_json(net, path):
    with open(path, "w") as fh:
        json.dump(to_dict(net), fh)


def load_json(path):
    with open(path) as fh:
        return from_dict(json.load(fh))
