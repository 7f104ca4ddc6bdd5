"""Dead-neuron simplification and the bit-exact network encoding.

Bit layout (most significant bit first, all counts unsigned).  With
T = 3 d M and w(x) = ceil(log2(x)):

    L                       w(M + 2) bits, value in 1..M+1
    per layer l = 1..L:
      n1 (rows)             w(T + 1) bits, value in 1..T
      n2 (cols)             w(T + 1) bits, value in 1..T
      nnz of A_l            w(T^2 + 1) bits
      per entry, sorted:    row in w(T) bits, col in w(T) bits, K-bit code
      nnz of b_l            w(T + 1) bits
      per entry, sorted:    index in w(T) bits, K-bit code
    zero padding up to code_length(M, K, d) bits

The K-bit code of a weight is sign bit s followed by a (K-1)-bit integer m;
it stands for m h when s = 0 and -(m + 1) h when s = 1, with h = 2^-floor(K/2).
Stored weights are nonzero, so the all-zero code never occurs in a valid
stream.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .network import Layer, Network, NetworkError, check, num_neurons, num_weights
from .quantization import ceil_log2_inv, dyadic_exponent

MAGIC = b"NNC1"


class DecodeError(ValueError):
    """Malformed bit stream; ``offset`` is the bit position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"bit {offset}: {message}")
        self.offset = offset


def _w(x):
    """Number of bits needed for the values 0..x-1."""
    return max(1, int(x - 1).bit_length())


# -- simplification ---------------------------------------------------------

def simplify_network(net):
    """Remove dead neurons until N <= M + d + 1, keeping the realization.

    Repeatedly takes the deepest layer with an all-zero row (matrix and bias).
    If that layer has more than one neuron the row and the matching column of
    the next layer are removed; otherwise the realization factors through the
    constant zero and the network is cut there.
    """
    if net.output_dim != 1:
        raise NetworkError("simplification needs a scalar output")
    d = net.input_dim
    mats = [layer.matrix.tocsr() for layer in net.layers]
    biases = [np.array(layer.bias) for layer in net.layers]

    def zero_rows(k):
        nz = np.diff(mats[k].indptr) > 0
        return np.flatnonzero(~nz & (biases[k] == 0))

    def counts():
        M = sum(m.nnz + np.count_nonzero(b) for m, b in zip(mats, biases))
        N = d + sum(m.shape[0] for m in mats)
        return M, N

    M, N = counts()
    while N > M + d + 1:
        L = len(mats)
        ell = next((k for k in range(L - 1, -1, -1) if len(zero_rows(k))), None)
        if ell is None:
            raise AssertionError("no zero row although N > M + d + 1")
        rows = mats[ell].shape[0]
        if rows > 1:
            i = zero_rows(ell)[0]
            keep = np.flatnonzero(np.arange(rows) != i)
            mats[ell] = mats[ell][keep]
            biases[ell] = biases[ell][keep]
            mats[ell + 1] = mats[ell + 1][:, keep]
        elif ell == L - 1:
            mats = [sp.csr_matrix((1, d))]
            biases = [np.zeros(1)]
        elif ell > 0:
            mats = [sp.csr_matrix((1, d))] + mats[ell + 1:]
            biases = [np.zeros(1)] + biases[ell + 1:]
        else:
            raise AssertionError("first-layer single zero neuron cannot exceed the bound")
        M, N = counts()
    layers = [Layer.from_sparse(m, b) for m, b in zip(mats, biases)]
    return Network(d, layers)


# -- coding scheme ----------------------------------------------------------

@dataclass(frozen=True)
class CodingScheme:
    """K-bit fixed-point values: sign + (K-1)-bit magnitude on step 2^-floor(K/2)."""

    K: int

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be at least 2")

    @property
    def frac_bits(self):
        return self.K // 2

    @property
    def step(self):
        return 2.0 ** -self.frac_bits

    def value(self, code):
        code = int(code)
        if not 0 <= code < 2 ** self.K:
            raise ValueError("code out of range")
        sign = code >> (self.K - 1)
        m = code & ((1 << (self.K - 1)) - 1)
        return -(m + 1) * self.step if sign else m * self.step

    def code(self, x):
        """Inverse of value; raises if x is not in the range."""
        x = float(x)
        scaled = x * 2.0 ** self.frac_bits
        if scaled != math.floor(scaled):
            raise ValueError(f"weight {x!r} is not on the {self.K}-bit grid")
        n = int(scaled)
        top = 1 << (self.K - 1)
        if 0 <= n < top:
            return n
        if -top <= n < 0:
            return top | (-n - 1)
        raise ValueError(f"weight {x!r} exceeds the {self.K}-bit range")

    def representable(self, values):
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return True
        if np.any(dyadic_exponent(v) > self.frac_bits):
            return False
        n = v * 2.0 ** self.frac_bits
        top = 2.0 ** (self.K - 1)
        return bool(np.all((n < top) & (n >= -top)))


def bits_for_quantization(s, eps):
    """K such that every (s, eps)-quantized weight is representable.

    The grid step 2^-(s k) needs floor(K/2) >= s k fraction bits, and the
    positive range m h < 2^(K-1-floor(K/2)) must reach eps^-s <= 2^(s k).
    """
    k = ceil_log2_inv(eps)
    return 2 * s * k + 3


def minimal_bits(values):
    """Smallest K whose coding scheme represents every value."""
    K = 2
    while not CodingScheme(K).representable(values):
        K += 1
    return K


# -- encoder / decoder ----------------------------------------------------

def length_constant(d):
    """C(d) = 6 ceil(log2(3d)) + 13 in the length bound C M (K + ceil(log2 M)).

    With t = ceil(log2(3d)) and lam = ceil(log2 M), every field index takes at
    most t + lam bits and a layer header at most 5(t + lam) + 4 bits.  Using
    L <= M + 1 <= 2M and K >= 2 the raw stream has at most
    M (12 t + 13 lam + 10 + K) <= (6 t + 13) M (K + lam) bits.
    """
    return 6 * (3 * d - 1).bit_length() + 13


def code_length(M, K, d):
    """Declared (padded) length of every code with parameters (M, K, d)."""
    return length_constant(d) * M * (K + (M - 1).bit_length())


@dataclass(frozen=True)
class BitCode:
    bits: np.ndarray  # uint8 array of 0/1
    M: int
    K: int
    d: int

    def __len__(self):
        return len(self.bits)

    def __eq__(self, other):
        return (isinstance(other, BitCode) and (self.M, self.K, self.d) == (other.M, other.K, other.d)
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.M, self.K, self.d, np.packbits(self.bits).tobytes(), len(self.bits)))

    def to_bytes(self):
        header = MAGIC + struct.pack(">III", self.M, self.K, self.d)
        return header + np.packbits(self.bits).tobytes()

    @classmethod
    def from_bytes(cls, data):
        if data[:4] != MAGIC:
            raise DecodeError("bad magic bytes", 0)
        M, K, d = struct.unpack(">III", data[4:16])
        n = code_length(M, K, d)
        bits = np.unpackbits(np.frombuffer(data[16:], dtype=np.uint8))
        if len(bits) < n:
            raise DecodeError("payload shorter than the declared length", len(bits))
        if np.any(bits[n:]):
            raise DecodeError("nonzero byte padding", n)
        return cls(bits[:n].copy(), M, K, d)


class _Writer:
    def __init__(self):
        self.parts = []

    def put(self, value, width):
        value = int(value)
        if value < 0 or value >= 1 << width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        self.parts.append(format(value, f"0{width}b") if width else "")

    def bits(self):
        s = "".join(self.parts)
        return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


class _Reader:
    def __init__(self, bits):
        self.bits = bits
        self.pos = 0

    def get(self, width, what):
        if self.pos + width > len(self.bits):
            raise DecodeError(f"truncated stream while reading {what}", self.pos)
        chunk = self.bits[self.pos:self.pos + width]
        self.pos += width
        v = 0
        for b in chunk:
            v = (v << 1) | int(b)
        return v


def payload_bits(net, M, K):
    """The unpadded bit stream of a simplified network with at most M weights."""
    check(net)
    d = net.input_dim
    if net.output_dim != 1:
        raise ValueError("only scalar-output networks can be encoded")
    if num_weights(net) > M:
        raise ValueError(f"network has {num_weights(net)} weights, more than M = {M}")
    if M < 1:
        raise ValueError("M must be positive")
    if num_neurons(net) > num_weights(net) + d + 1:
        raise ValueError("network is not simplified (N > M + d + 1)")
    scheme = CodingScheme(K)
    T = 3 * d * M
    wi, wn, wc = _w(T), _w(T + 1), _w(T * T + 1)
    out = _Writer()
    out.put(len(net.layers), _w(M + 2))
    for layer in net.layers:
        out.put(layer.rows, wn)
        out.put(layer.cols, wn)
        out.put(len(layer.values), wc)
        for i, j, v in zip(layer.row_idx, layer.col_idx, layer.values):
            out.put(i, wi)
            out.put(j, wi)
            out.put(scheme.code(v), K)
        out.put(len(layer.bias_values), wn)
        for i, v in zip(layer.bias_idx, layer.bias_values):
            out.put(i, wi)
            out.put(scheme.code(v), K)
    return out.bits()


def encode_network(net, M, K):
    """Encode a simplified network with at most M weights into a fixed-length code."""
    bits = payload_bits(net, M, K)
    d = net.input_dim
    n = code_length(M, K, d)
    if len(bits) > n:
        raise AssertionError(f"code length {len(bits)} exceeds the bound {n}")
    return BitCode(np.concatenate([bits, np.zeros(n - len(bits), dtype=np.uint8)]), M, K, d)


def decode_network(code):
    """Exact inverse of encode_network; malformed streams raise DecodeError."""
    M, K, d = code.M, code.K, code.d
    scheme = CodingScheme(K)
    T = 3 * d * M
    wi, wn, wc = _w(T), _w(T + 1), _w(T * T + 1)
    rd = _Reader(code.bits)
    start = rd.pos
    L = rd.get(_w(M + 2), "depth")
    if not 1 <= L <= M + 1:
        raise DecodeError(f"depth {L} outside 1..{M + 1}", start)
    layers = []
    prev = d
    for k in range(1, L + 1):
        at = rd.pos
        n1 = rd.get(wn, f"row count of layer {k}")
        n2 = rd.get(wn, f"column count of layer {k}")
        if not (1 <= n1 <= T and 1 <= n2 <= T):
            raise DecodeError(f"layer {k} dimensions {n1}x{n2} outside 1..{T}", at)
        if n2 != prev:
            raise DecodeError(f"layer {k} has {n2} columns, expected {prev}", at)
        at = rd.pos
        nnz = rd.get(wc, f"entry count of layer {k}")
        if nnz > n1 * n2:
            raise DecodeError(f"layer {k} entry count {nnz} exceeds {n1 * n2}", at)
        r, c, v = [], [], []
        last = -1
        for _ in range(nnz):
            at = rd.pos
            i = rd.get(wi, "row index")
            j = rd.get(wi, "column index")
            x = scheme.value(rd.get(K, "weight code"))
            if i >= n1 or j >= n2:
                raise DecodeError(f"entry ({i}, {j}) out of range in layer {k}", at)
            if i * n2 + j <= last:
                raise DecodeError(f"entries of layer {k} not strictly increasing", at)
            if x == 0:
                raise DecodeError("zero weight code", at)
            last = i * n2 + j
            r.append(i)
            c.append(j)
            v.append(x)
        at = rd.pos
        nb = rd.get(wn, f"bias count of layer {k}")
        if nb > n1:
            raise DecodeError(f"layer {k} bias count {nb} exceeds {n1}", at)
        bi, bv = [], []
        last = -1
        for _ in range(nb):
            at = rd.pos
            i = rd.get(wi, "bias index")
            x = scheme.value(rd.get(K, "bias code"))
            if i >= n1 or i <= last:
                raise DecodeError(f"bias index {i} invalid in layer {k}", at)
            if x == 0:
                raise DecodeError("zero bias code", at)
            last = i
            bi.append(i)
            bv.append(x)
        layers.append(Layer(n1, n2, r, c, v, bi, bv))
        prev = n1
    if prev != 1:
        raise DecodeError(f"output dimension {prev}, expected 1", rd.pos)
    if np.any(code.bits[rd.pos:]):
        raise DecodeError("nonzero padding", rd.pos + int(np.argmax(code.bits[rd.pos:])))
    return Network(d, layers)


def save_code(code, path):
    with open(path, "wb") as fh:
        fh.write(code.to_bytes())


def load_code(path):
    with open(path, "rb") as fh:
        return BitCode.from_bytes(fh.read())
