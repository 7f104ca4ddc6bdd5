"""(s, eps)-quantized weights: grid arithmetic and exact membership tests.

The admissible weights are [-eps^-s, eps^-s] intersected with h Z where the
step is h = 2^(-s k) and k = ceil(log2(1/eps)).  All membership tests use
exact rational arithmetic on the binary expansion of the float values.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import Layer, Network, depth, num_neurons, num_weights


def ceil_log2(x):
    """ceil(log2(x)) computed exactly for a float (or Fraction) x > 0."""
    q = Fraction(x)
    if q <= 0:
        raise ValueError("ceil_log2 needs a positive argument")
    k = q.numerator.bit_length() - q.denominator.bit_length()
    while Fraction(2) ** k < q:
        k += 1
    while Fraction(2) ** (k - 1) >= q:
        k -= 1
    return k


def ceil_log2_inv(eps):
    """ceil(log2(1/eps)) computed exactly."""
    return ceil_log2(1 / Fraction(eps))


@dataclass(frozen=True)
class QuantizationSpec:
    s: int
    eps: float

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError("s must be a positive integer")
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must be in (0, 0.5)")

    @property
    def k(self):
        return ceil_log2_inv(self.eps)

    @property
    def step_exponent(self):
        """The grid step is 2**(-step_exponent)."""
        return self.s * self.k

    @property
    def step(self):
        return math.ldexp(1.0, -self.step_exponent)

    @property
    def range_bound(self):
        """eps^-s as an exact fraction."""
        return 1 / Fraction(self.eps) ** self.s

    def max_grid_value(self):
        """Largest grid point not exceeding eps^-s, as a Fraction."""
        e = self.step_exponent
        return Fraction(math.floor(self.range_bound * 2 ** e), 2 ** e)


def quantize_value(x, spec):
    """Nearest grid point (ties toward zero), clamped to the range bound."""
    x = Fraction(float(x))
    e = spec.step_exponent
    scaled = abs(x) * 2 ** e
    lo = math.floor(scaled)
    m = lo + 1 if scaled - lo > Fraction(1, 2) else lo
    v = min(Fraction(m, 2 ** e), spec.max_grid_value())
    return float(v if x >= 0 else -v)


def dyadic_exponent(values):
    """Smallest j >= 0 (per value) with value * 2**j an integer.

    Finite floats are dyadic rationals, so j is always finite.
    """
    v = np.abs(np.asarray(values, dtype=np.float64))
    m, e = np.frexp(v)
    mant = (m * 2.0 ** 53).astype(np.int64)  # exact: v = mant * 2**(e - 53)
    low = mant & -mant
    tz = np.log2(np.where(low > 0, low, 1)).astype(np.int64)
    out = np.maximum(0, 53 - e.astype(np.int64) - tz)
    return np.where(v == 0, 0, out)


def _all_weights(net):
    return np.concatenate([np.concatenate([l.values, l.bias_values]) for l in net.layers])


def values_quantized(values, spec):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return True
    if np.any(dyadic_exponent(v) > spec.step_exponent):
        return False
    return Fraction(float(np.abs(v).max())) <= spec.range_bound


def is_quantized(net, spec):
    """True iff every stored weight lies exactly on the clamped grid."""
    return values_quantized(_all_weights(net), spec)


def quantize_network(net, spec):
    """Replace every weight by its quantized value; zeros created are dropped."""
    layers = []
    for layer in net.layers:
        v = np.array([quantize_value(x, spec) for x in layer.values])
        bv = np.array([quantize_value(x, spec) for x in layer.bias_values])
        layers.append(Layer.from_coo(layer.rows, layer.cols, layer.row_idx, layer.col_idx,
                                     v, layer.bias_idx, bv))
    return Network(net.input_dim, layers, dict(net.meta))


def convert_quantization(s, q, C):
    """s~ with (s, eps^q / C)-quantized weights being (s~, eps)-quantized."""
    if C < 1 or q <= 0 or s < 1:
        raise ValueError("need s >= 1, q > 0 and C >= 1")
    val = q * s + s * math.log2(C)
    r = round(val)
    c = r if abs(val - r) < 1e-12 else math.ceil(val)
    return int(c) + int(s)


def required_s(net, eps):
    """Smallest s for which net is (s, eps)-quantized."""
    v = _all_weights(net)
    if v.size == 0:
        return 1
    k = ceil_log2_inv(eps)
    j = int(dyadic_exponent(v).max())
    s = max(1, -(-j // k))
    vmax = Fraction(float(np.abs(v).max()))
    while vmax > 1 / Fraction(eps) ** s:
        s += 1
    return s


def report(net, eps):
    """Depth, weights, neurons and the minimal quantization parameter s."""
    return {"depth": depth(net), "M": num_weights(net), "N": num_neurons(net),
            "s": required_s(net, eps)}
