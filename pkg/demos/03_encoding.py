"""Bit-exact encoding of a quantized network.

A network with M weights on a K-bit grid fits into C(d) M (K + ceil(log2 M))
bits.  We quantize a multiplication network, encode it, decode it and check
that nothing changed.

Run with: python3 demos/03_encoding.py
"""

import numpy as np

from relunet import num_neurons, num_weights, realize
from relunet.codec import (bits_for_quantization, code_length, decode_network, encode_network,
                           length_constant, payload_bits, simplify_network)
from relunet.primitives import multiplication_network
from relunet.quantization import QuantizationSpec, is_quantized, quantize_network

eps = 2.0 ** -3
net = multiplication_network(1, eps, 1)
spec = QuantizationSpec(4, eps)
q = simplify_network(quantize_network(net, spec))
print(f"quantized on the grid with step {spec.step}: {is_quantized(q, spec)}")
print(f"M={num_weights(q)}  N={num_neurons(q)}  d={q.input_dim}")

# the construction already uses dyadic weights, so quantizing moves nothing
X = np.random.default_rng(0).uniform(-1, 1, size=(2000, 2))
drift = np.abs(realize(q, X) - realize(net, X)).max()
print(f"largest change from quantization: {drift:.2e}")

M, K = num_weights(q), bits_for_quantization(4, eps)
code = encode_network(q, M, K)
used = len(payload_bits(q, M, K))
print(f"K={K}  payload={used} bits  padded length={len(code)}  "
      f"C(d)={length_constant(2)}  bound={code_length(M, K, 2)}")
back = decode_network(code)
print(f"decoded network identical: {back == q}")
