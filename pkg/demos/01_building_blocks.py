"""Building blocks: sawtooth, square, multiplication and Heaviside networks.

Run with: python3 demos/01_building_blocks.py
"""

import numpy as np

from relunet import depth, num_weights, realize
from relunet.analysis import count_slice_pieces, piece_bound
from relunet.primitives import heaviside_network, multiplication_network, sawtooth_network, square_network

x = np.linspace(0, 1, 10001)[:, None]

# The sawtooth g_t doubles its number of linear pieces with every layer.
print("sawtooth networks")
for t in range(1, 7):
    g = sawtooth_network(t)
    pieces = count_slice_pieces(g, [0.0], [1.0], (0.0, 1.0))
    print(f"  t={t}  depth={depth(g)}  M={num_weights(g)}  pieces={pieces}  bound={piece_bound(g):.0f}")

# Subtracting scaled sawtooths from x gives x^2 with error 2^(-2-2m).
print("square networks")
for m in (1, 3, 6):
    f = square_network(m, 1)
    err = np.abs(realize(f, x)[:, 0] - x[:, 0] ** 2).max()
    print(f"  m={m}  error={err:.2e}  limit={2.0 ** (-2 - 2 * m):.2e}")

# Multiplication by polarization. Depth depends only on L; width grows as eps shrinks.
print("multiplication on [-2, 2]^2, L=2")
g = np.linspace(-2, 2, 201)
X = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
for eps in (1e-1, 1e-2, 1e-3):
    net = multiplication_network(2, eps, 2)
    err = np.abs(realize(net, X)[:, 0] - X[:, 0] * X[:, 1]).max()
    print(f"  eps={eps:g}  depth={depth(net)}  M={num_weights(net)}  max error={err:.2e}")

# A two-layer ramp stands in for the jump of the Heaviside function.
h = heaviside_network(2, 0.25)
pts = np.array([[-0.1, 0.0], [0.0, 0.0], [0.125, 0.3], [0.25, -0.4], [0.4, 0.0]])
print("heaviside ramp, eps=1/4")
for p, v in zip(pts, realize(h, pts)[:, 0]):
    print(f"  x={p}  ->  {v:.3f}")
