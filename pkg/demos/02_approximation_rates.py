"""Approximation rates: smooth functions and horizon functions.

For a smooth target the depth stays fixed while the weight count grows like
eps^(-d/beta). For a horizon function the exponent is p(d-1)/beta.

Run with: python3 demos/02_approximation_rates.py
"""

import math

from relunet import depth, num_weights
from relunet.analysis import lp_error, rate_fit
from relunet.approximators import approximate_horizon, approximate_smooth
from relunet.network import scalar_function
from relunet.targets import sinusoidal_horizon, trigonometric_target


def sweep(target, build, eps_list, p, resolution):
    rows = []
    for eps in eps_list:
        net = build(target, eps, p)
        err = lp_error(target, scalar_function(net), p, target.dim, resolution=resolution).value
        rows.append((eps, num_weights(net), depth(net), err))
        print(f"  eps={eps:.4f}  M={num_weights(net):7d}  depth={depth(net)}  L^{p} error={err:.2e}")
    slope = rate_fit([(e, m) for e, m, _, _ in rows])
    return slope


print("f(x) = sin(pi x_1) / pi^2 on [-1/2, 1/2]^2, beta = 2")
f = trigonometric_target(2, 1 / math.pi ** 2, math.pi, beta=2.0)
slope = sweep(f, approximate_smooth, [2.0 ** -k for k in range(3, 7)], 2, 128)
print(f"  fitted slope {slope:.3f}, predicted d/beta = 1")

# Once the ramp is thinner than a grid cell, no sample lands in it and the
# measured error reads 0.  That is the resolution limit of the estimate.
print("horizon function with boundary x_1 = 0.2 sin(2 pi x_2)")
hf = sinusoidal_horizon(2, 0.2, 1.0, 2.0)
slope = sweep(hf, approximate_horizon, [0.2, 0.1, 0.05, 0.025], 2, 128)
print(f"  fitted slope {slope:.3f}, predicted p(d-1)/beta = 1")
