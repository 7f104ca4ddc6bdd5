"""Numerical checks: L^p errors, rate fits, slice piece counts, the horizon
isometry, best affine fits and reference depth values.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .network import NetworkError, depth, num_neurons, realize

_BLOCK = 1 << 16


@dataclass(frozen=True)
class ErrorEstimate:
    value: float
    method: str  # "grid" or "monte_carlo"
    resolution: int
    seed: int = None

    def __float__(self):
        return float(self.value)


def _grid_blocks(dim, resolution):
    """Midpoint tensor grid on [-1/2, 1/2]^dim, yielded in blocks."""
    axis = (np.arange(resolution) + 0.5) / resolution - 0.5
    total = resolution ** dim
    for lo in range(0, total, _BLOCK):
        idx = np.arange(lo, min(total, lo + _BLOCK))
        X = np.empty((len(idx), dim))
        for j in range(dim - 1, -1, -1):
            X[:, j] = axis[idx % resolution]
            idx = idx // resolution
        yield X


def _mc_blocks(dim, count, seed):
    rng = np.random.default_rng(seed)
    for lo in range(0, count, _BLOCK):
        yield rng.uniform(-0.5, 0.5, size=(min(_BLOCK, count - lo), dim))


def sample_points(dim, method, resolution, seed=0):
    blocks = _grid_blocks(dim, resolution) if method == "grid" else _mc_blocks(dim, resolution, seed)
    return np.vstack(list(blocks))


def lp_error(f, g, p, dim, method=None, resolution=None, seed=0):
    """(mean |f - g|^p)^(1/p) over [-1/2, 1/2]^dim.

    Midpoint tensor grid for dim <= 3, seeded uniform sampling otherwise.
    f and g map (n, dim) arrays to (n,) arrays.  Block sums are accumulated
    in a fixed order, so the result is deterministic.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if method is None:
        method = "grid" if dim <= 3 else "monte_carlo"
    if resolution is None:
        resolution = {1: 4096, 2: 256, 3: 48}.get(dim, 100000) if method == "grid" else 100000
    if method == "grid":
        blocks, count = _grid_blocks(dim, resolution), resolution ** dim
    elif method == "monte_carlo":
        blocks, count = _mc_blocks(dim, resolution, seed), resolution
    else:
        raise ValueError(f"unknown method {method!r}")
    total = 0.0
    for X in blocks:
        diff = np.abs(np.asarray(f(X), dtype=np.float64).reshape(-1)
                      - np.asarray(g(X), dtype=np.float64).reshape(-1))
        total += float(np.sum(diff ** p))
    return ErrorEstimate(float((total / count) ** (1.0 / p)), method, int(resolution),
                         seed if method == "monte_carlo" else None)


def sup_error(f, g, dim, resolution):
    err = 0.0
    for X in _grid_blocks(dim, resolution):
        err = max(err, float(np.max(np.abs(f(X) - g(X)))))
    return err


def rate_fit(points):
    """Least-squares slope of log M against log(1/eps)."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need ≥3 points")
    eps = np.array([e for e, _ in pts], dtype=np.float64)
    M = np.array([m for _, m in pts], dtype=np.float64)
    if np.any(eps <= 0) or np.any(M <= 0):
        raise ValueError("eps and M must be positive")
    slope, _ = np.polyfit(np.log(1 / eps), np.log(M), 1)
    return float(slope)


def count_slice_pieces(net, x0, v, interval, resolution=20001, tol=1e-6):
    """Number of affine pieces of t -> net(x0 + t v) detected on a uniform grid.

    A breakpoint is flagged between consecutive grid cells whose slopes differ
    by more than tol times the local slope scale (plus a floor set by the
    rounding level); runs of flagged cells count as one breakpoint.
    """
    if net.output_dim != 1:
        raise NetworkError("piece counting needs a scalar output")
    x0 = np.asarray(x0, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    t = np.linspace(interval[0], interval[1], resolution)
    y = realize(net, x0[None, :] + t[:, None] * v[None, :])[:, 0]
    s = np.diff(y) / np.diff(t)
    ds = np.abs(np.diff(s))
    scale = np.maximum(np.abs(s[1:]), np.abs(s[:-1]))
    h = (interval[1] - interval[0]) / (resolution - 1)
    floor = 1e-9 * (np.abs(s).max() + np.abs(y).max() / h) + 1e-300
    flag = ds > tol * scale + floor
    # merge adjacent flags (a kink inside a cell changes two consecutive slopes)
    starts = np.count_nonzero(flag[1:] & ~flag[:-1]) + int(flag[0]) if flag.size else 0
    return int(starts) + 1


def piece_bound(net):
    """(2/L)^L (N - 1)^L with L = depth and N = number of neurons."""
    if net.output_dim != 1:
        raise NetworkError("piece bound needs a scalar output")
    L, N = depth(net), num_neurons(net)
    return (2.0 / L) ** L * float(N - 1) ** L


def depth_lower_bound(theta):
    """Reference asymptotic minimal depth 1/(2 theta)."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return 1.0 / (2.0 * theta)


def hf_distance_check(gamma, psi, p, d, resolution, seed=0):
    """Estimate both sides of ||H_gamma - H_psi||_p = ||gamma - psi||_1^(1/p).

    The same sample points x = (x_1, x_hat) are used for both sides; H_gamma
    is the indicator of x_1 + gamma(x_hat) >= 0.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    mism = gap = 0.0
    for X in _mc_blocks(d, resolution, seed):
        g, q = np.asarray(gamma(X[:, 1:])), np.asarray(psi(X[:, 1:]))
        mism += float(np.sum((X[:, 0] + g >= 0) != (X[:, 0] + q >= 0)))
        gap += float(np.sum(np.abs(g - q)))
    return (mism / resolution) ** (1.0 / p), (gap / resolution) ** (1.0 / p)


def best_affine_error(f, a, b, p, resolution=20000):
    """min over affine l of ||f - l||_{L^p([a, b])} (unnormalized measure).

    Least squares on a midpoint grid for p = 2; Nelder-Mead seeded from the
    least-squares fit otherwise.
    """
    if not b > a:
        raise ValueError("degenerate interval")
    if not p > 0:
        raise ValueError("p must be positive")
    x = a + (np.arange(resolution) + 0.5) * (b - a) / resolution
    y = np.asarray(f(x), dtype=np.float64)
    w = (b - a) / resolution
    V = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)

    def objective(c):
        return float(np.sum(np.abs(y - V @ c) ** p) * w) ** (1.0 / p)

    if p == 2:
        return objective(coef)
    res = minimize(objective, coef, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000})
    return min(objective(res.x), objective(coef))


REPORT_COLUMNS = ["target_name", "eps", "p", "depth", "M", "N",
                  "measured_error", "theoretical_rate", "fitted_slope"]


def write_report(rows, stream):
    """Write report rows (dicts keyed by REPORT_COLUMNS) as CSV."""
    w = csv.DictWriter(stream, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: row.get(k, "") for k in REPORT_COLUMNS})
