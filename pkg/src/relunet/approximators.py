"""Approximation pipelines for smooth, horizon, indicator, piecewise smooth
and composite targets.

Each pipeline assembles the networks of ``primitives`` with the accuracy
budget that guarantees its error bound and records the budget in ``net.meta``.
"""

import math
from fractions import Fraction

import numpy as np

from .calculus import (clamp_network, concatenate, identity_network, linear_network,
                       lipschitz_log2, parallelize, parallelize_many, sparse_concatenate)
from .network import depth
from .primitives import (Box, cutoff_array, dyadic_cells, heaviside_network, multiindices,
                         multiplication_network, order_of, polynomial_unit_array)
from .quantization import ceil_log2
from .targets import AffineFeature, CompositeTarget, HorizonTarget, PiecewiseTarget, SmoothTarget


def _check(eps, p):
    if not 0 < eps < 0.5:
        raise ValueError("eps must be in (0, 0.5)")
    if not p > 0:
        raise ValueError("p must be positive")


def _factorial(alpha):
    return math.prod(math.factorial(a) for a in alpha)


def taylor_coefficients(f, x0, n):
    """c_alpha = d^alpha f(x0) / alpha! for |alpha| <= n."""
    x0 = np.asarray(x0, dtype=np.float64).reshape(1, -1)
    return {a: float(f.deriv(a, x0)[0]) / _factorial(a) for a in multiindices(f.dim, n)}


def taylor_constant(d, beta):
    """C(d, beta) = d^n in the local Taylor remainder bound C B |x - x0|^beta."""
    return float(d ** order_of(beta))


def smooth_cell_count(d, beta, B, eps):
    """Cells per axis: the least odd integer >= (eps / (4 C B d^beta))^(-1/beta).

    Any count above the threshold keeps the error bound.  An odd count puts
    no cell face on a dyadic rational, so midpoint grids with power-of-two
    resolution never sample the faces, where the cutoffs vanish.
    """
    C = taylor_constant(d, beta)
    N = max(1, math.ceil((eps / (4 * C * B * d ** beta)) ** (-1.0 / beta)))
    return N if N % 2 else N + 1


def approximate_smooth(f, eps, p):
    """Network with L^p error <= eps for f in the Hoelder ball, sup <= ceil(B).

    Cells of side 1/N, Taylor polynomials at the cell centres (polynomial
    unit at eps/4), clamp to B1, cutoffs at eps/2 and a final clamp to B.
    """
    _check(eps, p)
    d, beta, B = f.dim, f.beta, f.bound
    n = order_of(beta)
    C = taylor_constant(d, beta)
    N = smooth_cell_count(d, beta, B, eps)
    lower, upper = dyadic_cells(d, N)
    centers = (lower + upper) / 2
    alphas = multiindices(d, n)
    coef = np.stack([f.deriv(a, centers) / _factorial(a) for a in alphas], axis=1)
    # coefficients are bounded by B; clip rounding noise at the boundary
    coef = np.clip(coef, -B, B)
    phi_p = polynomial_unit_array(coef, alphas, centers, eps / 4, beta, B)
    B1 = math.ceil((1 + C * d ** beta) * B)
    psi_p = clamp_network(phi_p, B1)
    boxes = [Box(tuple(a), tuple(b)) for a, b in zip(lower, upper)]
    psi = cutoff_array(psi_p, boxes, B1, eps / 2, math.ceil(p))
    net = clamp_network(psi, B)
    return net.with_meta(kind="smooth", eps=eps, p=p, cells_per_axis=N, B1=B1,
                         rate=d / beta)


def largest_dyadic_below(v):
    """Largest 2^-j (j >= 0 integer) that is <= v, for 0 < v < 1."""
    return 2.0 ** -ceil_log2(1 / Fraction(v))


def _permutation_matrix(perm):
    d = len(perm)
    P = np.zeros((d, d))
    P[np.arange(d), perm] = 1.0
    return P


def approximate_horizon(hf, eps, p):
    """Network with L^p error < eps for a horizon function, values in [0, 1].

    gamma is approximated in L^1 to (eps/4)^p / 2, the shift network maps x to
    ((Tx)_1 + gamma_eps, (Tx)_2..d) and the Heaviside ramp of width eps' acts
    on the first coordinate.
    """
    _check(eps, p)
    d = hf.dim
    if d < 2:
        raise ValueError("horizon functions need d >= 2")
    g_acc = 0.5 * (eps / 4) ** p
    phi_g = approximate_smooth(hf.gamma, g_acc, 1.0)
    Lg = depth(phi_g)
    P = _permutation_matrix(hf.permutation)
    ident = concatenate(identity_network(d, Lg), linear_network(P))
    gam = concatenate(phi_g, linear_network(P[1:]))
    both = parallelize(ident, gam)
    S = np.zeros((d, d + 1))
    S[0, 0] = S[0, d] = 1.0
    S[np.arange(1, d), np.arange(1, d)] = 1.0
    shift = concatenate(linear_network(S), both)
    eps_h = largest_dyadic_below(g_acc)
    net = sparse_concatenate(heaviside_network(d, eps_h), shift)
    return net.with_meta(kind="horizon", eps=eps, p=p, gamma_accuracy=g_acc,
                         heaviside_eps=eps_h, rate=p * (d - 1) / hf.beta)


def _indicator(K, eps, p):
    missing = K.missing_cells()
    if missing:
        raise ValueError(f"missing horizon descriptor for cell {missing[0]}")
    q = max(1.0, 1.0 / p)
    d, r = K.dim, K.r
    cell_eps = eps / 2 ** (1 + q + r * d * q)
    built = {}
    nets = []
    cells = K.cells()
    for lam in cells:
        hf = K.cell_horizons[lam]
        if id(hf) not in built:
            built[id(hf)] = approximate_horizon(hf, cell_eps, p)
        nets.append(built[id(hf)])
    phi = parallelize_many(nets)
    n = 2 ** r
    boxes = [Box(tuple((l - 1) / n - 0.5 for l in lam), tuple(l / n - 0.5 for l in lam))
             for lam in cells]
    psi = cutoff_array(phi, boxes, 1, eps / 2 ** (1 + q), p)
    net = clamp_network(psi, 1)
    return net.with_meta(kind="indicator", eps=eps, p=p, cell_accuracy=cell_eps,
                         rate=p * (d - 1) / K.beta)


def approximate_indicator(K, eps, p):
    """Network with L^p error <= eps for chi_K, values in [0, 1]."""
    _check(eps, p)
    if K.smooth_factor is not None:
        raise ValueError("target has a smooth factor; use approximate_piecewise_smooth")
    return _indicator(K, eps, p)


def approximate_piecewise_smooth(f, eps, p):
    """Network for chi_K * g: approximate product of the indicator and g nets."""
    _check(eps, p)
    g = f.smooth_factor
    if g is None:
        raise ValueError("piecewise smooth target needs a smooth factor")
    q = max(1.0, 1.0 / p)
    B = g.bound
    phi_K = _indicator(f, eps / (3 * 4 ** q * B), p)
    phi_g = approximate_smooth(g, eps / (3 * 4 ** q), p)
    beta0 = max(f.beta, g.beta)
    L3 = 1 + int(beta0 // (2 * f.dim))
    mult = multiplication_network(max(1, math.ceil(B)), eps / (3 * 2 ** q), L3)
    psi = sparse_concatenate(mult, parallelize(phi_K, phi_g))
    net = clamp_network(psi, B)
    return net.with_meta(kind="piecewise_smooth", eps=eps, p=p,
                         rate=p * (f.dim - 1) / f.beta)


def composite_budget(eps, p, kappa, d, lip_log2):
    """Accuracy split for f = g o tau.

    The outer net gets eps / (2^q kappa); T is the least integer >= 1 with
    Lip <= eps^-T; each of the d inner coordinates gets eps^(T+1) / (2d)^q.
    """
    q = max(1.0, 1.0 / p)
    T = max(1, math.ceil(lip_log2 / math.log2(1 / eps))) if lip_log2 > 0 else 1
    return {"q": q, "outer_eps": eps / (2 ** q * kappa), "T": T,
            "inner_eps": eps ** (T + 1) / (2 * d) ** q,
            "tau_budget": eps ** (T + 1) / 2 ** q}


def approximate_composite(f, eps, p):
    """Network Phi^g (.) Phi^tau for f = g o tau."""
    _check(eps, p)
    d, D = f.outer.dim, f.dim
    q = max(1.0, 1.0 / p)
    phi_g = build_network(f.outer, eps / (2 ** q * f.kappa), p)
    budget = composite_budget(eps, p, f.kappa, d, lipschitz_log2(phi_g))
    T = budget["T"]
    coords = []
    for k, feat in enumerate(f.features):
        if isinstance(feat, AffineFeature):
            coords.append(linear_network(np.array([feat.weights], dtype=np.float64),
                                         np.array([feat.bias])))
            continue
        if d < 2:
            raise ValueError("smooth feature maps need an outer dimension d >= 2")
        beta0 = math.ceil(f.outer.beta * D * (T + 1) / (p * (d - 1)))
        if feat.beta < beta0:
            raise ValueError(f"derivative order unavailable: feature {k} has beta "
                             f"{feat.beta}, needs {beta0}")
        if not budget["inner_eps"] > 1e-300:
            raise ValueError("inner accuracy underflows double precision")
        coords.append(approximate_smooth(feat, budget["inner_eps"], p))
    phi_tau = parallelize_many(coords)
    net = sparse_concatenate(phi_g, phi_tau)
    return net.with_meta(kind="composite", eps=eps, p=p, T=T,
                         rate=phi_g.meta.get("rate"), **{k: v for k, v in budget.items() if k != "T"})


def build_network(target, eps, p):
    """Dispatch a target descriptor to its pipeline."""
    if isinstance(target, SmoothTarget):
        return approximate_smooth(target, eps, p)
    if isinstance(target, HorizonTarget):
        return approximate_horizon(target, eps, p)
    if isinstance(target, PiecewiseTarget):
        if target.smooth_factor is None:
            return approximate_indicator(target, eps, p)
        return approximate_piecewise_smooth(target, eps, p)
    if isinstance(target, CompositeTarget):
        return approximate_composite(target, eps, p)
    raise TypeError(f"unsupported target type {type(target).__name__}")


def theoretical_rate(target, p):
    """Exponent r with M ~ eps^-r for the target's pipeline."""
    if isinstance(target, SmoothTarget):
        return target.dim / target.beta
    if isinstance(target, (HorizonTarget, PiecewiseTarget)):
        return p * (target.dim - 1) / target.beta
    if isinstance(target, CompositeTarget):
        return theoretical_rate(target.outer, p)
    return None
