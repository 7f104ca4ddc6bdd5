"""Explicit low-level constructions: Heaviside ramp, sawtooth, squaring,
multiplication, monomials, polynomial units and box cutoffs.

Internal parameters are chosen so each error bound holds; every constructor stores
its parameters in ``net.meta``.
"""

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .calculus import (clamp_network, concatenate, identity_network, linear_network,
                       pad_depth, parallelize, parallelize_many, parallelize_separate,
                       sparse_concatenate)
from .network import Layer, Network, depth
from .quantization import QuantizationSpec, ceil_log2, ceil_log2_inv, quantize_value


def _check_eps(eps):
    if not 0 < eps < 0.5:
        raise ValueError("eps must be in (0, 0.5)")


# -- Heaviside ------------------------------------------------------------

def heaviside_network(d, eps):
    """Two-layer ramp r(x) = relu(x1/eps) - relu(x1/eps - 1)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if d < 1:
        raise ValueError("d must be positive")
    w = 1.0 / eps
    A1 = Layer.from_entries(2, d, [(0, 0, w), (1, 0, w)], [(1, -1.0)])
    A2 = Layer.from_entries(1, 2, [(0, 0, 1.0), (0, 1, -1.0)])
    return Network(d, [A1, A2], {"eps": eps})


# -- sawtooth and squaring --------------------------------------------------

def _sawtooth_two_layer(t):
    """2-layer network for g_t on [0, 1] with 2**t hidden neurons."""
    if t == 0:
        return identity_network(1, 2)
    n = 2 ** t
    h = 2.0 ** -t
    half = 2 ** (t - 1)
    # hidden biases: 0, then -2k h (k = 1..half-1), then -(2l-1) h (l = 1..half)
    bias = np.concatenate([[0.0], -2.0 * np.arange(1, half) * h,
                           -(2.0 * np.arange(1, half + 1) - 1) * h])
    out = np.concatenate([[float(n)], np.full(half - 1, 2.0 * n), np.full(half, -2.0 * n)])
    A1 = Layer.from_dense(np.ones((n, 1)), bias)
    A2 = Layer.from_dense(out[None, :])
    return Network(1, [A1, A2])


def sawtooth_network(t, block=None):
    """Network realizing g_t on [0, 1], g the tent map.

    With block=None the 2-layer form is returned.  With block=N, g_t is the
    sparse composition of floor(t/N) copies of g_N after g_(t mod N).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if block is None or t <= block:
        return _sawtooth_two_layer(t)
    k, r = divmod(t, block)
    net = _sawtooth_two_layer(r)
    g = _sawtooth_two_layer(block)
    for _ in range(k):
        net = sparse_concatenate(g, net)
    return net


def square_network(m, L):
    """Network realizing f_m(x) = x - sum_t g_t(x) / 4**t on [0, 1].

    g_t is built from blocks g_N, N = ceil(m / L); all terms are padded to
    2L + 3 layers, parallelized with the identity and summed (2L + 4 layers).
    """
    if m < 1 or L < 1:
        raise ValueError("need m >= 1 and L >= 1")
    N = -(-m // L)
    target = 2 * L + 3
    terms = [identity_network(1, target)]
    for t in range(1, m + 1):
        k, r = divmod(t, N)
        net = _sawtooth_two_layer(r)
        for _ in range(k):
            net = sparse_concatenate(_sawtooth_two_layer(N), net)
        terms.append(pad_depth(net, target))
    psi = parallelize_many(terms)
    weights = np.concatenate([[1.0], -(4.0 ** -np.arange(1, m + 1))])
    out = sparse_concatenate(linear_network(weights[None, :]), psi)
    return out.with_meta(m=m, L=L, N=N)


# -- multiplication ---------------------------------------------------------

def multiplication_parameters(M_bound, eps, L):
    s0 = 1 + ceil_log2(M_bound)
    M0 = 2 ** s0
    k = math.log2(1 / eps)
    m = s0 + math.ceil(k / 2)
    N = -(-m // L)
    return {"s0": s0, "M0": M0, "m": m, "N": N}


@functools.lru_cache(maxsize=64)
def multiplication_network(M_bound, eps, L):
    """Approximate product (x, y) -> x y on [-M, M]^2 with 2L + 8 layers.

    Uses polarization h = (M0^2 / 2) [f_m(|x+y|/M0) - f_m(|x|/M0) - f_m(|y|/M0)]
    with |z| = relu(z) + relu(-z).  The three f_m copies are identical and
    the (x, y, x+y) ordering makes h(x, 0) = 0 exactly.
    """
    _check_eps(eps)
    if M_bound < 1:
        raise ValueError("M_bound must be >= 1")
    if L < 1:
        raise ValueError("L must be a positive integer")
    prm = multiplication_parameters(M_bound, eps, L)
    M0, m = prm["M0"], prm["m"]
    lin = linear_network(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]) / M0)
    eye = np.eye(3)
    absval = Network(3, [Layer.from_dense(np.vstack([eye, -eye])),
                         Layer.from_dense(np.hstack([eye, eye]))])
    fm = square_network(m, L)
    three = parallelize_separate([fm, fm, fm])
    w = M0 * M0 / 2.0
    out = linear_network(np.array([[-w, -w, w]]))
    net = sparse_concatenate(out, sparse_concatenate(three, sparse_concatenate(absval, lin)))
    prm.update(M_bound=M_bound, eps=eps, L=L)
    return net.with_meta(**prm)


# -- monomials --------------------------------------------------------------

def _split(alpha):
    """alpha = a1 + a2 with |a2| = 2**(ceil(log2 k) - 1), a2 taken greedily."""
    k = sum(alpha)
    need = 2 ** (ceil_log2(k) - 1)
    a2 = []
    for a in alpha:
        take = min(a, need)
        a2.append(take)
        need -= take
    a1 = tuple(a - b for a, b in zip(alpha, a2))
    return a1, tuple(a2)


def monomial_network(alpha, eps, ell):
    """Network approximating x -> x^alpha on [-1/2, 1/2]^d within eps.

    alpha = a1 + a2 is split recursively, the factors are built at eps/6 and
    multiplied with an approximate product with L = 1 + floor(ell / (2d)).
    """
    alpha = tuple(int(a) for a in alpha)
    if not alpha or any(a < 0 for a in alpha):
        raise ValueError("invalid multiindex")
    _check_eps(eps)
    if ell < 1:
        raise ValueError("ell must be positive")
    return _monomial(alpha, float(eps), int(ell))


@functools.lru_cache(maxsize=256)
def _monomial(alpha, eps, ell):
    d = len(alpha)
    k = sum(alpha)
    if k == 0:
        return Network(d, [Layer.from_entries(1, d, [], [(0, 1.0)])])
    if k == 1:
        j = alpha.index(1)
        return Network(d, [Layer.from_entries(1, d, [(0, j, 1.0)])])
    a1, a2 = _split(alpha)
    n1, n2 = _monomial(a1, eps / 6, ell), _monomial(a2, eps / 6, ell)
    Lm = max(depth(n1), depth(n2))
    pair = parallelize(pad_depth(n1, Lm), pad_depth(n2, Lm))
    mult = multiplication_network(2, eps / 6, 1 + ell // (2 * d))
    return sparse_concatenate(mult, pair)


def multiindices(d, n):
    """All alpha in N_0^d with |alpha| <= n, ordered by degree then lexicographically."""
    out = [a for a in itertools.product(range(n + 1), repeat=d) if sum(a) <= n]
    return sorted(out, key=lambda a: (sum(a), tuple(-x for x in a)))


def order_of(beta):
    """n with beta = n + sigma, sigma in (0, 1]."""
    return int(math.ceil(beta)) - 1


# -- polynomial units -------------------------------------------------------

def _binom_multi(alpha, gamma):
    out = 1
    for a, g in zip(alpha, gamma):
        out *= math.comb(a, g)
    return out


def polynomial_unit(coeffs, base_points, eps, beta, B=None):
    """m-output network, output l approximating sum_alpha c[l, alpha] (x - x_l)^alpha.

    coeffs maps (l, alpha) to a real; l is 0-based, alpha ranges over |alpha| < beta.
    B defaults to the largest coefficient magnitude.
    """
    pts = np.atleast_2d(np.asarray(base_points, dtype=np.float64))
    m, d = pts.shape
    n = order_of(beta)
    alphas = multiindices(d, n)
    col = {a: i for i, a in enumerate(alphas)}
    C = np.zeros((m, len(alphas)))
    for (l, a), v in coeffs.items():
        a = tuple(a)
        if a not in col:
            raise ValueError(f"multiindex {a} has degree >= beta")
        C[l, col[a]] = v
    return polynomial_unit_array(C, alphas, pts, eps, beta, B)


def polynomial_unit_array(coef, alphas, base_points, eps, beta, B=None):
    """Array form of polynomial_unit: coef[l, i] multiplies (x - x_l)^alphas[i]."""
    _check_eps(eps)
    pts = np.atleast_2d(np.asarray(base_points, dtype=np.float64))
    m, d = pts.shape
    coef = np.asarray(coef, dtype=np.float64).reshape(m, len(alphas))
    if np.any(np.abs(pts) > 0.5):
        raise ValueError("base points must lie in [-1/2, 1/2]^d")
    n = order_of(beta)
    if any(sum(a) > n for a in alphas):
        raise ValueError("multiindex degree must be < beta")
    if B is None:
        B = max(1.0, float(np.abs(coef).max()) if coef.size else 1.0)
    if np.any(np.abs(coef) > B):
        raise ValueError("coefficient outside [-B, B]")
    gammas = multiindices(d, n)
    Ng = len(gammas)
    # recentre: c~[l, g] = sum_{a >= g} c[l, a] binom(a, g) (-x_l)^(a - g)
    ct = np.zeros((m, Ng))
    for i, a in enumerate(alphas):
        for j, g in enumerate(gammas):
            if all(x >= y for x, y in zip(a, g)):
                power = np.prod((-pts) ** (np.array(a) - np.array(g)), axis=1)
                ct[:, j] += coef[:, i] * _binom_multi(a, g) * power
    # data-independent bound on |c~|, using |x_l| <= 1/2
    csum = max(sum(_binom_multi(a, g) * 0.5 ** (sum(a) - sum(g))
                   for a in gammas if all(x >= y for x, y in zip(a, g))) for g in gammas)
    Cb = max(1.0, B * csum)
    # monomial bank at accuracy delta = eps / (4 C N_gamma)
    delta = eps / (4 * Cb * Ng)
    bank = [monomial_network(g, delta, n + 1) for g in gammas]
    Lb = max(depth(b) for b in bank)
    phi_b = parallelize_many([pad_depth(b, Lb) for b in bank])
    # coefficient quantization: smallest s1 with N_gamma h / 2 < eps / 2 and eps^-s1 >= C + 1
    k = ceil_log2_inv(eps)
    s1 = 1
    while not (Ng * 2.0 ** (-s1 * k) < eps and Fraction(eps) ** -s1 >= Fraction(Cb) + 1):
        s1 += 1
    spec = QuantizationSpec(s1, eps)
    cq = _quantize_array(ct, spec)
    phi_a = linear_network(sp.csr_matrix(cq))
    net = sparse_concatenate(phi_a, phi_b)
    return net.with_meta(C=Cb, delta=delta, s1=s1, n_monomials=Ng)


def _quantize_array(values, spec):
    """Vectorized quantize_value for values well inside the range."""
    e = spec.step_exponent
    lim = float(spec.max_grid_value())
    scaled = np.abs(values) * 2.0 ** e  # exact scaling by a power of two
    lo = np.floor(scaled)
    m = np.where(scaled - lo > 0.5, lo + 1, lo)
    out = np.minimum(m * 2.0 ** -e, lim)
    return np.sign(values) * out


# -- cutoffs ----------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(a) for a in self.lower)
        hi = tuple(float(b) for b in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must have equal positive length")
        for a, b in zip(lo, hi):
            if not (-0.5 <= a <= b <= 0.5):
                raise ValueError("box endpoints must satisfy -1/2 <= a <= b <= 1/2")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, X):
        X = np.atleast_2d(X)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)


def cutoff_exponent(d, B, eps, p0):
    """Smallest e with 4 d 2^-e <= (eps / (2 B))^p0, so eps~ = 2^-e."""
    target = (Fraction(eps) / (2 * Fraction(B))) ** p0 / (4 * d)
    return max(1, ceil_log2(1 / target))


def _cutoff_template(lower, upper, B, eps, p):
    """Per-box parameters of the 4-layer cutoff: grid endpoints, scale, mask."""
    lower = np.atleast_2d(lower)
    upper = np.atleast_2d(upper)
    d = lower.shape[1]
    p0 = int(math.ceil(p))
    e = cutoff_exponent(d, B, eps, p0)
    S = 2.0 ** e
    at = np.round(lower * S) / S
    bt = np.round(upper * S) / S
    live = np.all(bt - at >= 2.0 / S, axis=1)
    B0 = 2.0 ** ceil_log2(B)
    return at, bt, S, B0, live, e


def _cutoff_layers(at, bt, S, B0, live):
    """COO data of the four cutoff layers for a batch of boxes.

    Returns for each layer (rows, cols, r, c, v, bias) with r, c, v, bias of
    shape (m, k): the per-box local coordinates and values.
    """
    m, d = at.shape
    i = np.arange(d)
    z = live.astype(np.float64)[:, None]
    # layer 1: 4d ramps on x, then relu(y / B0), relu(-y / B0)
    r1 = np.concatenate([4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3, [4 * d, 4 * d + 1]])
    c1 = np.concatenate([i, i, i, i, [d, d]])
    v1 = np.concatenate([np.full(4 * d, S), [1.0 / B0, -1.0 / B0]])
    b1 = np.zeros((m, 4 * d + 2))
    b1[:, 0:4 * d:4] = -S * at
    b1[:, 1:4 * d:4] = -S * at - 1
    b1[:, 2:4 * d:4] = -S * bt + 1
    b1[:, 3:4 * d:4] = -S * bt
    L1 = (4 * d + 2, d + 1, r1, c1, v1[None, :] * z, b1 * z)
    # layer 2: t_i = r1 - r2 - r3 + r4, and two pass-throughs
    r2 = np.concatenate([np.repeat(i, 4), [d, d + 1]])
    c2 = np.concatenate([np.arange(4 * d), [4 * d, 4 * d + 1]])
    v2 = np.concatenate([np.tile([1.0, -1.0, -1.0, 1.0], d), [1.0, 1.0]])
    L2 = (d + 2, 4 * d + 2, r2, c2, v2[None, :] * z, np.zeros((m, d + 2)))
    # layer 3: relu(sum t + relu(+-y/B0) - d)
    r3 = np.concatenate([np.zeros(d + 1, int), np.ones(d + 1, int)])
    c3 = np.concatenate([i, [d], i, [d + 1]])
    v3 = np.ones(2 * d + 2)
    L3 = (2, d + 2, r3, c3, v3[None, :] * z, np.full((m, 2), -float(d)) * z)
    # layer 4: B0 (first - second)
    L4 = (1, 2, np.array([0, 0]), np.array([0, 1]), np.array([[B0, -B0]]) * z, np.zeros((m, 1)))
    return [L1, L2, L3, L4]


def cutoff_network(box, B, eps, p):
    """4-layer network on (x, y) approximating chi_box(x) * y for |y| <= B."""
    _check_eps(eps)
    if B < 1:
        raise ValueError("B must be >= 1")
    if not p > 0:
        raise ValueError("p must be positive")
    at, bt, S, B0, live, e = _cutoff_template(np.array([box.lower]), np.array([box.upper]),
                                              B, eps, p)
    layers = []
    for rows, cols, r, c, v, b in _cutoff_layers(at, bt, S, B0, live):
        layers.append(Layer.from_coo(rows, cols, r, c, v[0], np.arange(rows), b[0]))
    return Network(box.dim + 1, layers,
                   {"eps_tilde": 1.0 / S, "exponent": e, "lower_q": tuple(at[0]),
                    "upper_q": tuple(bt[0]), "degenerate": not bool(live[0])})


def _batched_cutoffs(at, bt, S, B0, live, num_outputs):
    """P(Lambda^l (.) Phi_l) for all boxes l, built directly in COO form.

    Phi_l selects (x, y_l) from the joint input (x, y_1..y_m); the sparse
    composition with the cutoff gives five layers per box.
    """
    m, d = at.shape
    D = d + num_outputs
    cut = _cutoff_layers(at, bt, S, B0, live)
    ell = np.arange(m)[:, None]
    layers = []
    # layer 1 of each block: [P_l; -P_l], rows stacked over l, shared input
    i = np.arange(d)
    lr = np.concatenate([i, [d], d + 1 + i, [2 * d + 1]])
    lv = np.concatenate([np.ones(d + 1), -np.ones(d + 1)])
    rows1 = 2 * d + 2
    R = (ell * rows1 + lr[None, :]).ravel()
    Cc = np.concatenate([np.tile(np.concatenate([i, [0]]), (m, 1)),
                         np.tile(np.concatenate([i, [0]]), (m, 1))], axis=1)
    Cc[:, d] = d + np.arange(m)
    Cc[:, 2 * d + 1] = d + np.arange(m)
    V = np.tile(lv, m)
    layers.append(Layer.from_coo(m * rows1, D, R, Cc.ravel(), V))
    # layer 2: [Lambda_1 | -Lambda_1], then Lambda_2..Lambda_4, block-diagonal
    rows, cols, r, c, v, b = cut[0]
    r2 = np.concatenate([r, r])
    c2 = np.concatenate([c, c + cols])
    v2 = np.concatenate([v, -v], axis=1)
    blocks = [(rows, 2 * cols, r2, c2, v2, b)] + cut[1:]
    for rows, cols, r, c, v, b in blocks:
        R = (ell * rows + r[None, :]).ravel()
        Cc = (ell * cols + c[None, :]).ravel()
        layers.append(Layer.from_coo(m * rows, m * cols, R, Cc, v.ravel(),
                                     np.arange(m * rows), b.ravel()))
    return Network(D, layers)


def cutoff_array(phi, boxes, B, eps, p):
    """Scalar network approximating sum_l chi_{box_l} * phi_l in L^p.

    Psi = sum (.) P(Lambda^l (.) Phi_l) (.) P(Id, phi), with each cutoff at
    accuracy eps / m; depth 6 + depth(phi).
    """
    _check_eps(eps)
    boxes = list(boxes)
    m = len(boxes)
    if phi.output_dim != m:
        raise ValueError(f"phi has {phi.output_dim} outputs but {m} boxes were given")
    d = phi.input_dim
    if any(b.dim != d for b in boxes):
        raise ValueError("box dimension does not match the network input")
    p0 = max(1.0, p)
    lower = np.array([b.lower for b in boxes])
    upper = np.array([b.upper for b in boxes])
    at, bt, S, B0, live, e = _cutoff_template(lower, upper, B, eps / m, p0)
    inner = parallelize(identity_network(d, depth(phi)), phi)
    cuts = _batched_cutoffs(at, bt, S, B0, live, m)
    total = linear_network(np.ones((1, m)))
    net = sparse_concatenate(total, sparse_concatenate(cuts, inner))
    return net.with_meta(cutoff_exponent=e, boxes=m, live_boxes=int(live.sum()))


def dyadic_cells(d, N):
    """Cells prod [(l_i - 1)/N - 1/2, l_i/N - 1/2] for l in {1..N}^d, lexicographic."""
    grid = np.array(list(itertools.product(range(1, N + 1), repeat=d)), dtype=np.float64)
    lower = (grid - 1) / N - 0.5
    upper = grid / N - 0.5
    return lower, upper
