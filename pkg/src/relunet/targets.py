"""Target function descriptors and the named built-in targets.

All callables act on arrays of shape (n, d) and return arrays of shape (n,).
Descriptors are trusted: the Hoelder data (beta, bound) is not certified.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


def _as_points(X, d):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != d:
        raise ValueError(f"points have dimension {X.shape[1]}, expected {d}")
    return X


def heaviside(t):
    return (np.asarray(t) >= 0).astype(np.float64)


@dataclass(frozen=True, eq=False)
class SmoothTarget:
    """f on [-1/2, 1/2]^dim with derivatives up to order n, beta = n + sigma."""

    dim: int
    beta: float
    bound: float
    func: Callable
    derivative: Callable  # (alpha tuple, points) -> values
    name: str = "smooth"

    def __post_init__(self):
        if self.dim < 1 or not self.beta > 0 or not self.bound > 0:
            raise ValueError("SmoothTarget needs dim >= 1, beta > 0, bound > 0")

    @property
    def order(self):
        return int(math.ceil(self.beta)) - 1

    def __call__(self, X):
        return np.asarray(self.func(_as_points(X, self.dim)), dtype=np.float64)

    def deriv(self, alpha, X):
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim or sum(alpha) > self.order:
            raise ValueError(f"derivative {alpha} not available (order {self.order})")
        return np.asarray(self.derivative(alpha, _as_points(X, self.dim)), dtype=np.float64)

    def derivative_mismatch(self, rng, probes=20, h=1e-5):
        """Largest central-difference mismatch of first-order oracle steps."""
        worst = 0.0
        X = rng.uniform(-0.4, 0.4, size=(probes, self.dim))
        for k in range(self.order):
            for a in itertools.product(range(k + 1), repeat=self.dim):
                if sum(a) != k:
                    continue
                for j in range(self.dim):
                    up = list(a)
                    up[j] += 1
                    E = np.zeros(self.dim)
                    E[j] = h
                    fd = (self.deriv(a, X + E) - self.deriv(a, X - E)) / (2 * h)
                    worst = max(worst, float(np.abs(fd - self.deriv(tuple(up), X)).max()))
        return worst


@dataclass(frozen=True, eq=False)
class HorizonTarget:
    """x -> H((Tx)_1 + gamma((Tx)_2, ..., (Tx)_d)) with (Tx)_i = x[permutation[i]]."""

    gamma: SmoothTarget
    permutation: Optional[tuple] = None
    name: str = "horizon"

    def __post_init__(self):
        d = self.gamma.dim + 1
        perm = tuple(range(d)) if self.permutation is None else tuple(int(i) for i in self.permutation)
        if sorted(perm) != list(range(d)):
            raise ValueError("permutation must be a bijection of {0, ..., d-1}")
        object.__setattr__(self, "permutation", perm)

    @property
    def dim(self):
        return self.gamma.dim + 1

    @property
    def beta(self):
        return self.gamma.beta

    def __call__(self, X):
        Y = _as_points(X, self.dim)[:, list(self.permutation)]
        return heaviside(Y[:, 0] + self.gamma(Y[:, 1:]))


def cell_index(X, r):
    """1-based dyadic cell index of each point (points outside are clipped)."""
    n = 2 ** r
    return np.clip(np.floor((X + 0.5) * n).astype(np.int64) + 1, 1, n)


@dataclass(frozen=True, eq=False)
class PiecewiseTarget:
    """chi_K given cellwise by horizon functions, optionally times g."""

    dim: int
    r: int
    cell_horizons: dict
    smooth_factor: Optional[SmoothTarget] = None
    name: str = "piecewise"

    def __post_init__(self):
        if self.r < 0 or self.dim < 2:
            raise ValueError("need r >= 0 and dim >= 2")
        for lam, hf in self.cell_horizons.items():
            if len(lam) != self.dim or hf.dim != self.dim:
                raise ValueError(f"cell {lam} has a descriptor of the wrong dimension")
        if self.smooth_factor is not None and self.smooth_factor.dim != self.dim:
            raise ValueError("smooth factor has the wrong dimension")

    @classmethod
    def uniform(cls, horizon, r, smooth_factor=None, name="piecewise"):
        cells = itertools.product(range(1, 2 ** r + 1), repeat=horizon.dim)
        return cls(horizon.dim, r, {lam: horizon for lam in cells}, smooth_factor, name)

    def cells(self):
        return list(itertools.product(range(1, 2 ** self.r + 1), repeat=self.dim))

    def missing_cells(self):
        return [lam for lam in self.cells() if lam not in self.cell_horizons]

    @property
    def beta(self):
        return max(hf.beta for hf in self.cell_horizons.values())

    def indicator(self, X):
        X = _as_points(X, self.dim)
        idx = cell_index(X, self.r)
        out = np.zeros(len(X))
        keys = np.unique(idx, axis=0)
        for lam in keys:
            sel = np.all(idx == lam, axis=1)
            out[sel] = self.cell_horizons[tuple(int(v) for v in lam)](X[sel])
        return out

    def __call__(self, X):
        v = self.indicator(X)
        if self.smooth_factor is not None:
            v = v * self.smooth_factor(X)
        return v

    def boundary_mismatch(self, rng, samples=200):
        """Fraction of shared-face sample points where neighbouring descriptors disagree."""
        n = 2 ** self.r
        bad = total = 0
        for lam in self.cells():
            for j in range(self.dim):
                if lam[j] == n:
                    continue
                nb = list(lam)
                nb[j] += 1
                X = np.array([rng.uniform((l - 1) / n - 0.5, l / n - 0.5, samples) for l in lam]).T
                X[:, j] = lam[j] / n - 0.5
                a = self.cell_horizons[lam](X)
                b = self.cell_horizons[tuple(nb)](X)
                bad += int(np.sum(a != b))
                total += samples
        return bad / total if total else 0.0


@dataclass(frozen=True, eq=False)
class AffineFeature:
    """Exact affine coordinate x -> w . x + b, realized by a single layer."""

    weights: tuple
    bias: float = 0.0

    @property
    def dim(self):
        return len(self.weights)

    def __call__(self, X):
        return _as_points(X, self.dim) @ np.asarray(self.weights, dtype=np.float64) + self.bias


@dataclass(frozen=True, eq=False)
class CompositeTarget:
    """f = g o tau with tau: [-1/2, 1/2]^D -> [-1/2, 1/2]^d given coordinatewise."""

    outer: object
    features: tuple
    kappa: float = 1.0
    name: str = "composite"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        dims = {f.dim for f in self.features}
        if len(dims) != 1:
            raise ValueError("feature coordinates must share one input dimension")
        if len(self.features) != self.outer.dim:
            raise ValueError("number of features must equal the outer dimension")

    @property
    def dim(self):
        return self.features[0].dim

    def tau(self, X):
        return np.stack([f(X) for f in self.features], axis=1)

    def __call__(self, X):
        return self.outer(self.tau(_as_points(X, self.dim)))


# -- built-in targets -----------------------------------------------------

# Hoelder bound declared for gamma = 0.  Any positive value is a valid bound
# for the zero function; a small one keeps the cell count of the smooth
# approximation of gamma small.
ZERO_BOUND = 2.0 ** -20


def trigonometric_target(dim, amplitude, omega, phase=0.0, beta=2.0, coord=0, name="trigonometric"):
    """f(x) = A sin(omega x_coord + phase) with its C^{0,beta} bound."""
    n = int(math.ceil(beta)) - 1
    sigma = beta - n
    A, w = float(amplitude), float(omega)

    def func(X):
        return A * np.sin(w * X[:, coord] + phase)

    def derivative(alpha, X):
        if any(a for i, a in enumerate(alpha) if i != coord):
            return np.zeros(len(X))
        j = alpha[coord]
        return A * w ** j * np.sin(w * X[:, coord] + phase + j * math.pi / 2)

    sups = [abs(A) * w ** j for j in range(n + 1)]
    holder = abs(A) * w ** n * 2.0 ** (1 - sigma) * w ** sigma
    bound = max(sups + [holder])
    return SmoothTarget(dim, beta, bound, func, derivative, name)


def _poly_terms_derivative(terms, alpha):
    out = {}
    for a, c in terms.items():
        if all(x >= y for x, y in zip(a, alpha)):
            f = 1
            for x, y in zip(a, alpha):
                f *= math.perm(x, y)
            key = tuple(x - y for x, y in zip(a, alpha))
            out[key] = out.get(key, 0.0) + c * f
    return out


def _poly_eval(terms, X):
    v = np.zeros(len(X))
    for a, c in terms.items():
        v += c * np.prod(X ** np.array(a), axis=1)
    return v


def polynomial_target(dim, terms, beta=None, name="polynomial"):
    """Polynomial sum_alpha c_alpha x^alpha; beta defaults to degree + 1."""
    terms = {tuple(int(v) for v in a): float(c) for a, c in terms.items()}
    deg = max(sum(a) for a in terms) if terms else 0
    beta = float(deg + 1) if beta is None else float(beta)
    n = int(math.ceil(beta)) - 1
    sigma = beta - n

    def sup_bound(t):
        return sum(abs(c) * 0.5 ** sum(a) for a, c in t.items())

    bound = 0.0
    for k in range(n + 1):
        for a in itertools.product(range(k + 1), repeat=dim):
            if sum(a) == k:
                bound = max(bound, sup_bound(_poly_terms_derivative(terms, a)))
    for a in itertools.product(range(n + 1), repeat=dim):
        if sum(a) == n:
            da = _poly_terms_derivative(terms, a)
            grad = math.sqrt(sum(sup_bound(_poly_terms_derivative(da, e)) ** 2
                                 for e in np.eye(dim, dtype=int).tolist()))
            bound = max(bound, grad * math.sqrt(dim) ** (1 - sigma))
    bound = max(bound, ZERO_BOUND)

    def func(X):
        return _poly_eval(terms, X)

    def derivative(alpha, X):
        return _poly_eval(_poly_terms_derivative(terms, alpha), X)

    return SmoothTarget(dim, beta, bound, func, derivative, name)


def constant_target(dim, value, beta=2.0, name="constant"):
    c = float(value)
    return SmoothTarget(dim, beta, max(abs(c), ZERO_BOUND),
                        lambda X: np.full(len(X), c),
                        lambda alpha, X: np.full(len(X), c if sum(alpha) == 0 else 0.0), name)


def constant_horizon(dim, shift, beta=2.0, permutation=None):
    """H(x_1 + shift): the half-space {x_1 >= -shift}."""
    return HorizonTarget(constant_target(dim - 1, shift, beta, "gamma"), permutation,
                         name="horizon_constant")


def sinusoidal_horizon(dim, amplitude=0.2, frequency=1.0, beta=2.0, permutation=None):
    """H(x_1 + A sin(2 pi nu x_2))."""
    gamma = trigonometric_target(dim - 1, amplitude, 2 * math.pi * frequency, 0.0, beta, 0, "gamma")
    return HorizonTarget(gamma, permutation, name="horizon_sinusoidal")


def half_cube(dim, r=1, beta=2.0):
    """Indicator of {x_1 >= 0}, given as gamma = 0 in every dyadic cell."""
    return PiecewiseTarget.uniform(constant_horizon(dim, 0.0, beta), r, name="half_cube")


def _coeff_terms(raw):
    """Terms from {"2,0": c} or [[[2, 0], c], ...]."""
    if isinstance(raw, dict):
        return {tuple(int(v) for v in str(k).split(",")): float(c) for k, c in raw.items()}
    return {tuple(int(v) for v in a): float(c) for a, c in raw}


def target_from_spec(spec):
    """Build a target from a target-spec dictionary with a "kind" field."""
    kind = spec.get("kind")
    dim = int(spec.get("dim", 2))
    beta = float(spec.get("beta", 2.0))
    if kind == "polynomial":
        return polynomial_target(dim, _coeff_terms(spec["coefficients"]), spec.get("beta"))
    if kind == "trigonometric":
        return trigonometric_target(dim, float(spec.get("amplitude", 1.0)),
                                    float(spec.get("omega", math.pi)),
                                    float(spec.get("phase", 0.0)), beta)
    if kind == "horizon_constant":
        return constant_horizon(dim, float(spec.get("shift", 0.0)), beta)
    if kind == "horizon_sinusoidal":
        return sinusoidal_horizon(dim, float(spec.get("amplitude", 0.2)),
                                  float(spec.get("frequency", 1.0)), beta)
    if kind == "half_cube":
        return half_cube(dim, int(spec.get("r", 1)), beta)
    if kind == "indicator_sinusoidal":
        hz = sinusoidal_horizon(dim, float(spec.get("amplitude", 0.2)),
                                float(spec.get("frequency", 1.0)), beta)
        return PiecewiseTarget.uniform(hz, int(spec.get("r", 1)), name="indicator_sinusoidal")
    if kind == "piecewise_half_cube":
        terms = _coeff_terms(spec.get("coefficients", {"1" + ",0" * (dim - 1): 1.0,
                                                       ",".join(["0"] * dim): 0.3}))
        g = polynomial_target(dim, terms, spec.get("g_beta", beta))
        return PiecewiseTarget.uniform(constant_horizon(dim, 0.0, beta), int(spec.get("r", 1)),
                                       g, name="piecewise_half_cube")
    raise ValueError(f"unknown target kind: {kind!r}")
