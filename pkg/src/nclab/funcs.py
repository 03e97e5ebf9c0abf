"""Scalar test functions with closed-form derivatives and Hermite (confluent)
divided differences.

Every family implements ``deriv(k, x)`` for real arrays ``x``; values are
complex.  ``key`` is a hashable description used for caching divided
difference tables.
"""

from math import comb, factorial

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

from nclab.config import TOL
from nclab.linalg import ContractError, ConvergenceError

DEFAULT_ORDER = 12


class TestFunction:
    __test__ = False  # keep pytest from collecting the class
    max_order: int = DEFAULT_ORDER

    def _deriv(self, k, x):
        raise NotImplementedError

    @property
    def key(self):
        raise NotImplementedError

    def deriv(self, k: int, x):
        if k < 0 or k > self.max_order:
            raise ContractError(f"derivative order {k} outside 0..{self.max_order}")
        x = np.asarray(x, dtype=float)
        return np.asarray(self._deriv(k, x), dtype=complex) * np.ones_like(x)

    def __call__(self, x):
        return self.deriv(0, x)

    def derivative_function(self, m: int = 1) -> "TestFunction":
        return self if m == 0 else Shifted(self, m)

    def __add__(self, other):
        return Sum(self, other)

    def __mul__(self, other):
        return Product(self, other)

    def __repr__(self):
        return f"{type(self).__name__}{self.key[1:]}"


def _falling(a, k):
    out = 1
    for j in range(k):
        out *= a - j
    return out


class Monomial(TestFunction):
    """c * x**m"""

    def __init__(self, m: int, c: complex = 1.0, max_order: int = DEFAULT_ORDER):
        if m < 0:
            raise ContractError("monomial power must be non-negative")
        self.m, self.c, self.max_order = int(m), complex(c), max_order

    @property
    def key(self):
        return ("Monomial", self.m, self.c)

    def _deriv(self, k, x):
        if k > self.m:
            return np.zeros_like(x)
        return self.c * _falling(self.m, k) * x ** (self.m - k)


class Polynomial(TestFunction):
    """Polynomial with ascending coefficients."""

    def __init__(self, coeffs, max_order: int = DEFAULT_ORDER):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.max_order = max_order

    @property
    def key(self):
        return ("Polynomial", tuple(self.coeffs.tolist()))

    def _deriv(self, k, x):
        c = P.polyder(self.coeffs, k) if k else self.coeffs
        if c.size == 0:
            return np.zeros_like(x)
        return P.polyval(x, c)


class PolyGaussian(TestFunction):
    """p(x) exp(-x^2 / width^2) with p given by ascending coefficients.

    Derivatives are q_k(x) exp(-x^2/width^2) with
    q_{k+1} = q_k' - (2x/width^2) q_k.
    """

    def __init__(self, coeffs=(1.0,), width: float = 1.0, max_order: int = DEFAULT_ORDER):
        if width <= 0:
            raise ContractError("width must be positive")
        self.coeffs = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
        if self.coeffs.size == 0:
            self.coeffs = np.zeros(1, dtype=complex)
        self.width = float(width)
        self.max_order = max_order
        self._q = [self.coeffs]
        lin = np.array([0.0, -2.0 / self.width ** 2])
        for _ in range(max_order):
            q = self._q[-1]
            self._q.append(P.polyadd(P.polyder(q), P.polymul(lin, q)))

    @property
    def key(self):
        return ("PolyGaussian", tuple(self.coeffs.tolist()), self.width)

    def _deriv(self, k, x):
        return P.polyval(x, self._q[k]) * np.exp(-(x / self.width) ** 2)

    def times_poly(self, coeffs) -> "PolyGaussian":
        return PolyGaussian(P.polymul(self.coeffs, coeffs), self.width, self.max_order)

    def fourier_poly(self, n: int = 0):
        """Coefficients R with FT(f^{(n)})(x) = R(x) exp(-width^2 x^2 / 4).

        FT convention: g^(x) = int dy/(2 pi) g(y) exp(-i y x).
        """
        s = self.width
        base = np.array([s / (2.0 * np.sqrt(np.pi))], dtype=complex)
        lin = np.array([0.0, -s * s / 2.0])
        # y^j e^{-y^2/s^2}  ->  (i d/dx)^j applied to the transformed Gaussian
        out = np.zeros(1, dtype=complex)
        R = base
        for j, c in enumerate(self.coeffs):
            if j:
                R = 1j * P.polyadd(P.polyder(R), P.polymul(lin, R))
            out = P.polyadd(out, c * R)
        # d/dy -> multiplication by i x
        return P.polymul(out, P.polypow(np.array([0.0, 1j]), n)) if n else out

    def fourier_l1(self, n: int = 0) -> float:
        """L1 norm of the Fourier transform of the n-th derivative."""
        R = self.fourier_poly(n)
        a = self.width ** 2 / 4.0
        # the polynomial is bounded by a polynomial in |x|, the Gaussian is
        # negligible beyond 40/width
        L = 40.0 / self.width

        def integrand(x):
            return abs(P.polyval(x, R)) * np.exp(-a * x * x)

        roots = np.roots(R[::-1]) if R.size > 1 else np.array([])
        pts = sorted({float(r.real) for r in roots if abs(r.imag) < 1e-9 and abs(r.real) < L})
        val, err = integrate.quad(integrand, -L, L, points=pts or None, epsabs=1e-10,
                                  epsrel=1e-10, limit=500)
        if err > 1e-8:
            raise ConvergenceError(f"Fourier-norm quadrature error {err:.2e}")
        return float(val)


def Gaussian(width: float = 1.0, max_order: int = DEFAULT_ORDER) -> PolyGaussian:
    return PolyGaussian((1.0,), width, max_order)


class RationalU(TestFunction):
    """u(x)**power with u(x) = x - i; power may be negative."""

    def __init__(self, power: int, max_order: int = DEFAULT_ORDER):
        self.power, self.max_order = int(power), max_order

    @property
    def key(self):
        return ("RationalU", self.power)

    def _deriv(self, k, x):
        c = _falling(self.power, k)
        if c == 0:
            return np.zeros_like(x)
        return c * (x - 1j) ** (self.power - k)


class ComplexExponential(TestFunction):
    """c * exp(i omega x)"""

    def __init__(self, omega: float, c: complex = 1.0, max_order: int = DEFAULT_ORDER):
        self.omega, self.c, self.max_order = float(omega), complex(c), max_order

    @property
    def key(self):
        return ("ComplexExponential", self.omega, self.c)

    def _deriv(self, k, x):
        return self.c * (1j * self.omega) ** k * np.exp(1j * self.omega * x)


class TrigPoly(TestFunction):
    """sum_j c_j exp(i omega_j x)"""

    def __init__(self, terms, max_order: int = DEFAULT_ORDER):
        self.terms = tuple((complex(c), float(w)) for c, w in terms)
        self.max_order = max_order

    @property
    def key(self):
        return ("TrigPoly", self.terms)

    def _deriv(self, k, x):
        out = np.zeros(np.shape(x), dtype=complex)
        for c, w in self.terms:
            out = out + c * (1j * w) ** k * np.exp(1j * w * x)
        return out


class Sum(TestFunction):
    def __init__(self, *parts):
        self.parts = tuple(parts)
        self.max_order = min(p.max_order for p in parts)

    @property
    def key(self):
        return ("Sum",) + tuple(p.key for p in self.parts)

    def _deriv(self, k, x):
        return sum(p.deriv(k, x) for p in self.parts)


class Product(TestFunction):
    """Pointwise product; derivatives by the Leibniz rule."""

    def __init__(self, f: TestFunction, g: TestFunction):
        self.f, self.g = f, g
        self.max_order = min(f.max_order, g.max_order)

    @property
    def key(self):
        return ("Product", self.f.key, self.g.key)

    def _deriv(self, k, x):
        return sum(comb(k, j) * self.f.deriv(j, x) * self.g.deriv(k - j, x)
                   for j in range(k + 1))


class Shifted(TestFunction):
    """The m-th derivative of f as a test function."""

    def __init__(self, f: TestFunction, m: int):
        if m > f.max_order:
            raise ContractError("derivative order exceeds available order")
        self.f, self.m = f, int(m)
        self.max_order = f.max_order - m

    @property
    def key(self):
        return ("Shifted", self.f.key, self.m)

    def _deriv(self, k, x):
        return self.f.deriv(k + self.m, x)


def weight_by_u(f: TestFunction, m: int) -> TestFunction:
    """f * u**m with u(x) = x - i."""
    if m < 0:
        raise ContractError("weight power must be non-negative")
    if m == 0:
        return f
    if isinstance(f, PolyGaussian):
        # stays in the family so Fourier norms remain available
        u = P.polypow(np.array([-1j, 1.0]), m)
        return f.times_poly(u)
    return Product(f, RationalU(m, f.max_order))


# divided differences ---------------------------------------------------------

def divided_difference(f: TestFunction, nodes, cluster: float = TOL.cluster):
    """f^{[n]} at the nodes stored along the last axis (vectorized).

    Nodes are sorted; neighbouring nodes closer than ``cluster`` (relative to
    max(1, |x|)) are treated as equal and the confluent entry
    f^{(k)}(cluster mean)/k! is used.
    """
    x = np.sort(np.asarray(nodes, dtype=float), axis=-1)
    n = x.shape[-1] - 1
    if n < 0:
        raise ContractError("need at least one node")
    if n > f.max_order:
        raise ContractError(f"order {n} exceeds function order {f.max_order}")
    T = f.deriv(0, x)
    csum = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    scale = np.maximum(1.0, np.abs(x))
    for k in range(1, n + 1):
        gap = x[..., k:] - x[..., :-k]
        conf = gap <= cluster * scale[..., k:]
        with np.errstate(divide="ignore", invalid="ignore"):
            T = (T[..., 1:] - T[..., :-1]) / np.where(conf, 1.0, gap)
        if np.any(conf):
            mean = (csum[..., k + 1:] - csum[..., :-k - 1]) / (k + 1)
            T[conf] = f.deriv(k, mean[conf]) / factorial(k)
    return T[..., 0]


def divdiff_grid(f: TestFunction, lams, cluster: float = TOL.cluster):
    """Tensor D[i0,...,in] = f^{[n]}(lams[0][i0], ..., lams[n][in])."""
    lams = [np.asarray(l, dtype=float) for l in lams]
    grids = np.meshgrid(*lams, indexing="ij")
    return divided_difference(f, np.stack(grids, axis=-1), cluster)


# Fourier seminorm ------------------------------------------------------------

def c_sn(f: PolyGaussian, s: int, n: int) -> float:
    """sum_k C(s,k) ||FT((f u^{s-k})^{(n-k)})||_1 / (n-k)!."""
    if not isinstance(f, PolyGaussian):
        raise ContractError("Fourier seminorm available for PolyGaussian only")
    total = 0.0
    for k in range(min(s, n) + 1):
        g = weight_by_u(f, s - k)
        total += comb(s, k) * g.fourier_l1(n - k) / factorial(n - k)
    return total


# config records ----------------------------------------------------------------

FAMILIES = {
    "Gaussian": lambda p: Gaussian(p.get("width", 1.0)),
    "PolyGaussian": lambda p: PolyGaussian(p.get("coeffs", [1.0]), p.get("width", 1.0)),
    "Monomial": lambda p: Monomial(p["m"], p.get("c", 1.0)),
    "Polynomial": lambda p: Polynomial(p["coeffs"]),
    "RationalU": lambda p: RationalU(p["power"]),
    "ComplexExponential": lambda p: ComplexExponential(p["omega"], p.get("c", 1.0)),
    "TrigPoly": lambda p: TrigPoly(p["terms"]),
}


def from_spec(spec: dict) -> TestFunction:
    """Build a function from a {family, params} record."""
    try:
        return FAMILIES[spec["family"]](spec.get("params", {}))
    except KeyError as exc:
        raise ContractError(f"bad function spec {spec!r}: missing {exc}") from None
