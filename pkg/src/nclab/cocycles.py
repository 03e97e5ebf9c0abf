"""Hochschild cochains built from the bracket, the operators b, B0, B and
integration of universal forms along cochains.

Cochains are lazy closures: arguments are matrices, interned element ids, or
``UNIT`` (None) for the algebra unit.
"""

from math import factorial

import numpy as np

from nclab import linalg
from nclab.forms import UNIT, UniversalForm, matrix
from nclab.funcs import TestFunction
from nclab.moi import _cyclic_sum, divdiff_table


class Cochain:
    """Multilinear functional of degree n with lazy evaluation."""

    def __init__(self, degree: int, fn, label: str = ""):
        self.degree, self.fn, self.label = degree, fn, label

    def __call__(self, *args):
        if len(args) != self.degree + 1:
            raise ValueError(f"{self.label or 'cochain'} of degree {self.degree} "
                             f"takes {self.degree + 1} arguments, got {len(args)}")
        return complex(self.fn(*args))

    def __add__(self, other):
        assert self.degree == other.degree
        return Cochain(self.degree, lambda *a: self.fn(*a) + other.fn(*a),
                       f"({self.label}+{other.label})")

    def scale(self, s):
        return Cochain(self.degree, lambda *a: s * self.fn(*a), f"{s}*{self.label}")

    def __sub__(self, other):
        return self + other.scale(-1)

    def __repr__(self):
        return f"Cochain({self.label}, degree={self.degree})"


def zero_cochain(n: int) -> Cochain:
    return Cochain(n, lambda *a: 0.0, "0")


def _prod(a, b):
    if a is UNIT:
        return b
    if b is UNIT:
        return a
    return _as_mat(a) @ _as_mat(b)


def _as_mat(a):
    if isinstance(a, (int, np.integer)):
        return matrix(int(a))
    return np.asarray(a, dtype=complex)


class SpectralData:
    """D, f and the eigenbasis used by every phi_n."""

    def __init__(self, D, f: TestFunction):
        self.D = linalg.hermitian(D)
        self.f = f
        self.fp = f.derivative_function(1)
        self.es = linalg.eigh(self.D)
        self.N = self.D.shape[0]
        lam = self.es.values
        self.gap = lam[:, None] - lam[None, :]

    def rot(self, a):
        """Element in the eigenbasis (UNIT -> identity)."""
        if a is UNIT:
            return np.eye(self.N, dtype=complex)
        U = self.es.vectors
        return U.conj().T @ _as_mat(a) @ U

    def comm(self, a_rot):
        """[D, a] in the eigenbasis."""
        return self.gap * a_rot

    def bracket_rot(self, Ws):
        """Bracket of matrices already in the eigenbasis."""
        n = len(Ws)
        return _cyclic_sum(divdiff_table(self.fp, [self.es.values] * n), Ws)

    def bracket(self, Vs):
        return self.bracket_rot([self.rot(V) for V in Vs])


def phi(n: int, D, f: TestFunction, spec: SpectralData = None) -> Cochain:
    """phi_n(a0..an) = <a0[D,a1], [D,a2], ..., [D,an]>, phi_0 = 0."""
    if n == 0:
        return zero_cochain(0)
    sd = spec or SpectralData(D, f)

    def fn(*args):
        if any(a is UNIT for a in args[1:]):
            return 0.0
        r = [sd.rot(a) for a in args]
        Ws = [r[0] @ sd.comm(r[1])] + [sd.comm(x) for x in r[2:]]
        return sd.bracket_rot(Ws)

    return Cochain(n, fn, f"phi_{n}")


def b_op(c: Cochain) -> Cochain:
    """b: C^n -> C^{n+1}."""
    n = c.degree

    def fn(*a):
        s = 0.0
        for j in range(n + 1):
            args = a[:j] + (_prod(a[j], a[j + 1]),) + a[j + 2:]
            s += (-1) ** j * c.fn(*args)
        s += (-1) ** (n + 1) * c.fn(_prod(a[n + 1], a[0]), *a[1:n + 1])
        return s

    return Cochain(n + 1, fn, f"b{c.label}")


def B0_op(c: Cochain) -> Cochain:
    """B0 phi(a0..an) = phi(1, a0, ..., an)."""
    return Cochain(c.degree - 1, lambda *a: c.fn(UNIT, *a), f"B0{c.label}")


def B_op(c: Cochain) -> Cochain:
    """B phi(a0..an) = sum_j (-1)^{nj} phi(1, a_j, ..., a_{j-1})."""
    n = c.degree - 1

    def fn(*a):
        return sum((-1) ** (n * j) * c.fn(UNIT, *(a[j:] + a[:j])) for j in range(n + 1))

    return Cochain(n, fn, f"B{c.label}")


def psi(k: int, D, f: TestFunction, spec: SpectralData = None) -> Cochain:
    """psi_{2k-1} = phi_{2k-1} - (1/2) B0 phi_{2k}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    sd = spec or SpectralData(D, f)
    out = phi(2 * k - 1, D, f, sd) - B0_op(phi(2 * k, D, f, sd)).scale(0.5)
    out.label = f"psi_{2 * k - 1}"
    return out


def psi_tilde(k: int, D, f: TestFunction, spec: SpectralData = None) -> Cochain:
    c = (-1) ** (k - 1) * factorial(k - 1) / factorial(2 * k - 1)
    out = psi(k, D, f, spec).scale(c)
    out.label = f"psi~_{2 * k - 1}"
    return out


class CochainFamily:
    """phi or psi indexed by degree, so forms of mixed degree can be integrated."""

    def __init__(self, kind: str, D, f: TestFunction):
        if kind not in ("phi", "psi"):
            raise ValueError(kind)
        self.kind = kind
        self.sd = SpectralData(D, f)
        self._cache = {}

    def __getitem__(self, n: int) -> Cochain:
        if n not in self._cache:
            if self.kind == "phi":
                self._cache[n] = phi(n, self.sd.D, self.sd.f, self.sd)
            elif n % 2 == 1:
                self._cache[n] = psi((n + 1) // 2, self.sd.D, self.sd.f, self.sd)
            else:
                raise ValueError("psi is defined in odd degree only")
        return self._cache[n]


def integrate(family: CochainFamily, w: UniversalForm) -> complex:
    """Linear extension of a0 da1 ... dan -> chi_n(a0, ..., an)."""
    total = 0.0
    for (h, t), c in w.terms.items():
        total += c * family[len(t)](h, *t)
    return complex(total)


def random_tuple(rng, n: int, dim: int):
    return [linalg.random_matrix(rng, dim) for _ in range(n + 1)]
