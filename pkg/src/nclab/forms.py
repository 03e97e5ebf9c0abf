"""Universal differential forms over a concrete matrix algebra.

A monomial c a0 da1 ... dan is stored as ``(head, tail) -> c`` where head is
an element id or ``None`` for the algebra unit and tail is a tuple of ids.
Elements are interned by their entries rounded to 12 digits, so
syntactically equal monomials merge.
"""

from collections import defaultdict
from fractions import Fraction

import numpy as np

from nclab import linalg
from nclab.config import TOL
from nclab.linalg import ContractError

UNIT = None
_ELEMS: list = []
_INDEX: dict = {}


def element(M) -> int:
    """Intern a matrix as an algebra element and return its id."""
    M = linalg.as_matrix(M)
    key = (M.shape[0], (np.round(M, 12) + 0.0).tobytes())
    idx = _INDEX.get(key)
    if idx is None:
        idx = len(_ELEMS)
        _ELEMS.append(M.copy())
        _INDEX[key] = idx
    return idx


def matrix(e, dim: int = None) -> np.ndarray:
    if e is UNIT:
        if dim is None:
            raise ContractError("unit needs a dimension")
        return np.eye(dim, dtype=complex)
    return _ELEMS[e]


def _mul_elem(a, b):
    if a is UNIT:
        return b
    if b is UNIT:
        return a
    return element(_ELEMS[a] @ _ELEMS[b])


class UniversalForm:
    """Finite sum of monomials c a0 da1 ... dan (mixed degree allowed)."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for mono, c in terms.items() if isinstance(terms, dict) else terms:
                self._add(mono, c)

    def _add(self, mono, c):
        c = self.terms.get(mono, 0) + c
        if c == 0:
            self.terms.pop(mono, None)
        else:
            self.terms[mono] = c

    # constructors -----------------------------------------------------------
    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def scalar(cls, c=1.0):
        return cls({(UNIT, ()): c})

    @classmethod
    def elem(cls, a, c=1.0):
        """Degree-0 form c*a (a is an id, a matrix or UNIT)."""
        if a is not UNIT and not isinstance(a, (int, np.integer)):
            a = element(a)
        return cls({(a, ()): c})

    @classmethod
    def monomial(cls, head, tail, c=1.0):
        ids = lambda x: x if x is UNIT or isinstance(x, (int, np.integer)) else element(x)
        tail = tuple(ids(t) for t in tail)
        if any(t is UNIT for t in tail):
            return cls()
        return cls({(ids(head), tail): c})

    @classmethod
    def one_form(cls, pairs):
        """sum_j a_j db_j from (a_j, b_j) matrix pairs."""
        out = cls()
        for a, b in pairs:
            out = out + cls.monomial(a, (b,))
        return out

    # algebra ------------------------------------------------------------------
    def copy(self):
        f = UniversalForm()
        f.terms = dict(self.terms)
        return f

    def __add__(self, other):
        out = self.copy()
        for m, c in other.terms.items():
            out._add(m, c)
        return out

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        out = UniversalForm()
        if s != 0:
            out.terms = {m: c * s for m, c in self.terms.items()}
        return out

    def __rmul__(self, s):
        return self.scale(s)

    def __mul__(self, other):
        if not isinstance(other, UniversalForm):
            return self.scale(other)
        return multiply(self, other)

    def __pow__(self, k: int):
        out = UniversalForm.scalar(1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, UniversalForm) and (self - other).is_zero()

    def is_zero(self, tol: float = 0.0):
        return all(abs(c) <= tol for c in self.terms.values())

    def degrees(self):
        return {len(t) for (_, t) in self.terms}

    def homogeneous(self, k: int) -> "UniversalForm":
        return UniversalForm({m: c for m, c in self.terms.items() if len(m[1]) == k})

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"UniversalForm({len(self.terms)} monomials, degrees {sorted(self.degrees())})"

    def d(self):
        return d(self)

    def star(self):
        return star(self)


def d(w: UniversalForm) -> UniversalForm:
    out = UniversalForm()
    for (h, t), c in w.terms.items():
        if h is not UNIT:
            out._add((UNIT, (h,) + t), c)
    return out


def _right_mul(h, tail, b):
    """(h da1..dan) * b as a list of (coef, head, tail), using (da)b = d(ab) - a db."""
    if not tail:
        return [(1, _mul_elem(h, b), ())]
    out = [(1, h, tail[:-1] + (_mul_elem(tail[-1], b),))]
    for c, hh, tt in _right_mul(h, tail[:-1], tail[-1]):
        out.append((-c, hh, tt + (b,)))
    return out


def multiply(w: UniversalForm, v: UniversalForm) -> UniversalForm:
    out = UniversalForm()
    for (h1, t1), c1 in w.terms.items():
        for (h2, t2), c2 in v.terms.items():
            if h2 is UNIT:
                out._add((h1, t1 + t2), c1 * c2)
                continue
            for c, hh, tt in _right_mul(h1, t1, h2):
                if any(x is UNIT for x in tt):
                    continue
                out._add((hh, tt + t2), c * c1 * c2)
    return out


def star(w: UniversalForm) -> UniversalForm:
    """Adjoint with (da)* = -d(a*), so that pi_D(w*) = pi_D(w)* for Hermitian D."""
    out = UniversalForm()
    for (h, t), c in w.terms.items():
        ts = tuple(element(_ELEMS[a].conj().T) for a in reversed(t))
        left = UniversalForm({(UNIT, ts): np.conj(c) * (-1) ** len(t)})
        hs = UNIT if h is UNIT else element(_ELEMS[h].conj().T)
        out = out + left * UniversalForm({(hs, ()): 1.0})
    return out


def hermitian_part(w: UniversalForm) -> UniversalForm:
    return (w + star(w)).scale(0.5)


def pi_D(w: UniversalForm, D) -> np.ndarray:
    """sum c a0 [D,a1] ... [D,an]."""
    D = linalg.as_matrix(D)
    N = D.shape[0]
    comm = {}
    out = np.zeros((N, N), dtype=complex)
    for (h, t), c in w.terms.items():
        M = matrix(h, N).copy() if h is not UNIT else np.eye(N, dtype=complex)
        for a in t:
            if a not in comm:
                comm[a] = linalg.commutator(D, _ELEMS[a])
            M = M @ comm[a]
        out += c * M
    return out


def _require_degree_one(A: UniversalForm):
    if A.degrees() - {1}:
        raise ContractError("expected a homogeneous one-form")


def curvature(A: UniversalForm) -> UniversalForm:
    """F = dA + A^2."""
    _require_degree_one(A)
    return d(A) + A * A


class TPolynomialForm(dict):
    """Map t-power -> UniversalForm."""

    def __mul__(self, other):
        out = TPolynomialForm()
        for p, w in self.items():
            for q, v in other.items():
                out[p + q] = out.get(p + q, UniversalForm()) + w * v
        return out

    def integrate01(self) -> UniversalForm:
        """Exact integral over t in [0, 1] (rational weights 1/(p+1))."""
        out = UniversalForm()
        for p, w in self.items():
            out = out + w.scale(float(Fraction(1, p + 1)))
        return out


def curvature_t(A: UniversalForm) -> TPolynomialForm:
    """F_t = t dA + t^2 A^2."""
    _require_degree_one(A)
    return TPolynomialForm({1: d(A), 2: A * A})


def chern_simons(A: UniversalForm, k: int) -> UniversalForm:
    """cs_{2k-1}(A) = int_0^1 A F_t^{k-1} dt."""
    if k < 1:
        raise ContractError("k must be >= 1")
    _require_degree_one(A)
    poly = TPolynomialForm({0: A})
    Ft = curvature_t(A)
    for _ in range(k - 1):
        poly = poly * Ft
    return poly.integrate01()


def gauge_transform(A: UniversalForm, U) -> UniversalForm:
    """A^U = U dU* + U A U*."""
    U = linalg.as_matrix(U)
    if np.abs(U @ U.conj().T - np.eye(U.shape[0])).max() > TOL.unitary:
        raise ContractError("gauge element is not unitary")
    u, us = element(U), element(U.conj().T)
    Uf, Usf = UniversalForm.elem(u), UniversalForm.elem(us)
    return UniversalForm({(u, (us,)): 1.0}) + Uf * A * Usf


def random_hermitian_one_form(rng, n_terms: int, dim: int, scale: float = 1.0) -> UniversalForm:
    """Hermitian part of sum a_j db_j with random bounded a_j, b_j."""
    pairs = [(linalg.random_matrix(rng, dim, scale), linalg.random_matrix(rng, dim))
             for _ in range(n_terms)]
    return hermitian_part(UniversalForm.one_form(pairs))
