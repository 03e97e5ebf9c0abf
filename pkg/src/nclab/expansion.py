"""Chern-Simons / Yang-Mills expansion of Tr(f(D+V) - f(D)) for V = pi_D(A).

Forms built from a single one-form A are handled as noncommutative
polynomials in the letters ``A`` (degree 1) and ``dA`` (degree 2).  A word is
evaluated by mapping universal forms into tensor chains:

    a0 da1 ... dan  ->  a0 (1 x a1 - a1 x 1) ... (1 x an - an x 1)

where adjacent tensor factors multiply.  In D's eigenbasis a chain of degree
n is an array E[j0, ..., j_{n+1}] and phi_n becomes the contraction of the
closed chain (j_{n+1} = j0) with the kernel

    kappa(j0..jn) = (f')^[n-1](l_j0, l_j2, ..., l_jn) (l_j1 - l_j2) prod_{k>=2} (l_jk - l_j{k+1}).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import factorial

import numpy as np

from nclab import linalg
from nclab.cocycles import CochainFamily, SpectralData, integrate, psi
from nclab.forms import UniversalForm, chern_simons, curvature, d, gauge_transform, pi_D
from nclab.funcs import TestFunction
from nclab.linalg import ContractError
from nclab.moi import MoiContext, divdiff_table, moi_operator

LETTER_DEGREE = {"A": 1, "dA": 2}


# word polynomials -------------------------------------------------------------

class WordPoly(dict):
    """Map word (tuple of 'A'/'dA') -> coefficient."""

    @staticmethod
    def word(*letters, c=1):
        return WordPoly({tuple(letters): c})

    def __add__(self, other):
        out = WordPoly(self)
        for w, c in other.items():
            out[w] = out.get(w, 0) + c
            if out[w] == 0:
                del out[w]
        return out

    def scale(self, s):
        return WordPoly({w: c * s for w, c in self.items()}) if s != 0 else WordPoly()

    def __sub__(self, other):
        return self + other.scale(-1)

    def __mul__(self, other):
        out = WordPoly()
        for w1, c1 in self.items():
            for w2, c2 in other.items():
                w = w1 + w2
                out[w] = out.get(w, 0) + c1 * c2
        return WordPoly({w: c for w, c in out.items() if c != 0})

    def __pow__(self, k):
        out = WordPoly({(): 1})
        for _ in range(k):
            out = out * self
        return out


def word_degree(w) -> int:
    return sum(LETTER_DEGREE[x] for x in w)


def d_words(p: WordPoly) -> WordPoly:
    """Graded Leibniz: d(A) = dA, d(dA) = 0."""
    out = WordPoly()
    for w, c in p.items():
        deg = 0
        for i, x in enumerate(w):
            if x == "A":
                nw = w[:i] + ("dA",) + w[i + 1:]
                out = out + WordPoly({nw: c * (-1) ** deg})
            deg += LETTER_DEGREE[x]
    return out


def cs_words(k: int) -> WordPoly:
    """cs_{2k-1}(A) = int_0^1 A (t dA + t^2 A^2)^{k-1} dt with exact weights."""
    out = WordPoly()
    for choice in product((("dA",), ("A", "A")), repeat=k - 1):
        w = ("A",) + sum(choice, ())
        tpow = sum(len(c) for c in choice)  # dA carries t, A A carries t^2
        out = out + WordPoly({w: Fraction(1, tpow + 1)})
    return out


def curvature_words() -> WordPoly:
    return WordPoly({("dA",): 1, ("A", "A"): 1})


def extra_words(k: int) -> WordPoly:
    """int_0^1 A F_t^{k-1} t A dt."""
    out = WordPoly()
    for choice in product((("dA",), ("A", "A")), repeat=k - 1):
        w = ("A",) + sum(choice, ()) + ("A",)
        tpow = sum(len(c) for c in choice) + 1
        out = out + WordPoly({w: Fraction(1, tpow + 1)})
    return out


def index_set(K: int):
    """T_K as a list of (v, w, p)."""
    out = []
    for m in range(0, K + 1):
        # |v| + |w| < K with w_i >= 1 and v_i >= 1 for i >= 2
        for w in product(range(1, K + 1), repeat=m):
            sw = sum(w)
            if sw >= K and m:
                continue
            for v in product(*([range(0, K)] + [range(1, K)] * (m - 1))) if m else [()]:
                sv = sum(v)
                if sv + sw >= K:
                    continue
                for p in range(0, 2 * K + 2):
                    if sv + sw + p // 2 < K and 2 * sv + sw + p >= K:
                        out.append((tuple(v), tuple(w), p))
    return out


def index_word(v, w, p):
    word = ("A",)
    for vi, wi in zip(v, w):
        word += ("A",) * (2 * vi) + ("dA",) * wi
    return word + ("A",) * p


# chain evaluator ---------------------------------------------------------------

def _d_chain(a):
    """Chain of da = 1 x a - a x 1, shape (N, N, N)."""
    N = a.shape[0]
    eye = np.eye(N)
    return np.einsum("ij,jk->ijk", eye, a) - np.einsum("ij,jk->ijk", a, eye)


def _contract(E, F):
    return np.tensordot(E, F, axes=([-1], [0]))


class WordEvaluator:
    """Integrates word polynomials in A, dA along phi and psi for fixed D, f, A."""

    def __init__(self, D, f: TestFunction, A: UniversalForm):
        self.sd = SpectralData(D, f)
        self.N = self.sd.N
        self.lam = self.sd.es.values
        self.A = A
        self.letters = {"A": self.form_chain(A, 1), "dA": self.form_chain(d(A), 2)}
        self._chains = {(): None}
        self._kappa = {}

    def form_chain(self, w: UniversalForm, n: int) -> np.ndarray:
        """Chain array of a homogeneous degree-n form."""
        N = self.N
        out = np.zeros((N,) * (n + 2), dtype=complex)
        for (h, t), c in w.terms.items():
            if len(t) != n:
                raise ContractError("form is not homogeneous of the requested degree")
            E = self.sd.rot(h)
            for a in t:
                E = _contract(E, _d_chain(self.sd.rot(a)))
            out += c * E
        return out

    def chain(self, word) -> np.ndarray:
        if word not in self._chains:
            prev = self.chain(word[:-1])
            L = self.letters[word[-1]]
            self._chains[word] = L if prev is None else _contract(prev, L)
        return self._chains[word]

    def kappa(self, n: int) -> np.ndarray:
        if n not in self._kappa:
            lam = self.lam
            if n == 1:
                K = self.sd.fp.deriv(0, lam)[:, None] * (lam[None, :] - lam[:, None])
            else:
                # axes j0, j2, ..., jn, then j1 inserted at position 1
                K = np.expand_dims(divdiff_table(self.sd.fp, [lam] * n), 1)
                g = lam[:, None] - lam[None, :]
                K = K * _embed(g, (1, 2), n + 1)
                for k in range(2, n + 1):
                    K = K * _embed(g, (k, k + 1 if k < n else 0), n + 1)
            self._kappa[n] = K
        return self._kappa[n]

    def integrate_chain(self, E: np.ndarray, n: int) -> complex:
        if n == 0:
            return 0.0
        closed = np.einsum(E, list(range(n + 1)) + [0], list(range(n + 1)))
        return complex(np.sum(self.kappa(n) * closed))

    def phi_word(self, word) -> complex:
        return self.integrate_chain(self.chain(word), word_degree(word))

    def phi(self, p: WordPoly) -> complex:
        return complex(sum(complex(c) * self.phi_word(w) for w, c in p.items()))

    def psi(self, p: WordPoly) -> complex:
        """int_psi w = int_phi w - (1/2) int_phi dw (odd-degree words)."""
        return self.phi(p) - 0.5 * self.phi(d_words(p))

    def phi_form(self, w: UniversalForm) -> complex:
        total = 0.0
        for n in w.degrees():
            total += self.integrate_chain(self.form_chain(w.homogeneous(n), n), n)
        return complex(total)


def _embed(g, axes, ndim):
    """Broadcast a 2-d array onto the given two axes of an ndim array."""
    shape = [1] * ndim
    a0, a1 = axes
    if a0 < a1:
        shape[a0], shape[a1] = g.shape
        return g.reshape(shape)
    shape[a1], shape[a0] = g.shape
    return g.T.reshape(shape)


# reports -------------------------------------------------------------------------

@dataclass
class ExpansionReport:
    K: int
    lhs: complex
    cs_terms: list
    ym_terms: list
    partial_sums: list
    remainder_direct: complex
    remainder_formula: complex
    index_set_size: int
    intermediate_residuals: list = field(default_factory=list)
    scale: float = 1.0

    @property
    def agree(self) -> bool:
        return abs(self.remainder_direct - self.remainder_formula) <= 1e-7 * self.scale


def spectral_variation(D, V, f: TestFunction) -> complex:
    return linalg.trace_f(D + V, f) - linalg.trace_f(D, f)


def expand(D, f: TestFunction, A: UniversalForm, K: int, check_hermitian: bool = True) -> ExpansionReport:
    """Truncated expansion up to order K with both remainder representations."""
    if f.max_order < 2 * K + 1:
        raise ContractError(f"function order {f.max_order} too small for K={K}")
    D = linalg.hermitian(D)
    V = pi_D(A, D)
    if check_hermitian and np.abs(V - V.conj().T).max() > 1e-10:
        raise ContractError("pi_D(A) is not Hermitian")
    V = 0.5 * (V + V.conj().T)
    ev = WordEvaluator(D, f, A)
    lhs = spectral_variation(D, V, f)
    Fw = curvature_words()
    cs, ym, partial, inter = [], [], [], []
    acc = 0.0
    for k in range(1, K + 1):
        csw = cs_words(k)
        c_k = ev.psi(csw)
        y_k = ev.phi(Fw ** k) / (2 * k)
        cs.append(c_k)
        ym.append(y_k)
        acc += c_k + y_k
        partial.append(acc)
        inter.append(abs(ev.phi(csw + extra_words(k)) - (c_k + y_k)))
    TK = index_set(K)
    ctx = MoiContext([D + V] + [D] * (K + 1), f)
    rem = complex(np.trace(moi_operator(ctx, [V] * (K + 1))))
    for v, w, p in TK:
        rem -= ev.phi_word(index_word(v, w, p)) / (2 * sum(v) + sum(w) + p + 1)
    scale = max([1.0, abs(lhs)] + [abs(x) for x in cs + ym])
    return ExpansionReport(K, lhs, cs, ym, partial, lhs - acc, rem, len(TK), inter, scale)


def expand_forms(D, f: TestFunction, A: UniversalForm, K: int):
    """Terms of the expansion through the syntactic form route (small K only)."""
    phi_f = CochainFamily("phi", D, f)
    out = []
    F = curvature(A)
    for k in range(1, K + 1):
        c = chern_simons(A, k)
        c_psi = integrate(phi_f, c) - 0.5 * integrate(phi_f, d(c))
        out.append((c_psi, integrate(phi_f, F ** k) / (2 * k)))
    return out


@dataclass
class GaugeReport:
    total_trace_difference: float
    ym_differences: list
    cs_partial_difference: complex


def gauge_invariance_report(D, f: TestFunction, A: UniversalForm, U, K: int) -> GaugeReport:
    D = linalg.hermitian(D)
    AU = gauge_transform(A, U)
    V, VU = pi_D(A, D), pi_D(AU, D)
    V, VU = 0.5 * (V + V.conj().T), 0.5 * (VU + VU.conj().T)
    total = abs(linalg.trace_f(D + VU, f) - linalg.trace_f(D + V, f))
    e1, e2 = WordEvaluator(D, f, A), WordEvaluator(D, f, AU)
    Fw = curvature_words()
    ym = [abs(e2.phi(Fw ** k) - e1.phi(Fw ** k)) for k in range(1, K + 1)]
    csd = sum(e2.psi(cs_words(k)) - e1.psi(cs_words(k)) for k in range(1, K + 1))
    return GaugeReport(total, ym, csd)


def k1_pairing_truncation(D, f: TestFunction, U, K_max: int, cross_check: bool = False):
    """Partial sums S_K of sum_k k!^2/(2k+1)! psi_{2k+1}(U*, U, ..., U*, U)."""
    D = linalg.hermitian(D)
    U = linalg.as_matrix(U)
    Us = U.conj().T
    sd = SpectralData(D, f)
    terms = []
    for k in range(K_max + 1):
        args = [Us, U] * (k + 1)
        w = factorial(k) ** 2 / factorial(2 * k + 1)
        terms.append(w * psi(k + 1, D, f, sd)(*args))
    if cross_check:
        ev = WordEvaluator(D, f, UniversalForm.monomial(Us, (U,)))
        alt = [ev.psi(cs_words(k + 1)) for k in range(K_max + 1)]
        return list(np.cumsum(terms)), terms, alt
    return list(np.cumsum(terms)), terms


def small_unitary(rng, D, bound: float = 0.25):
    """U = exp(i s H) for random Hermitian H with s chosen so that
    ||U* [D, U]|| <= s ||[D, H]|| = bound."""
    D = linalg.hermitian(D)
    H = linalg.random_hermitian(rng, D.shape[0])
    s = bound / max(linalg.op_norm(linalg.commutator(D, H)), 1e-300)
    return linalg.expm_i(H, -s)
