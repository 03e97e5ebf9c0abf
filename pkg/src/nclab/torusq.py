"""Weyl quantization on tori with atomic (trigonometric) momentum symbols.

A classical generator is e_b (x) h with e_b(q) = exp(2 pi i b.q) and
h(p) = sum_j c_j exp(i xi_j . p).  Its quantization at hbar acts on the
Fourier basis by

    Q(e_b (x) h) psi_a = h(2 pi hbar (a + b/2)) psi_{a+b},

so every operator here is a finite sum of shift-diagonal terms and products,
adjoints, embeddings and free evolution stay in closed form.  Dense or sparse
realizations are only built on the window |a_i| <= cutoff.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.sparse import linalg as spla

from nclab.linalg import ContractError

TWO_PI = 2.0 * np.pi
BALL = 1.0 / TWO_PI


# classical side -----------------------------------------------------------------

@dataclass
class ClassicalGenerator:
    """e_b (x) sum_j c_j exp(i xi_j . p)."""
    b: np.ndarray                   # int, shape (D,)
    coeffs: np.ndarray              # complex, shape (k,)
    freqs: np.ndarray               # real, shape (k, D)
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.atleast_1d(np.asarray(self.b, dtype=np.int64))
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        self.freqs = np.asarray(self.freqs, dtype=float).reshape(len(self.coeffs), -1)
        if self.freqs.shape[1] != self.b.size:
            raise ContractError("frequency and shift dimensions differ")

    @property
    def dim(self) -> int:
        return self.b.size

    def h(self, p):
        """Momentum symbol at points p of shape (..., D)."""
        p = np.asarray(p, dtype=float)
        return np.exp(1j * p @ self.freqs.T) @ self.coeffs

    def dh(self, direction, p):
        """Directional derivative of h along ``direction``."""
        w = 1j * (self.freqs @ np.asarray(direction, dtype=float)) * self.coeffs
        return np.exp(1j * np.asarray(p, dtype=float) @ self.freqs.T) @ w

    def __call__(self, q, p):
        q = np.asarray(q, dtype=float)
        return np.exp(TWO_PI * 1j * q @ self.b) * self.h(p)

    def conj(self) -> "ClassicalGenerator":
        return ClassicalGenerator(-self.b, self.coeffs.conj(), -self.freqs, dict(self.tags))

    def in_ball(self, n: int = 1) -> bool:
        """All frequencies have per-edge component norm < 1/(2 pi); n is the
        number of torus components per edge."""
        per_edge = self.freqs.reshape(len(self.coeffs), -1, n)
        return bool(np.all(np.linalg.norm(per_edge, axis=-1) < BALL))

    def simplify(self, tol: float = 0.0) -> "ClassicalGenerator":
        """Merge atoms with equal frequency and drop zero coefficients."""
        keys, inv = np.unique(np.round(self.freqs, 14), axis=0, return_inverse=True)
        c = np.zeros(len(keys), dtype=complex)
        np.add.at(c, inv.ravel(), self.coeffs)
        keep = np.abs(c) > tol
        if not keep.any():
            keep[0] = True
        return ClassicalGenerator(self.b, c[keep], keys[keep], dict(self.tags))


def generator(b, atoms) -> ClassicalGenerator:
    """Build e_b (x) h from atoms [(c, xi), ...]."""
    b = np.atleast_1d(b)
    cs = [complex(c) for c, _ in atoms]
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for _, x in atoms]
    return ClassicalGenerator(b, cs, np.array(xs).reshape(len(cs), b.size))


def _as_list(f):
    return [f] if isinstance(f, ClassicalGenerator) else list(f)


def classical_product(f, g):
    """Pointwise product of sums of generators."""
    out = []
    for x in _as_list(f):
        for y in _as_list(g):
            c = np.outer(x.coeffs, y.coeffs).ravel()
            xi = (x.freqs[:, None, :] + y.freqs[None, :, :]).reshape(-1, x.dim)
            out.append(ClassicalGenerator(x.b + y.b, c, xi).simplify())
    return out


def poisson(f, g, sign: int = 1):
    """{e_b1 h1, e_b2 h2} = sign * 2 pi i (d_b2 h1 h2 - h1 d_b1 h2) e_{b1+b2}.

    For atoms this is -sign * 2 pi (xi1.b2 - xi2.b1) c1 c2 at xi1 + xi2.
    """
    out = []
    for x in _as_list(f):
        for y in _as_list(g):
            delta = (x.freqs @ y.b)[:, None] - (y.freqs @ x.b)[None, :]
            c = (-sign * TWO_PI * delta * np.outer(x.coeffs, y.coeffs)).ravel()
            xi = (x.freqs[:, None, :] + y.freqs[None, :, :]).reshape(-1, x.dim)
            out.append(ClassicalGenerator(x.b + y.b, c, xi).simplify())
    return out


def sup_norm(f, n_samples: int = 20000, rng=None, extra_points=None) -> float:
    """Sampled sup over T^D x R^D of |sum of generators| (a lower estimate)."""
    fs = _as_list(f)
    rng = np.random.default_rng(0) if rng is None else rng
    D = fs[0].dim
    scale = max(1.0, max(1.0 / max(np.abs(g.freqs).max(), 1e-9) for g in fs))
    P = rng.uniform(-4 * np.pi * scale, 4 * np.pi * scale, size=(n_samples, D))
    P = np.vstack([P, np.zeros((1, D))] + ([np.atleast_2d(extra_points)] if extra_points is not None else []))
    Q = rng.uniform(0, 1, size=(P.shape[0], D))
    vals = sum(g(Q, P) for g in fs)
    return float(np.abs(vals).max())


# quantum side -------------------------------------------------------------------

def _window(D: int, A: int) -> np.ndarray:
    """All integer points with |a_i| <= A, shape (M, D)."""
    axes = [np.arange(-A, A + 1)] * D
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, D)


@dataclass
class TorusOperator:
    """Finite sum of shift-diagonal terms at fixed hbar and window cutoff."""
    terms: list
    hbar: float
    cutoff: int
    tags: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    def symbol(self, term: ClassicalGenerator, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return term.h(TWO_PI * self.hbar * (a + 0.5 * term.b))

    def apply_basis(self, a):
        """Q psi_a as a list of (coefficient, target index)."""
        a = np.asarray(a, dtype=np.int64)
        return [(complex(self.symbol(t, a)), tuple(a + t.b)) for t in self.terms]

    def max_shift(self) -> int:
        return int(max(np.abs(t.b).max() for t in self.terms))

    def shifts(self):
        return {tuple(t.b) for t in self.terms}

    def __add__(self, other):
        _same(self, other)
        return TorusOperator(self.terms + other.terms, self.hbar, self.cutoff)

    def scale(self, s):
        return TorusOperator([ClassicalGenerator(t.b, s * t.coeffs, t.freqs) for t in self.terms],
                             self.hbar, self.cutoff)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def __matmul__(self, other):
        return op_product(self, other)

    def adjoint(self):
        """Adjoint in closed form: each term becomes the quantization of its conjugate."""
        return TorusOperator([t.conj() for t in self.terms], self.hbar, self.cutoff)

    def sparse(self, cutoff: int = None, columns=None):
        """Window realization; ``columns`` restricts to basis vectors with
        |a|_inf <= columns."""
        A = self.cutoff if cutoff is None else cutoff
        pts = _window(self.dim, A)
        shape = (2 * A + 1,) * self.dim
        M = pts.shape[0]
        col_mask = np.ones(M, bool) if columns is None else (np.abs(pts).max(1) <= columns)
        rows, cols, vals = [], [], []
        src = np.arange(M)
        for t in self.terms:
            tgt = pts + t.b
            ok = col_mask & (np.abs(tgt).max(1) <= A)
            rows.append(np.ravel_multi_index(tuple((tgt[ok] + A).T), shape))
            cols.append(src[ok])
            vals.append(self.symbol(t, pts[ok]))
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(M, M))

    def dense(self, cutoff: int = None) -> np.ndarray:
        return self.sparse(cutoff).toarray()


def _same(x: TorusOperator, y: TorusOperator):
    if x.hbar != y.hbar or x.cutoff != y.cutoff:
        raise ContractError("operators differ in hbar or cutoff")


def quantize(f, hbar: float, cutoff: int = 24) -> TorusOperator:
    """One shift-diagonal term per generator."""
    if not -1.0 <= hbar <= 1.0:
        raise ContractError("hbar must lie in [-1, 1]")
    if cutoff < 1:
        raise ContractError("cutoff must be >= 1")
    return TorusOperator([ClassicalGenerator(g.b, g.coeffs, g.freqs) for g in _as_list(f)],
                         float(hbar), int(cutoff))


def identity(D: int, hbar: float, cutoff: int = 24) -> TorusOperator:
    return quantize(generator(np.zeros(D, int), [(1.0, np.zeros(D))]), hbar, cutoff)


def op_product(x: TorusOperator, y: TorusOperator) -> TorusOperator:
    """(b1,d1)(b2,d2) = (b1+b2, a -> d2(a) d1(a+b2)); atoms pick up the phase
    exp(i pi hbar (xi1.b2 - xi2.b1))."""
    _same(x, y)
    hb = x.hbar
    terms = []
    for s in x.terms:
        for t in y.terms:
            delta = (s.freqs @ t.b)[:, None] - (t.freqs @ s.b)[None, :]
            c = (np.exp(1j * np.pi * hb * delta) * np.outer(s.coeffs, t.coeffs)).ravel()
            xi = (s.freqs[:, None, :] + t.freqs[None, :, :]).reshape(-1, s.dim)
            terms.append(ClassicalGenerator(s.b + t.b, c, xi).simplify())
    return TorusOperator(terms, hb, x.cutoff)


def merge_terms(O: TorusOperator) -> TorusOperator:
    """Collect terms with equal shift."""
    by = {}
    for t in O.terms:
        k = tuple(t.b)
        if k in by:
            u = by[k]
            by[k] = ClassicalGenerator(t.b, np.concatenate([u.coeffs, t.coeffs]),
                                       np.vstack([u.freqs, t.freqs]))
        else:
            by[k] = t
    return TorusOperator([t.simplify() for t in by.values()], O.hbar, O.cutoff)


@dataclass
class NormBracket:
    inner: float   # columns restricted to |a| <= cutoff - margin
    outer: float   # full window compression

    @property
    def value(self) -> float:
        return max(self.inner, self.outer)


def _largest_sv(M) -> float:
    if M.shape[0] == 0 or M.nnz == 0:
        return 0.0
    if M.shape[0] <= 1500:
        return float(np.linalg.norm(M.toarray(), 2))
    return float(spla.svds(M, k=1, return_singular_vectors=False, tol=1e-10)[0])


def op_norm(O: TorusOperator, margin: int = None) -> NormBracket:
    """Largest singular value on the window.  Single-shift operators use the
    exact diagonal formula sup |symbol|; others a sparse SVD."""
    margin = O.max_shift() + 2 if margin is None else int(margin)
    A = O.cutoff
    if margin >= A:
        raise ContractError("margin must be smaller than the cutoff")
    O = merge_terms(O)
    if len(O.terms) == 1:
        t = O.terms[0]
        pts = _window(O.dim, A)
        vals = np.abs(O.symbol(t, pts))
        ok = np.abs(pts + t.b).max(1) <= A
        inner = np.abs(pts).max(1) <= A - margin
        return NormBracket(float(vals[inner].max(initial=0.0)), float(vals[ok].max(initial=0.0)))
    M = O.sparse()
    return NormBracket(_largest_sv(O.sparse(columns=A - margin)), _largest_sv(M))


# lattices and embeddings -------------------------------------------------------

@dataclass
class Lattice:
    """Edges with positive (rational) lengths; n torus components per edge."""
    lengths: list
    n: int = 1

    def __post_init__(self):
        self.lengths = [Fraction(x) for x in self.lengths]
        if any(x <= 0 for x in self.lengths):
            raise ContractError("edge lengths must be positive")

    @property
    def n_edges(self) -> int:
        return len(self.lengths)

    @property
    def dim(self) -> int:
        return self.n * self.n_edges


@dataclass
class Refinement:
    """Sequence of steps ('sub', edge, t) or ('add', length) from ``base``.

    Subdividing edge e with fraction t replaces it by two edges of lengths
    t d and (1-t) d at positions e, e+1.  Ancestry of every edge is tracked so
    the composite maps can also be read off directly.
    """
    base: Lattice
    steps: list = field(default_factory=list)

    def __post_init__(self):
        for s in self.steps:
            if s[0] == "sub" and not 0 < Fraction(s[2]) < 1:
                raise ContractError("split fractions must lie in (0, 1)")
            if s[0] not in ("sub", "add"):
                raise ContractError(f"unknown refinement step {s[0]!r}")

    def then(self, other: "Refinement") -> "Refinement":
        if other.base.lengths != self.target.lengths:
            raise ContractError("refinements do not compose")
        return Refinement(self.base, self.steps + other.steps)

    def _walk(self):
        lengths = list(self.base.lengths)
        anc = list(range(len(lengths)))        # ancestor edge in base or None
        S = [[Fraction(int(i == j)) for j in range(len(lengths))] for i in range(len(lengths))]
        T = [[int(i == j) for j in range(len(lengths))] for i in range(len(lengths))]
        for s in self.steps:
            if s[0] == "sub":
                e, t = int(s[1]), Fraction(s[2])
                d = lengths[e]
                lengths[e:e + 1] = [t * d, (1 - t) * d]
                anc[e:e + 1] = [anc[e], anc[e]]
                S[e:e + 1] = [[t * x for x in S[e]], [(1 - t) * x for x in S[e]]]
                T[e:e + 1] = [list(T[e]), list(T[e])]
            else:
                lengths.append(Fraction(s[1]))
                anc.append(None)
                S.append([Fraction(0)] * len(self.base.lengths))
                T.append([0] * len(self.base.lengths))
        return lengths, anc, S, T

    @property
    def target(self) -> Lattice:
        return Lattice(self._walk()[0], self.base.n)

    def S_edges(self):
        """Edge-level S matrix (rational), composed step by step."""
        return self._walk()[2]

    def T_edges(self):
        return self._walk()[3]

    def S_direct(self):
        """S read off from ancestry: S[e', e] = d_e' / d_e when e' lies in e."""
        lengths, anc, _, _ = self._walk()
        base = self.base.lengths
        return [[lengths[i] / base[j] if anc[i] == j else Fraction(0) for j in range(len(base))]
                for i in range(len(lengths))]

    def T_direct(self):
        lengths, anc, _, _ = self._walk()
        return [[int(anc[i] == j) for j in range(len(self.base.lengths))] for i in range(len(lengths))]

    def S(self) -> np.ndarray:
        return np.kron(np.array(self.S_edges(), dtype=float), np.eye(self.base.n))

    def T(self) -> np.ndarray:
        return np.kron(np.array(self.T_edges(), dtype=np.int64), np.eye(self.base.n, dtype=np.int64))


def uniform_refinement(l: Lattice, R: int) -> Refinement:
    """l^R: every edge split into R equal pieces."""
    steps, e = [], 0
    for _ in range(l.n_edges):
        for k in range(R - 1):
            steps.append(("sub", e, Fraction(1, R - k)))
            e += 1
        e += 1
    return Refinement(l, steps)


def embed_classical(g, ref: Refinement):
    """b -> T b, xi_j -> S xi_j, coefficients unchanged."""
    S, T = ref.S(), ref.T()
    out = [ClassicalGenerator(T @ x.b, x.coeffs, x.freqs @ S.T, dict(x.tags)) for x in _as_list(g)]
    return out[0] if isinstance(g, ClassicalGenerator) else out


def embed_quantum(O: TorusOperator, ref: Refinement) -> TorusOperator:
    """F_Q = Q o F_C o Q^{-1}, applied term by term."""
    return TorusOperator(embed_classical(O.terms, ref), O.hbar, O.cutoff)


def u_map(ref: Refinement):
    """u psi_a = psi_{T a}, as a function on integer index arrays."""
    T = ref.T()
    return lambda a: np.asarray(a, dtype=np.int64) @ T.T


def intertwining_residual(O: TorusOperator, ref: Refinement, window: int = None) -> float:
    """max over basis psi_a (|a| <= window) of |F_Q(O) u psi_a - u O psi_a|."""
    window = O.cutoff if window is None else window
    F = embed_quantum(O, ref)
    u = u_map(ref)
    pts = _window(O.dim, window)
    worst = 0.0
    for s, t in zip(O.terms, F.terms):
        lhs = F.symbol(t, u(pts))            # coefficient of psi_{T a + T b}
        rhs = O.symbol(s, pts)               # coefficient of u psi_{a+b} = psi_{T(a+b)}
        if not np.array_equal(u(pts) + t.b, u(pts + s.b)):
            return np.inf
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def formula_residual(g: ClassicalGenerator, hbar: float, cutoff: int = 8) -> float:
    """Sparse realization against h(2 pi hbar (a + b/2)) psi_{a+b} on basis vectors."""
    O = quantize(g, hbar, cutoff)
    M = O.sparse()
    pts = _window(g.dim, cutoff)
    shape = (2 * cutoff + 1,) * g.dim
    worst = 0.0
    for i, a in enumerate(pts):
        col = M[:, i].toarray().ravel()
        expect = np.zeros_like(col)
        tgt = a + g.b
        if np.abs(tgt).max() <= cutoff:
            expect[np.ravel_multi_index(tuple(tgt + cutoff), shape)] = g.h(TWO_PI * hbar * (a + 0.5 * g.b))
        worst = max(worst, float(np.abs(col - expect).max()))
    return worst


# injectivity and Rieffel -------------------------------------------------------

@dataclass
class InjectivityReport:
    hbar: float
    smallest_sv: float
    gram: np.ndarray
    in_ball: bool


def injectivity_witness(gens, hbar: float, cutoff: int = 16, n: int = 1) -> InjectivityReport:
    """Gram matrix of the quantized generators in the normalized
    Hilbert-Schmidt inner product on the window."""
    if hbar == 0:
        raise ContractError("hbar must be nonzero")
    gens = _as_list(gens)
    mats = [quantize(g, hbar, cutoff).sparse() for g in gens]
    M = mats[0].shape[0]
    G = np.array([[(x.conj().multiply(y)).sum() / M for y in mats] for x in mats])
    sv = np.linalg.svd(G, compute_uv=False)
    return InjectivityReport(hbar, float(sv.min()), G, all(g.in_ball(n) for g in gens))


def sine_generator(hbar0: float, D: int = 1) -> ClassicalGenerator:
    """e_0 (x) sin(p_1 / hbar0)."""
    xi = np.zeros(D)
    xi[0] = 1.0 / hbar0
    return generator(np.zeros(D, int), [(-0.5j, xi), (0.5j, -xi)])


@dataclass
class RieffelFailure:
    hbar0: float
    hbarN: float
    N: int
    norm_at_hbar0: float
    norm_at_hbarN: float


def rieffel_failure(hbar0: float = 0.5, N: int = 4, cutoff: int = None) -> RieffelFailure:
    """Single-lattice norm jump for e_0 (x) sin(p_1/hbar0)."""
    cutoff = max(4 * N, 8) if cutoff is None else cutoff
    f = sine_generator(hbar0)
    hN = hbar0 * (1.0 + 1.0 / (4 * N))
    n0 = op_norm(quantize(f, hbar0, cutoff), margin=0).outer
    nN = op_norm(quantize(f, hN, cutoff), margin=0).outer
    return RieffelFailure(hbar0, hN, N, n0, nN)


def tower_norms(f, l: Lattice, hbar: float, depth: int, cutoff: int = 8):
    """[||Q^{l^R}(f o gamma)|| for R = 1..depth] (single-shift f only, exact
    diagonal formula on the window)."""
    out = []
    for R in range(1, depth + 1):
        g = embed_classical(f, uniform_refinement(l, R))
        O = quantize(g, hbar, cutoff)
        out.append(op_norm(O, margin=0).outer)
    return out


# SDQ residuals ------------------------------------------------------------------

def _slope(hs, ys):
    hs, ys = np.asarray(hs, float), np.asarray(ys, float)
    ok = ys > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[ok]), np.log(ys[ok]), 1)[0])


@dataclass
class SDQReport:
    hbars: list
    von_neumann: list
    dirac: list
    dirac_flipped: list
    rieffel0: list
    vn_bound: list
    sup_f: float
    slopes: dict
    poisson_sign: int


def von_neumann_bound(f: ClassicalGenerator, g: ClassicalGenerator, hbar: float, **kw) -> float:
    """||h1|| pi |hbar| ||d_b1 h2|| + pi |hbar| ||d_b2 h1|| ||h2|| with sampled sups."""
    rng = np.random.default_rng(kw.get("seed", 0))
    n = kw.get("n_samples", 20000)
    D = f.dim
    P = rng.uniform(-200.0, 200.0, size=(n, D))
    sup = lambda vals: float(np.abs(vals).max())
    return (sup(f.h(P)) * np.pi * abs(hbar) * sup(g.dh(f.b, P))
            + np.pi * abs(hbar) * sup(f.dh(g.b, P)) * sup(g.h(P)))


def sdq_residuals(f, g, hbars, cutoff: int = 64, sign: int = 1,
                  p_range: float = None) -> SDQReport:
    """von Neumann, Dirac (both Poisson signs) and Rieffel-at-0 residuals.

    With ``p_range`` the window grows as hbar shrinks so that the sampled
    momenta 2 pi hbar a cover [-p_range, p_range]; intended for
    single-shift generators, whose norms use the diagonal formula.
    """
    fl, gl = _as_list(f), _as_list(g)
    vn, dirac, flipped, r0, bound = [], [], [], [], []
    sup_f = sup_norm(fl)
    base = cutoff
    for hb in hbars:
        if p_range is not None:
            cutoff = max(base, int(np.ceil(p_range / (TWO_PI * abs(hb)))))
        Qf, Qg = quantize(fl, hb, cutoff), quantize(gl, hb, cutoff)
        vn.append(op_norm(Qf @ Qg - quantize(classical_product(fl, gl), hb, cutoff)).value)
        comm = (Qf @ Qg - Qg @ Qf).scale(1j / hb)    # (-i hbar)^{-1} [Qf, Qg]
        dirac.append(op_norm(comm - quantize(poisson(fl, gl, sign), hb, cutoff)).value)
        flipped.append(op_norm(comm - quantize(poisson(fl, gl, -sign), hb, cutoff)).value)
        r0.append(abs(op_norm(Qf).value - sup_f))
        if len(fl) == 1 and len(gl) == 1:
            bound.append(von_neumann_bound(fl[0], gl[0], hb))
    slopes = {"von_neumann": _slope(hbars, vn), "dirac": _slope(hbars, dirac),
              "dirac_flipped": _slope(hbars, flipped)}
    return SDQReport(list(hbars), vn, dirac, flipped, r0, bound, sup_f, slopes, sign)


# free evolution and Dyson series ---------------------------------------------

def free_quantum_evolution(x, t: float):
    """tau^0_t in closed form: xi -> xi + 2 pi t b on every atom.  Results
    leaving the ball are tagged."""
    if isinstance(x, TorusOperator):
        return TorusOperator(free_quantum_evolution(x.terms, t), x.hbar, x.cutoff)
    out = []
    for g in _as_list(x):
        y = ClassicalGenerator(g.b, g.coeffs, g.freqs + TWO_PI * t * g.b[None, :], dict(g.tags))
        if not y.in_ball():
            y.tags["outside_ball"] = True
        out.append(y)
    return out[0] if isinstance(x, ClassicalGenerator) else out


def _h0_diag(D: int, A: int, hbar: float) -> np.ndarray:
    pts = _window(D, A)
    return 2.0 * np.pi ** 2 * hbar ** 2 * (pts ** 2).sum(1)


def free_evolution_residual(O: TorusOperator, t: float) -> float:
    """Closed form against exp(i t H0/hbar) O exp(-i t H0/hbar) on the window;
    rows whose preimages leave the window are excluded."""
    hb = O.hbar
    phase = np.exp(1j * t * _h0_diag(O.dim, O.cutoff, hb) / hb)
    dense = phase[:, None] * O.dense() * phase.conj()[None, :]
    closed = free_quantum_evolution(O, t).dense()
    pts = _window(O.dim, O.cutoff)
    rows = np.abs(pts).max(1) <= O.cutoff - O.max_shift()
    return float(np.abs(dense - closed)[rows].max())


def _potential_coeffs(V) -> dict:
    coeffs = getattr(V, "coeffs", V)
    return {tuple(np.atleast_1d(b)): complex(c) for b, c in coeffs.items()}


def multiplication_operator(V, hbar: float, cutoff: int) -> TorusOperator:
    """M_V psi_a = sum_b a_b psi_{a+b} for V = sum_b a_b e_b."""
    co = _potential_coeffs(V)
    D = len(next(iter(co)))
    return TorusOperator([generator(np.array(b), [(c, np.zeros(D))]) for b, c in co.items()],
                         hbar, cutoff)


def _tau0_dense(co, t, hbar, pts, A, D):
    """tau^0_t(M_V) on the window: psi_a -> sum_b a_b
    exp(2 pi^2 i t hbar |b|^2) exp(4 pi^2 i t hbar b.a) psi_{a+b}."""
    M = pts.shape[0]
    shape = (2 * A + 1,) * D
    out = np.zeros((M, M), dtype=complex)
    for b, c in co.items():
        b = np.array(b)
        tgt = pts + b
        ok = np.abs(tgt).max(1) <= A
        ph = np.exp(2j * np.pi ** 2 * t * hbar * (b @ b) + 4j * np.pi ** 2 * t * hbar * (pts[ok] @ b))
        out[np.ravel_multi_index(tuple((tgt[ok] + A).T), shape), np.nonzero(ok)[0]] += c * ph
    return out


@dataclass
class DysonReport:
    residual: float
    tail_bound: float
    terms: list
    method: str
    sup_V: float


def _dyson_quadrature(co, t, hbar, m, nodes, pts, A, D):
    """Iterated simplex integrals I_k(s) = int_0^s tau(s1) I_{k-1}(s1) ds1 by
    nested Gauss-Legendre rules."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    M = pts.shape[0]
    cache = {}

    def tau(s):
        if s not in cache:
            cache[s] = _tau0_dense(co, s, hbar, pts, A, D)
        return cache[s]

    def I(k, s):
        if k == 0:
            return np.eye(M, dtype=complex)
        out = np.zeros((M, M), dtype=complex)
        for xi, wi in zip(x, w):
            s1 = 0.5 * s * (xi + 1.0)
            out += 0.5 * s * wi * tau(s1) @ I(k - 1, s1)
        return out

    return [I(k, t) for k in range(m + 1)]


def _dyson_vanloan(H0, MV, t, hbar, m):
    """k-th Dyson term as e^{itH0/hbar} times the (0,k) block of the exponential
    of a block-bidiagonal matrix (the lambda^k coefficient of e^{-it(H0+lambda V)/hbar})."""
    n = H0.shape[0]
    X = -1j * t * np.diag(H0) / hbar
    Y = -1j * t * MV / hbar
    B = np.zeros(((m + 1) * n, (m + 1) * n), dtype=complex)
    for k in range(m + 1):
        B[k * n:(k + 1) * n, k * n:(k + 1) * n] = X
        if k < m:
            B[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = Y
    E = sla.expm(B)
    left = np.exp(1j * t * H0 / hbar)
    # (iħ)^{-k} simplex integral equals the lambda^k coefficient
    return [left[:, None] * E[:n, k * n:(k + 1) * n] for k in range(m + 1)]


def dyson_vs_exact(V, t: float, hbar: float = 1.0, m: int = 3, cutoff: int = 16,
                   method: str = "vanloan", nodes: int = 16) -> DysonReport:
    """Partial Dyson sum against e^{itH0/hbar} e^{-itH/hbar} on the window.

    ``vanloan`` evaluates the simplex integrals exactly; ``quadrature`` uses
    nested Gauss-Legendre rules with ``nodes`` points, which needs many nodes
    once 2 pi^2 hbar t cutoff is large (the integrand oscillates)."""
    if m > 4:
        raise ContractError("order m <= 4")
    co = _potential_coeffs(V)
    D = len(next(iter(co)))
    pts = _window(D, cutoff)
    H0 = _h0_diag(D, cutoff, hbar)
    MV = multiplication_operator(co, hbar, cutoff).dense()
    exact = np.exp(1j * t * H0 / hbar)[:, None] * sla.expm(-1j * t * (np.diag(H0) + MV) / hbar)
    if method == "quadrature":
        ints = _dyson_quadrature(co, t, hbar, m, nodes, pts, cutoff, D)
        terms = [(1j * hbar) ** (-k) * I for k, I in enumerate(ints)]
    elif method == "vanloan":
        terms = _dyson_vanloan(H0, MV, t, hbar, m)
    else:
        raise ContractError(f"unknown Dyson method {method!r}")
    partial = sum(terms)
    res = float(np.linalg.norm(exact - partial, 2))
    # sup |V| on a dense grid of the torus (exact for one-dimensional cosines)
    sup_V = _sup_potential(co, D)
    x = abs(t) * sup_V / abs(hbar)
    tail = float(np.exp(x) - sum(x ** k / factorial(k) for k in range(m + 1)))
    return DysonReport(res, tail, [float(np.linalg.norm(T, 2)) for T in terms], method, sup_V)


def _sup_potential(co, D, n: int = 256) -> float:
    g = np.linspace(0, 1, n, endpoint=False) if D <= 2 else np.linspace(0, 1, 48, endpoint=False)
    Q = np.stack(np.meshgrid(*([g] * D), indexing="ij"), axis=-1).reshape(-1, D)
    vals = sum(c * np.exp(TWO_PI * 1j * Q @ np.array(b)) for b, c in co.items())
    return float(np.abs(vals).max())
