"""One-loop Gaussian matrix model: propagator, diagram amplitudes by brute-force
Wick contraction, Ward identities and the one-loop quantum bracket.

Conventions.  A vertex of degree d is a cyclic list of legs; leg j carries the
index pair (c_j, c_{j+1}) where c_0..c_{d-1} are the vertex corners, and the
vertex weight is (f')^[d-1](lam_c0, ..., lam_c{d-1}).  External legs carry a
field entry W_{c_j c_{j+1}}; two internal legs (k,l), (m,n) joined by an edge
give -delta_kn delta_lm G_kl.
"""

import warnings
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from nclab import linalg
from nclab.config import TOL
from nclab.funcs import TestFunction
from nclab.linalg import ContractError
from nclab.moi import divdiff_table

_CHUNK = 1 << 20


# diagrams ----------------------------------------------------------------------

def ext(k: int):
    return ("ext", int(k))


def edge(e):
    return ("int", e)


@dataclass
class Diagram:
    """Vertices as cyclically ordered leg lists; legs are ('ext', marking) or
    ('int', edge id).  Markings run over 1..n."""
    vertices: list
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = [list(v) for v in self.vertices]
        if any(len(v) < 1 for v in self.vertices):
            raise ContractError("vertices need degree >= 1")
        counts, marks = {}, []
        for v in self.vertices:
            for kind, x in v:
                if kind == "int":
                    counts[x] = counts.get(x, 0) + 1
                elif kind == "ext":
                    marks.append(x)
                else:
                    raise ContractError(f"unknown leg kind {kind!r}")
        bad = [e for e, c in counts.items() if c != 2]
        if bad:
            raise ContractError(f"internal legs not paired: edges {bad}")
        if sorted(marks) != list(range(1, len(marks) + 1)):
            raise ContractError(f"external markings {sorted(marks)} are not 1..n")
        self.n_external = len(marks)
        self.n_edges = len(counts)

    @property
    def loop_order(self) -> int:
        return 1 - len(self.vertices) + self.n_edges


def tree(n: int) -> Diagram:
    """Single vertex with n external legs."""
    return Diagram([[ext(k) for k in range(1, n + 1)]], "tree")


def two_point(kind: str) -> Diagram:
    """The three one-loop two-point diagrams."""
    if kind == "chain":
        return Diagram([[ext(1), edge(0), edge(1)], [ext(2), edge(0), edge(1)]], "chain")
    if kind == "bubble":
        return Diagram([[ext(1), edge(0), edge(1)], [ext(2), edge(1), edge(0)]], "bubble")
    if kind == "tadpole":
        return Diagram([[ext(1), edge(0), edge(0), ext(2)]], "tadpole")
    raise ContractError(f"unknown two-point diagram {kind!r}")


# propagator -----------------------------------------------------------------

@dataclass
class Propagator:
    N: int
    lam: np.ndarray
    G: np.ndarray


def _spectrum(D, N):
    es = linalg.eigh(D)
    if not 1 <= N <= es.values.size:
        raise ContractError(f"cutoff N={N} outside 1..{es.values.size}")
    return es


def propagator(D, f: TestFunction, N: int = None) -> Propagator:
    """G_kl = 1 / (f')^[1](lam_k, lam_l) for k, l < N (eigenvalues ascending)."""
    D = linalg.hermitian(D)
    N = D.shape[0] if N is None else int(N)
    lam = _spectrum(D, N).values[:N]
    T = divdiff_table(f.derivative_function(1), [lam, lam])
    if np.abs(T.imag).max() > 1e-12 * max(1.0, np.abs(T).max()):
        raise ContractError("(f')^[1] is not real on the spectrum")
    T = T.real
    bad = np.argwhere(T <= 0)
    if bad.size:
        k, l = bad[0]
        raise ContractError(f"(f')^[1](lam_{k}, lam_{l}) = {T[k, l]:.3e} is not positive "
                            f"at (k, l) = ({k}, {l})")
    G = 1.0 / T
    G = 0.5 * (G + G.T)
    return Propagator(N, lam, G)


# amplitude engine -----------------------------------------------------------

class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, x):
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        self.p[self.find(a)] = self.find(b)


@dataclass
class _Plan:
    """Index classes and the factor list of a diagram."""
    n_classes: int
    vertices: list   # (degree, class tuple)
    externals: list  # (marking, row class, col class)
    edges: list      # (row class, col class)


def _plan(diagram: Diagram) -> _Plan:
    offs, total = [], 0
    for v in diagram.vertices:
        offs.append(total)
        total += len(v)
    corner = lambda vi, j: offs[vi] + j % len(diagram.vertices[vi])
    uf = _UnionFind(total)
    legs = {}
    externals = []
    for vi, v in enumerate(diagram.vertices):
        for j, (kind, x) in enumerate(v):
            rc = (corner(vi, j), corner(vi, j + 1))
            if kind == "ext":
                externals.append((x, rc))
            else:
                legs.setdefault(x, []).append(rc)
    edges = []
    for (r1, c1), (r2, c2) in legs.values():
        uf.union(r1, c2)
        uf.union(c1, r2)
        edges.append((r1, c1))
    roots = sorted({uf.find(c) for c in range(total)})
    cls = {r: i for i, r in enumerate(roots)}
    C = lambda c: cls[uf.find(c)]
    verts = [(len(v), tuple(C(offs[vi] + j) for j in range(len(v))))
             for vi, v in enumerate(diagram.vertices)]
    return _Plan(len(roots), verts,
                 [(m, C(r), C(c)) for m, (r, c) in externals],
                 [(C(r), C(c)) for r, c in edges])


def _rotate_fields(es, fields, N):
    U = es.vectors
    out = []
    for V in fields:
        W = U.conj().T @ linalg.as_matrix(V) @ U
        lost = np.abs(W).sum() - np.abs(W[:N, :N]).sum()
        if lost > 1e-12:
            warnings.warn(f"truncation to level N={N} discards field mass {lost:.2e}",
                          stacklevel=3)
        out.append(W[:N, :N])
    return out


def _evaluate(plan: _Plan, Ws, tables, G, N: int) -> complex:
    C = plan.n_classes
    terms = N ** C
    if terms > TOL.max_amplitude_terms:
        raise ContractError(f"amplitude needs {terms} terms, envelope is "
                            f"{TOL.max_amplitude_terms}")
    # split classes into an outer Python loop and an inner vectorized block
    inner = C
    while inner > 0 and N ** inner > _CHUNK:
        inner -= 1
    outer = C - inner
    grid = np.indices((N,) * inner).reshape(inner, -1) if inner else np.zeros((0, 1), int)
    total = 0.0 + 0.0j
    for head in product(range(N), repeat=outer):
        idx = [np.full(grid.shape[1], h) for h in head] + list(grid)
        term = np.ones(grid.shape[1], dtype=complex)
        for d, cs in plan.vertices:
            term *= tables[d][tuple(idx[c] for c in cs)]
        for m, r, c in plan.externals:
            term *= Ws[m - 1][idx[r], idx[c]]
        for r, c in plan.edges:
            term *= -G[idx[r], idx[c]]
        total += term.sum()
    return complex(total)


def amplitude(diagram: Diagram, fields, D, f: TestFunction, N: int = None) -> complex:
    """Amplitude at level N: sum over index assignments of vertex weights,
    external field entries and -G per edge."""
    D = linalg.hermitian(D)
    N = D.shape[0] if N is None else int(N)
    if len(fields) != diagram.n_external:
        raise ContractError(f"diagram has {diagram.n_external} external legs, "
                            f"got {len(fields)} fields")
    es = _spectrum(D, N)
    prop = propagator(D, f, N) if diagram.n_edges else None
    Ws = _rotate_fields(es, fields, N)
    return _amplitude_rotated(_plan(diagram), Ws, f, es.values[:N],
                              None if prop is None else prop.G, N)


def _amplitude_rotated(plan, Ws, f, lam, G, N):
    fp = f.derivative_function(1)
    tables = {d: divdiff_table(fp, [lam] * d) for d in {d for d, _ in plan.vertices}}
    return _evaluate(plan, Ws, tables, G, N)


# closed forms -------------------------------------------------------------------

def explicit_two_point(kind: str, V1, V2, D, f: TestFunction, N: int = None) -> complex:
    """Closed-form sums for the chain, bubble and tadpole two-point diagrams."""
    D = linalg.hermitian(D)
    N = D.shape[0] if N is None else int(N)
    es = _spectrum(D, N)
    lam = es.values[:N]
    G = propagator(D, f, N).G
    W1, W2 = _rotate_fields(es, [V1, V2], N)
    fp = f.derivative_function(1)
    T2 = divdiff_table(fp, [lam] * 3)
    if kind == "chain":
        ii = np.arange(N)
        A = T2[ii[:, None], ii[:, None], ii[None, :]]   # (f')^[2](li, li, lk)
        B = T2[ii[:, None], ii[None, :], ii[None, :]]   # (f')^[2](li, lk, lk)
        return complex(np.einsum("ik,ik,i,k,ik->", A, B, np.diag(W1), np.diag(W2), G * G))
    if kind == "bubble":
        return complex(np.einsum("ijk,ijk,ij,ji,jk,ki->", T2, T2, W1, W2, G, G))
    if kind == "tadpole":
        T3 = divdiff_table(fp, [lam] * 4)
        ii = np.arange(N)
        Tj = T3[:, ii, ii, :]                          # (f')^[3](li, lj, lj, lk)
        return complex(-np.einsum("ijk,ij,ji,jk->", Tj, W1, W2, G))
    raise ContractError(f"unknown two-point diagram {kind!r}")


# quantum bracket --------------------------------------------------------------

def ring_diagram(blocks) -> Diagram:
    """One-loop ring: loop vertex i carries the external block i followed by the
    loop legs P_i, R_i; edges join P_i with R_{i+1}."""
    v = len(blocks)
    verts = [[ext(m) for m in blk] + [edge(i), edge((i - 1) % v)] for i, blk in enumerate(blocks)]
    return Diagram(verts, f"ring{v}")


def ring_blocks(n: int, v_max: int, free: int = None):
    """Cyclic arc partitions of markings 1..n into v <= v_max consecutive
    nonempty blocks, one per set of cut gaps.  A singleton block equal to
    ``free`` does not count towards v."""
    out = []
    for v in range(1, n + 1):
        for cuts in combinations(range(n), v):
            blocks = []
            for a, b in zip(cuts, cuts[1:] + (cuts[0] + n,)):
                blocks.append([(m % n) + 1 for m in range(a + 1, b + 1)])
            counted = v - sum(1 for blk in blocks if free is not None and blk == [free])
            if counted <= v_max:
                out.append(blocks)
    return out


def quantum_bracket(Vs, D, f: TestFunction, N: int = None, v_max: int = 3,
                    free: int = None, allow_large: bool = False) -> complex:
    """Sum of planar one-loop ring amplitudes with externals outside the loop."""
    n = len(Vs)
    if n < 2:
        raise ContractError("quantum bracket needs n >= 2")
    if v_max < 1:
        raise ContractError("v_max must be >= 1")
    if v_max > 3 and not allow_large:
        raise ContractError("v_max > 3 requires allow_large=True")
    D = linalg.hermitian(D)
    N = D.shape[0] if N is None else int(N)
    es = _spectrum(D, N)
    lam = es.values[:N]
    G = propagator(D, f, N).G
    Ws = _rotate_fields(es, Vs, N)
    total = 0.0 + 0.0j
    for blocks in ring_blocks(n, v_max, free):
        total += _amplitude_rotated(_plan(ring_diagram(blocks)), Ws, f, lam, G, N)
    return complex(total)


# Ward identities ------------------------------------------------------------------

@dataclass
class WardReport:
    kind: str
    lhs: complex
    rhs: complex
    residual: float
    scale: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale


def _report(kind, lhs, rhs):
    lhs_arr, rhs_arr = np.asarray(lhs), np.asarray(rhs)
    res = float(np.abs(lhs_arr - rhs_arr).max())
    scale = float(max(1.0, np.abs(lhs_arr).max(), np.abs(rhs_arr).max()))
    if lhs_arr.ndim:
        lhs, rhs = complex(np.abs(lhs_arr).max()), complex(np.abs(rhs_arr).max())
    return WardReport(kind, complex(lhs), complex(rhs), res, scale)


def ward_check(kind: str, D, f: TestFunction, a, Vs=(), N: int = None,
               v_max: int = 2) -> WardReport:
    """Residual of the vertex, gauge-edge or quantum Ward identity.

    vertex:     <a V1, .., Vn> - <V1, .., Vn a> = <V1, .., Vn, [D,a]>
    gauge-edge: kernel identity (G_ik - G_kn) delta_kl a_in against the
                three-point insertion of [D,a] on the edge, for all i,k,l,n
    quantum:    <<a V1, ..>> - <<.., Vn a>> = <<V1, .., Vn, [D,a]>>, where on the
                right a singleton [D,a] loop vertex does not count towards v_max
    """
    D = linalg.hermitian(D)
    N = D.shape[0] if N is None else int(N)
    a = linalg.as_matrix(a)
    Da = linalg.commutator(D, a)
    Vs = [linalg.as_matrix(V) for V in Vs]
    if kind == "vertex":
        n = len(Vs)
        lhs = (amplitude(tree(n), [a @ Vs[0]] + Vs[1:], D, f, N)
               - amplitude(tree(n), Vs[:-1] + [Vs[-1] @ a], D, f, N))
        rhs = amplitude(tree(n + 1), Vs + [Da], D, f, N)
        return _report(kind, lhs, rhs)
    if kind == "gauge-edge":
        es = _spectrum(D, N)
        lam = es.values[:N]
        G = propagator(D, f, N).G
        A = es.rotate_in(a)[:N, :N]
        dl = np.eye(N)
        # lhs[i,k,l,n] = sum_m G_ik d_im d_kl a_mn - G_ln d_mn d_kl a_im
        lhs = (np.einsum("ik,im,kl,mn->ikln", G, dl, dl, A)
               - np.einsum("ln,mn,kl,im->ikln", G, dl, dl, A))
        # rhs: edge (ik)-(pq), vertex (f')^[2](p,q,r) [D,a]_qr, edge (rp)-(ln)
        T2 = divdiff_table(f.derivative_function(1), [lam] * 3)
        DA = (lam[:, None] - lam[None, :]) * A
        rhs = -np.einsum("pqr,qr,ik,iq,kp,rp,rn,pl->ikln", T2, DA, G, dl, dl, G, dl, dl)
        return _report(kind, lhs, rhs)
    if kind == "quantum":
        n = len(Vs)
        lhs = (quantum_bracket([a @ Vs[0]] + Vs[1:], D, f, N, v_max)
               - quantum_bracket(Vs[:-1] + [Vs[-1] @ a], D, f, N, v_max))
        rhs = quantum_bracket(Vs + [Da], D, f, N, v_max, free=n + 1,
                              allow_large=True)
        return _report(kind, lhs, rhs)
    raise ContractError(f"unknown Ward identity {kind!r}")


def amplitude_vs_cutoff(diagram: Diagram, fields, D, f: TestFunction, Ns):
    """Tabulate the amplitude over a list of levels N."""
    return [(int(N), amplitude(diagram, fields, D, f, N)) for N in Ns]
