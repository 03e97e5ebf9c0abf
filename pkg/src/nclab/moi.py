"""Multiple operator integrals at finite dimension.

All sums are evaluated exactly in the eigenbases of the slot operators:

    T(V_1..V_n) = sum f^[n](lam0_i0, ..., lamn_in) P0_i0 V_1 P1_i1 ... V_n Pn_in
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, factorial

import numpy as np

from nclab import linalg
from nclab.config import TOL
from nclab.funcs import TestFunction, PolyGaussian, c_sn, divdiff_grid, divided_difference, weight_by_u
from nclab.linalg import ContractError

_TABLE_CACHE: dict = {}
_CACHE_LIMIT = 64


class ConsistencyError(AssertionError):
    """Two code paths for the same quantity disagree."""


def _check_size(N: int, order: int):
    terms = N ** (order + 1)
    if terms > TOL.max_terms:
        raise ContractError(f"contraction of {terms} terms exceeds envelope {TOL.max_terms}")


def divdiff_table(f: TestFunction, lams) -> np.ndarray:
    """Cached f^[n] tensor on the product of the given spectra."""
    key = (f.key,) + tuple(np.asarray(l, dtype=float).tobytes() for l in lams)
    T = _TABLE_CACHE.get(key)
    if T is None:
        _check_size(max(len(l) for l in lams), len(lams) - 1)
        T = divdiff_grid(f, lams)
        if len(_TABLE_CACHE) >= _CACHE_LIMIT:
            _TABLE_CACHE.pop(next(iter(_TABLE_CACHE)))
        _TABLE_CACHE[key] = T
    return T


def _wrap_table(f: TestFunction, lam, n: int) -> np.ndarray:
    """W[i1..in] = f^[n](lam_i1, ..., lam_in, lam_i1)."""
    key = ("wrap", f.key, n, np.asarray(lam).tobytes())
    T = _TABLE_CACHE.get(key)
    if T is None:
        _check_size(len(lam), n)
        grids = list(np.meshgrid(*([lam] * n), indexing="ij"))
        T = divided_difference(f, np.stack(grids + [grids[0]], axis=-1))
        _TABLE_CACHE[key] = T
    return T


def _cyclic_sum(T, Ws):
    """sum T[i1..in] W1[i1,i2] ... Wn[in,i1]."""
    n = len(Ws)
    ops = [T, list(range(n))]
    for j, W in enumerate(Ws):
        ops += [W, [j, (j + 1) % n]]
    return complex(np.einsum(*ops, [], optimize="greedy"))


@dataclass
class MoiContext:
    """Slot operators H_0..H_n with their eigensystems and the symbol f."""
    ops: list
    f: TestFunction
    eig: list = field(default_factory=list)

    def __post_init__(self):
        self.ops = [linalg.hermitian(H) for H in self.ops]
        dims = {H.shape[0] for H in self.ops}
        if len(dims) != 1:
            raise ContractError("slot operators differ in dimension")
        if self.order > self.f.max_order:
            raise ContractError("order exceeds function order")
        cache = {}
        eig = []
        for H in self.ops:
            k = H.tobytes()
            if k not in cache:
                cache[k] = linalg.eigh(H)
            eig.append(cache[k])
        self.eig = eig

    @classmethod
    def uniform(cls, H, f: TestFunction, n: int) -> "MoiContext":
        return cls([H] * (n + 1), f)

    @property
    def order(self) -> int:
        return len(self.ops) - 1

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def table(self):
        return divdiff_table(self.f, [e.values for e in self.eig])


def moi_operator(ctx: MoiContext, Vs) -> np.ndarray:
    n = ctx.order
    if n == 0:
        return linalg.apply_function(ctx.ops[0], ctx.f)
    if len(Vs) != n:
        raise ContractError(f"expected {n} perturbations, got {len(Vs)}")
    Vs = [np.asarray(V, dtype=complex) for V in Vs]
    if any(V.shape != (ctx.dim, ctx.dim) for V in Vs):
        raise ContractError("perturbation dimension mismatch")
    U = [e.vectors for e in ctx.eig]
    Ws = [U[j].conj().T @ Vs[j] @ U[j + 1] for j in range(n)]
    ops = [ctx.table(), list(range(n + 1))]
    for j, W in enumerate(Ws):
        ops += [W, [j, j + 1]]
    M = np.einsum(*ops, [0, n], optimize="greedy")
    return U[0] @ M @ U[n].conj().T


def _eig_rotate(H, Vs):
    es = linalg.eigh(H)
    U = es.vectors
    return es, [U.conj().T @ np.asarray(V, dtype=complex) @ U for V in Vs]


def trace_moi(H, f: TestFunction, Vs, check: bool = True) -> complex:
    """Tr T^{H..H}_{f^[n]}(V_1..V_n) as the wrap-around sum.

    When all V_j coincide the (f')-form (1/n) sum (f')^[n-1] prod V is
    evaluated as well and compared.
    """
    n = len(Vs)
    if n < 1:
        raise ContractError("need n >= 1")
    if n > f.max_order:
        raise ContractError("order exceeds function order")
    es, Ws = _eig_rotate(H, Vs)
    val = _cyclic_sum(_wrap_table(f, es.values, n), Ws)
    if check and all(np.array_equal(Vs[0], V) for V in Vs[1:]):
        alt = _cyclic_sum(divdiff_table(f.derivative_function(1), [es.values] * n), Ws) / n
        scale = max(1.0, abs(val), abs(alt))
        if abs(val - alt) > TOL.trace_forms * scale:
            raise ConsistencyError(f"trace forms disagree: {val} vs {alt}")
    return val


def bracket(D, f: TestFunction, Vs, check: bool = False) -> complex:
    """<V_1,...,V_n> = sum (f')^[n-1](lam_i1..lam_in) (V_1)_{i1 i2} ... (V_n)_{in i1}.

    With ``check`` the value is compared to the sum over cyclic rotations of
    trace_moi.
    """
    n = len(Vs)
    if n < 1:
        raise ContractError("need n >= 1")
    es, Ws = _eig_rotate(D, Vs)
    val = _cyclic_sum(divdiff_table(f.derivative_function(1), [es.values] * n), Ws)
    if check:
        rot = sum(trace_moi(D, f, list(Vs[j:]) + list(Vs[:j]), check=False) for j in range(n))
        if abs(rot - val) > TOL.bracket * max(1.0, abs(val)):
            raise ConsistencyError(f"bracket rotation sum {rot} differs from {val}")
    return val


def derivative_of_trace(H, V, f: TestFunction, n: int) -> complex:
    """(1/n!) d^n/dt^n Tr f(H + tV) at t = 0."""
    return trace_moi(H, f, [V] * n)


def taylor_remainder(H, V, f: TestFunction, n: int, checked: bool = False):
    """Both representations of f(H+V) minus its order n-1 Taylor polynomial.

    Returns (direct, moi_form); the second is T^{H+V,H,...,H}_{f^[n]}(V,...,V).
    """
    if n < 1:
        raise ContractError("need n >= 1")
    H = linalg.hermitian(H)
    V = linalg.hermitian(V)
    direct = linalg.apply_function(H + V, f)
    for k in range(n):
        direct = direct - moi_operator(MoiContext.uniform(H, f, k), [V] * k)
    other = moi_operator(MoiContext([H + V] + [H] * n, f), [V] * n)
    if checked:
        scale = max(1.0, np.abs(direct).max(), np.abs(other).max())
        if np.abs(direct - other).max() > TOL.remainder * scale:
            raise ConsistencyError("remainder representations disagree")
    return direct, other


def _tilde(Vs, R, j: int, l: int) -> np.ndarray:
    """V_{j+1} R_{j+1} ... V_l R_l (1-based slots, R_m = (H_m - i)^{-1})."""
    out = np.eye(Vs[0].shape[0], dtype=complex)
    for m in range(j + 1, l + 1):
        out = out @ Vs[m - 1] @ R[m]
    return out


def change_of_variables(ctx: MoiContext, Vs):
    """Weighted rewriting of T_{f^[n]} with resolvent-weighted perturbations.

    Returns (lhs, rhs); rhs is
    sum_p (-1)^{n-p} sum_{0<j1<..<jp<=n} T^{H0,Hj1..Hjp}_{(f u^p)^[p]}(Vt_{0,j1},..) Vt_{jp,n}.
    """
    n = ctx.order
    Vs = [np.asarray(V, dtype=complex) for V in Vs]
    lhs = moi_operator(ctx, Vs)
    R = [linalg.resolvent(H) for H in ctx.ops]
    rhs = np.zeros_like(lhs)
    for p in range(n + 1):
        fp = weight_by_u(ctx.f, p)
        for js in combinations(range(1, n + 1), p):
            sub = MoiContext([ctx.ops[0]] + [ctx.ops[j] for j in js], fp)
            cuts = (0,) + js
            args = [_tilde(Vs, R, cuts[i], cuts[i + 1]) for i in range(p)]
            rhs = rhs + (-1) ** (n - p) * moi_operator(sub, args) @ _tilde(Vs, R, cuts[-1], n)
    return lhs, rhs


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    c: float
    holds: bool


def schatten_bound_check(D, f: PolyGaussian, Vs, s: int) -> BoundReport:
    """trace norm of T^D_{f^[n]}(V..) against c_{s,n}(f) prod ||V_j|| ||(D-i)^{-1}||_s^s."""
    n = len(Vs)
    lhs = linalg.trace_norm(moi_operator(MoiContext.uniform(D, f, n), Vs))
    c = c_sn(f, s, n)
    rhs = c * float(np.prod([linalg.op_norm(V) for V in Vs])) \
        * linalg.schatten_norm(linalg.resolvent(D), s) ** s
    return BoundReport(lhs, rhs, c, lhs <= rhs)


def fd_derivative(H, V, f: TestFunction, n: int, h: float = 1e-2) -> complex:
    """(1/n!) n-th derivative of t -> Tr f(H+tV) at 0 by central differences,
    Richardson-extrapolated from steps h and h/2."""
    def trace_at(t):
        return linalg.trace_f(H + t * V, f)

    def central(step):
        # n-th central difference on the points (n/2 - k) * step
        return sum((-1) ** k * comb(n, k) * trace_at((n / 2.0 - k) * step)
                   for k in range(n + 1)) / step ** n

    d1, d2 = central(h), central(h / 2)
    return (4 * d2 - d1) / 3 / factorial(n)
