"""Acceptance suite: sixteen criteria at their stated tolerances.

Run under pytest (one test per criterion, with a pass/fail line per criterion in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import sys
from fractions import Fraction

import numpy as np
import pytest

from nclab import cocycles, expansion, flow, forms, linalg, moi, oneloop, ssf
from nclab import torusq as tq
from nclab.config import make_rng
from nclab.funcs import Gaussian, Monomial, PolyGaussian

RESULTS = {}


def _rel(x, y):
    return abs(x - y) / max(1.0, abs(x), abs(y))


def moi_derivative_oracle():
    rng = make_rng(1)
    worst = 0.0
    for N in (4, 5, 6):
        for f in (Monomial(3), Monomial(4), Gaussian()):
            H, V = linalg.random_hermitian(rng, N), linalg.random_hermitian(rng, N)
            for n in (1, 2, 3):
                worst = max(worst, _rel(moi.trace_moi(H, f, [V] * n), moi.fd_derivative(H, V, f, n)))
    return worst <= 1e-5, f"max relative deviation {worst:.2e} (<= 1e-5)"


def hand_value():
    val = moi.trace_moi(np.diag([0.0, 1.0]), Monomial(3), [np.array([[0.0, 1.0], [1.0, 0.0]])] * 2)
    return abs(val - 3) <= 1e-12, f"trace_moi = {val.real:.15g}"


def remainder_double_representation():
    rng = make_rng(3)
    worst = 0.0
    for _ in range(20):
        H, V = linalg.random_hermitian(rng, 4), linalg.random_hermitian(rng, 4)
        for n in range(1, 5):
            d1, d2 = moi.taylor_remainder(H, V, Gaussian(), n)
            worst = max(worst, np.abs(d1 - d2).max() / max(1.0, np.abs(d1).max(), np.abs(d2).max()))
    return worst <= 1e-8, f"max scaled residual {worst:.2e} (<= 1e-8)"


def change_of_variables():
    rng = make_rng(4)
    worst = 0.0
    for n in (1, 2, 3):
        for f in (Gaussian(), Monomial(3)):
            ops = [linalg.random_hermitian(rng, 4) for _ in range(n + 1)]
            Vs = [linalg.random_matrix(rng, 4) for _ in range(n)]
            lhs, rhs = moi.change_of_variables(moi.MoiContext(ops, f), Vs)
            worst = max(worst, np.abs(lhs - rhs).max() / max(1.0, np.abs(lhs).max()))
    return worst <= 1e-8, f"max scaled residual {worst:.2e} (<= 1e-8)"


def schatten_bound():
    rng = make_rng(5)
    worst, count = 0.0, 0
    for _ in range(20):
        f = PolyGaussian(rng.normal(size=3), width=rng.uniform(0.5, 2.0))
        D = linalg.random_hermitian(rng, 4, scale=2.0)
        for s in (1, 2):
            for n in (1, 2):
                rep = moi.schatten_bound_check(D, f, [linalg.random_hermitian(rng, 4) for _ in range(n)], s)
                worst = max(worst, rep.lhs / rep.rhs)
                count += rep.holds
    return count == 80, f"{count}/80 hold, max lhs/rhs {worst:.3f}"


def cocycle_identities():
    rng = make_rng(6)
    D, f = np.diag([0.3, 1.1, 2.0]), Gaussian()
    sd = cocycles.SpectralData(D, f)
    phi = lambda n: cocycles.phi(n, D, f, sd)
    zero = cocycles.zero_cochain
    ids = [(cocycles.b_op(phi(n)), phi(n + 1), n + 1) for n in (1, 3, 5)]
    for k in (1, 2):
        ids.append((cocycles.b_op(phi(2 * k)), zero(2 * k + 1), 2 * k + 1))
        ids.append((cocycles.B_op(phi(2 * k)), zero(2 * k - 1), 2 * k - 1))
        ids.append((cocycles.b_op(cocycles.psi_tilde(k, D, f, sd))
                    + cocycles.B_op(cocycles.psi_tilde(k + 1, D, f, sd)), zero(2 * k), 2 * k))
    for n in (2, 4):
        ids.append((cocycles.b_op(cocycles.B0_op(phi(n))),
                    phi(n).scale(2) - cocycles.B0_op(phi(n + 1)), n))
    worst = 0.0
    for c1, c2, deg in ids:
        for _ in range(10):
            a = cocycles.random_tuple(rng, deg, 3)
            worst = max(worst, _rel(c1(*a), c2(*a)))
    return worst <= 1e-9, f"{len(ids)} identities, max scaled residual {worst:.2e}"


def _small_form(rng, D, bound=0.25):
    A = forms.random_hermitian_one_form(rng, 2, D.shape[0])
    return A.scale(bound / linalg.op_norm(forms.pi_D(A, D)))


def expansion_identity():
    rng = make_rng(7)
    D, f = np.diag([1.0, 2.0, 3.0]), Gaussian()
    A = _small_form(rng, D)
    reps = [expansion.expand(D, f, A, K) for K in (1, 2, 3, 4)]
    agree = all(r.agree for r in reps[:3])
    mags = [abs(r.remainder_direct) for r in reps]
    mono = all(b < a for a, b in zip(mags, mags[1:]))
    worst = max(abs(r.remainder_direct - r.remainder_formula) / r.scale for r in reps[:3])
    return agree and mono, f"identity {worst:.2e}, |remainder| " + ", ".join(f"{m:.2e}" for m in mags)


def gauge_invariance():
    rng = make_rng(8)
    D, f = np.diag([1.0, 2.0, 3.0]), Gaussian()
    rep = expansion.gauge_invariance_report(D, f, _small_form(rng, D), linalg.random_unitary(rng, 3), 2)
    ok = rep.total_trace_difference <= 1e-10 and max(rep.ym_differences) <= 1e-8
    return ok, f"total {rep.total_trace_difference:.2e}, YM {max(rep.ym_differences):.2e}"


def k1_truncation():
    D, f = np.diag([1.0, 2.0, 3.0]), Gaussian()
    U = expansion.small_unitary(make_rng(0), D)
    S, _ = expansion.k1_pairing_truncation(D, f, U, 3)
    ratio = abs(S[3]) / max(abs(S[0]), 1e-12)
    return ratio <= 1e-3, f"|S3|/|S0| = {ratio:.2e} (<= 1e-3)"


def one_loop():
    rng = make_rng(10)
    D, f = np.diag([1.0, 2.0, 3.0, 4.0]), Monomial(3)
    V1, V2, V3 = (linalg.random_hermitian(rng, 4) for _ in range(3))
    a = linalg.random_matrix(rng, 4)
    closed = max(abs(oneloop.amplitude(oneloop.two_point(k), [V1, V2], D, f)
                     - oneloop.explicit_two_point(k, V1, V2, D, f))
                 / max(1.0, abs(oneloop.explicit_two_point(k, V1, V2, D, f)))
                 for k in ("chain", "bubble", "tadpole"))
    sq = oneloop.amplitude(oneloop.two_point("bubble"), [V1, V2], D, Monomial(2))
    ward = max(oneloop.ward_check(k, D, f, a, [V1, V2], v_max=2).relative
               for k in ("vertex", "gauge-edge", "quantum"))
    q = oneloop.quantum_bracket([V1, V2, V3], D, f, v_max=2)
    cyc = abs(q - oneloop.quantum_bracket([V2, V3, V1], D, f, v_max=2))
    ok = closed <= 1e-10 and sq == 0 and ward <= 1e-9 and cyc <= 1e-10 * max(1.0, abs(q))
    return ok, f"closed forms {closed:.1e}, x^2 bubble {abs(sq)}, Ward {ward:.1e}, cyclicity {cyc:.1e}"


def eta_trace_formula():
    hand = ssf.trace_formula_check(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]), Monomial(2))
    rng = make_rng(11)
    worst = 0.0
    for _ in range(20):
        H, V = linalg.random_hermitian(rng, 5), linalg.random_hermitian(rng, 5)
        for f in (Monomial(2), Gaussian()):
            worst = max(worst, ssf.trace_formula_check(H, V, f).residual)
    ok = hand.residual <= 1e-10 and hand.lhs == 1 and worst <= 1e-10
    return ok, f"hand {hand.lhs.real:g} = {hand.rhs.real:g}, random max residual {worst:.1e}"


def _gen(rng, D, k=2, bmax=2):
    return tq.generator(rng.integers(-bmax, bmax + 1, D),
                        [(complex(rng.normal(), rng.normal()), rng.uniform(-0.15, 0.15, D) / np.sqrt(D))
                         for _ in range(k)])


def torus_quantization():
    rng = make_rng(12)
    formula = max(tq.formula_residual(_gen(rng, 2), 1 / 3, 5) for _ in range(5))
    l = tq.Lattice([1, Fraction(1, 2)])
    r1 = tq.Refinement(l, [("sub", 0, Fraction(1, 3)), ("add", 2)])
    r2 = tq.Refinement(r1.target, [("sub", 1, Fraction(1, 2)), ("sub", 3, Fraction(1, 4))])
    r12 = r1.then(r2)
    S1, S2 = (np.array(r.S_edges(), dtype=object) for r in (r1, r2))
    functor = ((S2.dot(S1) == np.array(r12.S_edges(), dtype=object)).all()
               and r12.S_edges() == r12.S_direct() and r12.T_edges() == r12.T_direct())
    inter = tq.intertwining_residual(tq.quantize([_gen(rng, 2), _gen(rng, 2)], 0.25, 6), r12, 4)
    gens = [_gen(rng, 1) for _ in range(5)]
    inj = tq.injectivity_witness(gens, 1 / 3)
    ok = formula <= 1e-12 and functor and inter <= 1e-12 and inj.in_ball and inj.smallest_sv > 1e-6
    return ok, (f"formula {formula:.1e}, functorial {functor}, intertwining {inter:.1e}, "
                f"Gram smallest sv {inj.smallest_sv:.3f}")


def sdq_residuals():
    rng = make_rng(13)
    hbars = [2.0 ** -k for k in range(1, 7)]
    rep = tq.sdq_residuals(_gen(rng, 1), _gen(rng, 1), hbars, cutoff=64, p_range=300.0)
    vn, dirac = rep.slopes["von_neumann"], rep.slopes["dirac"]
    below = all(v <= b for v, b in zip(rep.von_neumann, rep.vn_bound))
    ok = 0.9 <= vn <= 1.1 and 0.9 <= dirac <= 1.1 and below
    return ok, (f"slopes: von Neumann {vn:.3f}, Dirac {dirac:.3f} (both required in [0.9, 1.1]); "
                f"von Neumann below bound {below}")


def rieffel():
    rf = tq.rieffel_failure(0.5, 4)
    jump = rf.norm_at_hbar0 <= 1e-10 and abs(rf.norm_at_hbarN - 1.0) <= 1e-10
    g = tq.generator([1], [(1.0, [0.1]), (1.0, [-0.15])])
    hs = np.linspace(1 / 3 * 0.995, 1 / 3 * 1.005, 11)
    sups = [max(tq.tower_norms(g, tq.Lattice([1]), h, 4, cutoff=8)) for h in hs]
    var = (max(sups) - min(sups)) / max(sups)
    return jump and g.in_ball() and var <= 0.05, (
        f"norms {rf.norm_at_hbar0:.1e} -> {rf.norm_at_hbarN:.3f}, tower variation {var:.2e}")


def dyson():
    rep = tq.dyson_vs_exact({(1,): 0.5, (-1,): 0.5}, 0.2, hbar=1.0, m=3, cutoff=16)
    return rep.residual <= rep.tail_bound + 1e-4, f"residual {rep.residual:.2e}, tail {rep.tail_bound:.2e}"


def flow_checks():
    rng = make_rng(16)
    x0 = flow.PhasePoint(rng.uniform(0, 1, 2), rng.normal(0, 2, 2))
    free = flow.distance(flow.integrate(x0, flow.TrigPotential.zero(2), 1.0), flow.free_flow(x0, 1.0))
    V = flow.TrigPotential({(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.3, (0, -1): 0.3,
                            (1, 1): 0.2j, (-1, -1): -0.2j})
    tab = flow.dynamics_comparison(V, (1, 0), [rng.uniform(0, 1, 2) for _ in range(4)], [1.0, 0.3])
    W = flow.fejer_smooth(V, 4)
    holds = 0
    for _ in range(10):
        y0 = flow.PhasePoint(rng.uniform(0, 1, 2), rng.normal(0, 1, 2))
        z0 = flow.PhasePoint(y0.q + rng.uniform(-1e-3, 1e-3, 2), y0.p)
        holds += flow.gronwall_check(V, W, y0, z0).holds
    ok = free <= 1e-12 and abs(tab.slope + 1) <= 0.15 and holds == 10
    return ok, f"free flow {free:.1e}, decay slope {tab.slope:.3f}, Gronwall {holds}/10"


CRITERIA = [
    ("moi-derivative-oracle", moi_derivative_oracle),
    ("hand-value", hand_value),
    ("remainder-double-representation", remainder_double_representation),
    ("change-of-variables", change_of_variables),
    ("schatten-bound", schatten_bound),
    ("cocycle-identities", cocycle_identities),
    ("expansion-identity", expansion_identity),
    ("gauge-invariance", gauge_invariance),
    ("k1-pairing-truncation", k1_truncation),
    ("one-loop", one_loop),
    ("eta-trace-formula", eta_trace_formula),
    ("torus-quantization", torus_quantization),
    ("sdq-residual-slopes", sdq_residuals),
    ("rieffel-failure-and-tower", rieffel),
    ("dyson-vs-exact", dyson),
    ("flow", flow_checks),
]
IDS = [f"{i:02d}-{name}" for i, (name, _) in enumerate(CRITERIA, 1)]


def _line(label, ok, detail):
    return f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"


@pytest.mark.parametrize("label,check", [(i, c) for i, (_, c) in zip(IDS, CRITERIA)], ids=IDS)
def test_criterion(label, check):
    ok, detail = check()
    RESULTS[label] = (ok, detail)
    print(_line(label, ok, detail))
    assert ok, detail


def main() -> int:
    failures = 0
    for label, (_, check) in zip(IDS, CRITERIA):
        ok, detail = check()
        failures += not ok
        print(_line(label, ok, detail), flush=True)
    print(f"{len(CRITERIA) - failures}/{len(CRITERIA)} criteria pass")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
