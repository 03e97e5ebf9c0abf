import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclab import expansion, forms, linalg, moi, oneloop
from nclab.config import make_rng
from nclab.funcs import Gaussian, Monomial

seeds = st.integers(0, 2 ** 32 - 1)
D3 = np.diag([1.0, 2.0, 3.0])


def _form(rng, bound=0.25):
    A = forms.random_hermitian_one_form(rng, 2, 3)
    return A.scale(bound / linalg.op_norm(forms.pi_D(A, D3)))


@settings(max_examples=5, deadline=None)
@given(seeds, st.integers(1, 3))
def test_remainder_identity(seed, K):
    rep = expansion.expand(D3, Gaussian(), _form(make_rng(seed)), K)
    assert rep.agree
    assert max(rep.intermediate_residuals) < 1e-9


def test_word_route_matches_form_route(rng):
    A = _form(rng)
    rep = expansion.expand(D3, Gaussian(), A, 2)
    for (cs, ym), c, y in zip(expansion.expand_forms(D3, Gaussian(), A, 2), rep.cs_terms, rep.ym_terms):
        assert abs(cs - c) < 1e-10 and abs(ym - y) < 1e-10


def test_gauge_invariance(rng):
    rep = expansion.gauge_invariance_report(D3, Gaussian(), _form(rng), linalg.random_unitary(rng, 3), 2)
    assert rep.total_trace_difference < 1e-10 and max(rep.ym_differences) < 1e-8


def test_k1_partial_sums_shrink():
    U = expansion.small_unitary(make_rng(0), D3)
    assert linalg.op_norm(U.conj().T @ linalg.commutator(D3, U)) <= 0.25 + 1e-12
    S, terms, alt = expansion.k1_pairing_truncation(D3, Gaussian(), U, 3, cross_check=True)
    np.testing.assert_allclose(terms, alt, atol=1e-12)
    assert abs(S[3]) <= 1e-3 * abs(S[0])


def test_expand_order_guard(rng):
    with pytest.raises(linalg.ContractError):
        expansion.expand(D3, Gaussian(max_order=3), _form(rng), 2)


D2 = np.diag([1.0, 2.0])


def test_propagator_hand_values():
    G = oneloop.propagator(D2, Monomial(3)).G
    np.testing.assert_allclose(G, [[1 / 6, 1 / 9], [1 / 9, 1 / 12]], atol=1e-15)


def test_propagator_rejects_nonpositive():
    with pytest.raises(linalg.ContractError):
        oneloop.propagator(np.diag([-1.0, 1.0]), Monomial(3))


@pytest.mark.parametrize("kind", ["chain", "bubble", "tadpole"])
def test_engine_vs_closed_form(rng, kind):
    D = np.diag([1.0, 2.0, 3.0, 4.0])
    V1, V2 = linalg.random_hermitian(rng, 4), linalg.random_hermitian(rng, 4)
    a = oneloop.amplitude(oneloop.two_point(kind), [V1, V2], D, Monomial(3))
    b = oneloop.explicit_two_point(kind, V1, V2, D, Monomial(3))
    assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_chain_hand_case():
    V = np.diag([1.0, -1.0])
    a = oneloop.amplitude(oneloop.two_point("chain"), [V, V], D2, Monomial(3))
    assert abs(a - oneloop.explicit_two_point("chain", V, V, D2, Monomial(3))) < 1e-14


def test_square_bubble_vanishes(rng):
    V1, V2 = linalg.random_hermitian(rng, 3), linalg.random_hermitian(rng, 3)
    assert oneloop.amplitude(oneloop.two_point("bubble"), [V1, V2], D3, Monomial(2)) == 0


def test_tree_is_classical_bracket(rng):
    Vs = [linalg.random_hermitian(rng, 3) for _ in range(3)]
    a = oneloop.amplitude(oneloop.tree(3), Vs, D3, Gaussian())
    assert abs(a - moi.bracket(D3, Gaussian(), Vs)) < 1e-12


@pytest.mark.parametrize("kind", ["vertex", "gauge-edge", "quantum"])
def test_ward(rng, kind):
    Vs = [linalg.random_hermitian(rng, 3) for _ in range(2)]
    rep = oneloop.ward_check(kind, D3, Monomial(3), linalg.random_matrix(rng, 3), Vs)
    assert rep.relative <= 1e-9


def test_quantum_cyclicity(rng):
    Vs = [linalg.random_hermitian(rng, 3) for _ in range(3)]
    q = oneloop.quantum_bracket(Vs, D3, Monomial(3), v_max=3)
    assert abs(q - oneloop.quantum_bracket(Vs[1:] + Vs[:1], D3, Monomial(3), v_max=3)) < 1e-10


def test_diagram_validation():
    with pytest.raises(linalg.ContractError):
        oneloop.Diagram([[oneloop.ext(1), oneloop.edge(0)]])
    assert oneloop.two_point("bubble").loop_order == 1
    assert oneloop.tree(3).loop_order == 0


def test_cutoff_table(rng):
    D = np.diag([1.0, 2.0, 3.0, 4.0])
    V1, V2 = np.zeros((4, 4)), np.zeros((4, 4))
    V1[0, 0] = V2[0, 0] = 1.0
    rows = oneloop.amplitude_vs_cutoff(oneloop.two_point("tadpole"), [V1, V2], D, Monomial(3), [2, 3, 4])
    assert [N for N, _ in rows] == [2, 3, 4]
