import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclab import linalg
from nclab.config import make_rng
from nclab.funcs import (Gaussian, Monomial, Polynomial, PolyGaussian, RationalU, TrigPoly,
                         divided_difference, from_spec, weight_by_u)

seeds = st.integers(0, 2 ** 32 - 1)


def test_hermitian_rejects_asymmetric():
    with pytest.raises(linalg.ContractError):
        linalg.hermitian([[0, 1], [0, 0]])
    with pytest.raises(linalg.ContractError):
        linalg.as_matrix(np.ones((2, 3)))


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 6))
def test_apply_function_matches_polynomial(seed, n):
    rng = make_rng(seed)
    H = linalg.random_hermitian(rng, n, scale=2.0)
    np.testing.assert_allclose(linalg.apply_function(H, Monomial(3)), H @ H @ H, atol=1e-12)
    assert abs(linalg.trace_f(H, Monomial(2)) - np.trace(H @ H)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 5))
def test_norm_relations(seed, n):
    A = linalg.random_matrix(make_rng(seed), n)
    assert linalg.op_norm(A) <= linalg.schatten_norm(A, 2) + 1e-12
    assert linalg.schatten_norm(A, 2) <= linalg.trace_norm(A) + 1e-12
    assert abs(linalg.schatten_norm(A, np.inf) - linalg.op_norm(A)) < 1e-14


def test_expm_and_unitary(rng):
    H = linalg.random_hermitian(rng, 4)
    U = linalg.expm_i(H, 0.7)
    np.testing.assert_allclose(U @ U.conj().T, np.eye(4), atol=1e-13)
    W = linalg.random_unitary(rng, 4)
    np.testing.assert_allclose(W.conj().T @ W, np.eye(4), atol=1e-13)


def test_matrix_json_roundtrip(rng):
    A = linalg.random_matrix(rng, 3)
    np.testing.assert_array_equal(linalg.matrix_from_json(linalg.matrix_to_json(A)), A)


def test_divided_difference_hand_values():
    assert abs(divided_difference(Monomial(3), [0.0, 1.0, 2.0]) - 3) < 1e-14
    # confluent nodes give f^(k)/k!
    assert abs(divided_difference(Monomial(4), [1.0, 1.0, 1.0]) - 6) < 1e-12
    assert abs(RationalU(1).deriv(1, 0.0) - 1) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=5), st.permutations(range(5)))
def test_divided_difference_symmetric(nodes, perm):
    f = Gaussian()
    perm = [p for p in perm if p < len(nodes)]
    a = divided_difference(f, nodes)
    b = divided_difference(f, [nodes[p] for p in perm])
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@pytest.mark.parametrize("f", [Gaussian(), PolyGaussian([1.0, -0.5, 0.2], 1.3),
                               Polynomial([1, 2, 3]), TrigPoly([(1.0, 0.5), (0.5j, -1.0)])])
def test_derivatives_against_differences(f):
    x, h = np.linspace(-1.5, 1.5, 7), 1e-5
    for k in (1, 2, 3):
        fd = (f.deriv(k - 1, x + h) - f.deriv(k - 1, x - h)) / (2 * h)
        np.testing.assert_allclose(f.deriv(k, x), fd, rtol=1e-6, atol=1e-6)


def test_weight_by_u_and_specs():
    f = Gaussian()
    g = weight_by_u(f, 2)
    x = np.array([0.3, -1.2])
    np.testing.assert_allclose(g(x), f(x) * (x - 1j) ** 2, atol=1e-14)
    assert from_spec({"family": "Monomial", "params": {"m": 2}})(3.0) == 9.0
    with pytest.raises(linalg.ContractError):
        from_spec({"params": {}})
