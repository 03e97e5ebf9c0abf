import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclab import linalg, moi
from nclab.config import make_rng
from nclab.funcs import Gaussian, Monomial, PolyGaussian

seeds = st.integers(0, 2 ** 32 - 1)


def test_hand_value():
    H, V = np.diag([0.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]])
    assert abs(moi.trace_moi(H, Monomial(3), [V, V]) - 3) < 1e-12


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 3))
def test_derivative_oracle(seed, n):
    rng = make_rng(seed)
    H, V = linalg.random_hermitian(rng, 4), linalg.random_hermitian(rng, 4)
    a, b = moi.trace_moi(H, Gaussian(), [V] * n), moi.fd_derivative(H, V, Gaussian(), n)
    assert abs(a - b) <= 1e-5 * max(1.0, abs(a))


def test_first_order_is_trace_of_derivative(rng):
    H, V = linalg.random_hermitian(rng, 5), linalg.random_hermitian(rng, 5)
    f = Monomial(3)
    assert abs(moi.trace_moi(H, f, [V]) - 3 * np.trace(H @ H @ V)) < 1e-12


def test_moi_order_one_is_commutator_quotient(rng):
    # T_{f^[1]}(V) for f = x^2 equals HV + VH
    H, V = linalg.random_hermitian(rng, 4), linalg.random_matrix(rng, 4)
    T = moi.moi_operator(moi.MoiContext.uniform(H, Monomial(2), 1), [V])
    np.testing.assert_allclose(T, H @ V + V @ H, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(1, 4))
def test_remainder_paths(seed, n):
    rng = make_rng(seed)
    H, V = linalg.random_hermitian(rng, 4), linalg.random_hermitian(rng, 4)
    d1, d2 = moi.taylor_remainder(H, V, Gaussian(), n, checked=True)
    assert np.abs(d1 - d2).max() <= 1e-8 * max(1.0, np.abs(d1).max())


@pytest.mark.parametrize("n", [1, 2, 3])
def test_change_of_variables(rng, n):
    ops = [linalg.random_hermitian(rng, 3) for _ in range(n + 1)]
    Vs = [linalg.random_matrix(rng, 3) for _ in range(n)]
    lhs, rhs = moi.change_of_variables(moi.MoiContext(ops, Gaussian()), Vs)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * max(1.0, np.abs(lhs).max()))


def test_bracket_equals_rotation_sum(rng):
    D = linalg.random_hermitian(rng, 4)
    Vs = [linalg.random_hermitian(rng, 4) for _ in range(3)]
    moi.bracket(D, Gaussian(), Vs, check=True)


@pytest.mark.parametrize("s,n", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_schatten_bound(rng, s, n):
    f = PolyGaussian([1.0, 0.3], 1.2)
    D = linalg.random_hermitian(rng, 4, scale=3.0)
    assert moi.schatten_bound_check(D, f, [linalg.random_hermitian(rng, 4) for _ in range(n)], s).holds


def test_contract_errors(rng):
    H = linalg.random_hermitian(rng, 3)
    with pytest.raises(linalg.ContractError):
        moi.trace_moi(H, Gaussian(), [])
    with pytest.raises(linalg.ContractError):
        moi.moi_operator(moi.MoiContext.uniform(H, Gaussian(), 2), [H])
    with pytest.raises(linalg.ContractError):
        moi.MoiContext([H, np.eye(2)], Gaussian())
