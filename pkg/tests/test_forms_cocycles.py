import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclab import cocycles, forms, linalg
from nclab.config import make_rng
from nclab.forms import UniversalForm
from nclab.funcs import Gaussian

seeds = st.integers(0, 2 ** 32 - 1)


def test_d_squared_zero(rng):
    A = forms.random_hermitian_one_form(rng, 2, 3)
    assert forms.d(forms.d(A)).is_zero()


def test_leibniz_under_pi(rng):
    # pi_D is multiplicative
    D = np.diag([1.0, 2.0, 3.0])
    a, b = linalg.random_matrix(rng, 3), linalg.random_matrix(rng, 3)
    w = UniversalForm.monomial(a, (b,))
    v = UniversalForm.monomial(b, (a,))
    np.testing.assert_allclose(forms.pi_D(w * v, D), forms.pi_D(w, D) @ forms.pi_D(v, D), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_star_is_adjoint_under_pi(seed):
    rng = make_rng(seed)
    D = np.diag([0.5, 1.0, 2.5])
    w = UniversalForm.monomial(linalg.random_matrix(rng, 3), (linalg.random_matrix(rng, 3),
                                                               linalg.random_matrix(rng, 3)))
    np.testing.assert_allclose(forms.pi_D(forms.star(w), D), forms.pi_D(w, D).conj().T, atol=1e-12)


def test_curvature_and_chern_simons(rng):
    D = np.diag([1.0, 2.0, 3.0])
    A = forms.random_hermitian_one_form(rng, 1, 3)
    F = forms.curvature(A)
    assert F == forms.d(A) + A * A
    assert forms.chern_simons(A, 1) == A
    assert forms.chern_simons(A, 2).degrees() == {3}
    with pytest.raises(linalg.ContractError):
        forms.curvature(F)


def test_gauge_transform_pi(rng):
    D = np.diag([1.0, 2.0, 3.0])
    A = forms.random_hermitian_one_form(rng, 2, 3)
    U = linalg.random_unitary(rng, 3)
    V, VU = forms.pi_D(A, D), forms.pi_D(forms.gauge_transform(A, U), D)
    # D + pi(A^U) = U (D + pi(A)) U*
    np.testing.assert_allclose(D + VU, U @ (D + V) @ U.conj().T, atol=1e-12)


D0 = np.diag([0.3, 1.1, 2.0])


@pytest.mark.parametrize("n", [1, 3, 5])
def test_b_phi_odd(rng, n):
    f = Gaussian()
    lhs, rhs = cocycles.b_op(cocycles.phi(n, D0, f)), cocycles.phi(n + 1, D0, f)
    for _ in range(3):
        a = cocycles.random_tuple(rng, n + 1, 3)
        assert abs(lhs(*a) - rhs(*a)) <= 1e-9 * max(1.0, abs(rhs(*a)))


@pytest.mark.parametrize("k", [1, 2])
def test_even_cocycle_closed(rng, k):
    p = cocycles.phi(2 * k, D0, Gaussian())
    for c, deg in ((cocycles.b_op(p), 2 * k + 1), (cocycles.B_op(p), 2 * k - 1)):
        a = cocycles.random_tuple(rng, deg, 3)
        assert abs(c(*a)) < 1e-9


def test_psi_tilde_cycle(rng):
    f = Gaussian()
    c = cocycles.b_op(cocycles.psi_tilde(1, D0, f)) + cocycles.B_op(cocycles.psi_tilde(2, D0, f))
    assert abs(c(*cocycles.random_tuple(rng, 2, 3))) < 1e-9


def test_integrate_matches_pairing(rng):
    f = Gaussian()
    a0, a1 = linalg.random_matrix(rng, 3), linalg.random_matrix(rng, 3)
    fam = cocycles.CochainFamily("phi", D0, f)
    w = UniversalForm.monomial(a0, (a1,), c=2.0)
    assert abs(cocycles.integrate(fam, w) - 2.0 * cocycles.phi(1, D0, f)(forms.element(a0),
                                                                       forms.element(a1))) < 1e-12
