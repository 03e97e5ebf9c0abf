import numpy as np
from hypothesis import given, settings, strategies as st

from nclab import linalg, ssf
from nclab.config import make_rng
from nclab.funcs import Gaussian, Monomial

seeds = st.integers(0, 2 ** 32 - 1)


def test_hand_eta():
    eta = ssf.eta_one(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(eta([-0.5, 0.0, 0.5, 0.999, 1.0, 2.0]), [0, 1, 1, 1, 0, 0])
    rep = ssf.trace_formula_check(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]), Monomial(2))
    assert rep.lhs == 1 and rep.residual == 0


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_trace_formula_random(seed):
    rng = make_rng(seed)
    H, V = linalg.random_hermitian(rng, 5, 2.0), linalg.random_hermitian(rng, 5)
    for f in (Monomial(2), Gaussian()):
        assert ssf.trace_formula_check(H, V, f).residual <= 1e-10


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_eta_integrates_to_minus_trace_v(seed):
    # f(x) = x gives int eta = Tr V
    rng = make_rng(seed)
    H, V = linalg.random_hermitian(rng, 4), linalg.random_hermitian(rng, 4)
    assert abs(ssf.eta_one(H, V).integrate_derivative(Monomial(1)) - np.trace(V)) < 1e-12


def test_positive_perturbation_gives_nonnegative_eta(rng):
    H = linalg.random_hermitian(rng, 5)
    B = linalg.random_matrix(rng, 5)
    eta = ssf.eta_one(H, B @ B.conj().T)
    assert (eta.values >= 0).all()


def test_higher_order_and_norms(rng):
    H, V = linalg.random_hermitian(rng, 4), linalg.random_hermitian(rng, 4)
    rep = ssf.trace_formula_check(H, V, Gaussian(), 2)
    assert rep.residual <= 1e-8 * rep.scale
    assert ssf.relative_schatten_norm(H, V, 1) >= ssf.relative_schatten_norm(H, V, 2)
    assert ssf.eta_weight_ratio(H, V) > 0
