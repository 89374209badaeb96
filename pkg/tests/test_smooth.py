import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcopt.errors import InconsistentConstantsError, UndefinedConditionNumberError
from fcopt.linalg import NormOperator
from fcopt.smooth import (Affine, AffineLogSumExp, Constants, PowerOfNorm, Quadratic, Sum,
                          VectorFunction, beta, component_from_dict, condition_number,
                          default_constants, hat_beta, taylor_eval)
from fcopt.verify import check_constants
from oracles import fd_grad, fd_hess


def with_defaults(comp, norm=None):
    comp.constants = default_constants(comp, norm)
    return comp


def test_quadratic_example():
    q = Quadratic(np.eye(2))
    x = np.array([1.0, 2.0])
    assert q.value(x) == 2.5
    np.testing.assert_array_equal(q.grad(x), [1.0, 2.0])
    np.testing.assert_array_equal(q.hess(x), np.eye(2))


def test_lse_example_against_finite_differences():
    f = AffineLogSumExp([[1.0], [-1.0]], [0.0, 0.0])
    x = np.zeros(1)
    assert f.value(x) == pytest.approx(math.log(2.0), rel=1e-15)
    np.testing.assert_allclose(f.grad(x), fd_grad(f.value, x), atol=1e-6)
    # softmax weights (1/2, 1/2): variance of the slopes +-1 is 1
    np.testing.assert_allclose(f.hess(x), [[1.0]], atol=1e-12)
    np.testing.assert_allclose(f.hess(x), fd_hess(f.grad, x), atol=1e-6)


def test_power_of_norm_example():
    f = PowerOfNorm(np.zeros(2), 3, 1 / 3)
    x = np.array([1.0, 0.0])
    assert f.value(x) == pytest.approx(1 / 3, rel=1e-15)
    np.testing.assert_allclose(f.grad(x), [1.0, 0.0], rtol=1e-15)


def _components(rng, norm=None):
    n = 3
    M = rng.normal(size=(n, n))
    return [
        Quadratic(M @ M.T, rng.normal(size=n), 0.3),
        AffineLogSumExp(rng.normal(size=(4, n)), rng.normal(size=4)),
        PowerOfNorm(rng.normal(size=n), 3, 0.7, norm=norm),
        PowerOfNorm(rng.normal(size=n), 2, 1.3, norm=norm),
        Affine(rng.normal(size=n), 0.5),
        Sum([PowerOfNorm(np.zeros(n), 3, 1 / 3, norm=norm), Affine(np.ones(n), 0.0)]),
    ]


@pytest.mark.parametrize("idx", range(6))
@pytest.mark.parametrize("dense", [False, True])
def test_oracles_match_finite_differences(idx, dense):
    rng = np.random.default_rng(11)
    norm = NormOperator("dense", [[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]]) if dense else None
    comp = _components(rng, norm)[idx]
    for x in rng.normal(size=(100, 3)):
        g = comp.grad(x)
        np.testing.assert_allclose(g, fd_grad(comp.value, x), rtol=1e-6, atol=1e-6)
        H = comp.hess(x)
        np.testing.assert_allclose(H, H.T, atol=1e-14)
        np.testing.assert_allclose(H, fd_hess(comp.grad, x), rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("idx", range(6))
def test_batch_oracles_agree_with_pointwise(idx):
    rng = np.random.default_rng(5)
    comp = _components(rng)[idx]
    X = rng.normal(size=(20, 3))
    Hd = rng.normal(size=(20, 3))
    np.testing.assert_allclose(comp.values(X), [comp.value(x) for x in X], rtol=1e-13)
    np.testing.assert_allclose(comp.grads(X), [comp.grad(x) for x in X], rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(comp.hess_forms(X, Hd), [h @ comp.hess(x) @ h for x, h in zip(X, Hd)],
                               rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("idx", range(6))
@pytest.mark.parametrize("dense", [False, True])
def test_declared_constants_survive_sampling(idx, dense):
    rng = np.random.default_rng(3)
    norm = NormOperator("dense", [[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]]) if dense else \
        NormOperator.identity(3)
    comp = with_defaults(_components(rng, norm)[idx], norm)
    rep = check_constants(comp, samples=1000, seed=1, scale=1.0, norm=norm)
    assert rep.passed, rep.to_dict()


def test_power_constants_have_declared_ratio():
    # c = 1/3 gives sigma_3 = 1/2 and L_2 = 2; gamma_2 = 1/4 for every c
    for c in (1 / 3, 1.0, 2.5):
        comp = with_defaults(PowerOfNorm(np.zeros(2), 3, c))
        assert condition_number(comp, 2) == pytest.approx(0.25, rel=1e-15)
    comp = with_defaults(PowerOfNorm(np.zeros(2), 3, 1 / 3))
    assert comp.constants.sigma3 == pytest.approx(0.5)
    assert comp.constants.L2 == pytest.approx(2.0)


def test_taylor_model():
    rng = np.random.default_rng(0)
    q = with_defaults(Quadratic(np.diag([1.0, 3.0]), [0.5, -1.0], 2.0))
    lse = with_defaults(AffineLogSumExp([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.2]))
    f = VectorFunction([q, lse])
    x = rng.normal(size=2)
    for p in (1, 2):
        np.testing.assert_array_equal(taylor_eval(f.taylor(x, p), x), f.values(x))
    y = rng.normal(size=2)
    assert taylor_eval(f.taylor(x, 2), y)[0] == pytest.approx(q.value(y), rel=1e-14)


def test_taylor_lse_residual_example():
    f = with_defaults(AffineLogSumExp([[1.0], [-1.0]], [0.0, 0.0]))
    vf = VectorFunction([f])
    model = vf.taylor(np.zeros(1), 1)
    y = np.ones(1)
    assert taylor_eval(model, y)[0] == pytest.approx(math.log(2.0))
    true = math.log(math.e + 1 / math.e)
    assert true == pytest.approx(1.1269, abs=1e-4)
    assert abs(true - math.log(2.0)) <= f.constants.L1 / 2


@pytest.mark.parametrize(
    "comp, p, expected",
    [
        (Quadratic(np.eye(2)), 1, 1.0),
        (PowerOfNorm(np.zeros(2), 3, 1.0), 2, 0.25),
    ],
)
def test_condition_number_examples(comp, p, expected):
    assert condition_number(with_defaults(comp), p) == pytest.approx(expected)


def test_condition_number_errors():
    with pytest.raises(UndefinedConditionNumberError):
        condition_number(with_defaults(Affine([1.0, 0.0])), 1)
    bad = Quadratic(np.eye(2))
    bad.constants = Constants(L1=1.0, L2=0.0, sigma2=2.0, sigma3=0.0)
    with pytest.raises(InconsistentConstantsError):
        condition_number(bad, 1)


@pytest.mark.parametrize("alpha, expected", [(1.0, 1 / 3), (0.0, 1 / 2)])
def test_beta_examples(alpha, expected):
    assert beta(with_defaults(Quadratic(np.eye(2))), 1, alpha) == pytest.approx(expected, rel=1e-15)


def test_beta_vanishes_without_uniform_convexity():
    lse = with_defaults(AffineLogSumExp([[1.0, 0.0], [0.0, 1.0]]))
    assert beta(lse, 1, 1.0) == 0.0


def _quad_with_gamma(g):
    q = Quadratic(np.eye(2))
    q.constants = Constants(L1=1.0, L2=0.0, sigma2=g, sigma3=0.0)
    return q


def test_hat_beta():
    f = VectorFunction([_quad_with_gamma(1.0)])
    assert hat_beta(f, 1) == pytest.approx(1 / 3)
    f = VectorFunction([_quad_with_gamma(1.0), _quad_with_gamma(0.04)])
    assert hat_beta(f, 1) == pytest.approx(0.04 / (2 + 0.04), rel=1e-14)
    f = VectorFunction([_quad_with_gamma(1.0), with_defaults(AffineLogSumExp([[1.0, 0.0], [0.0, 1.0]]))])
    assert hat_beta(f, 1) == 0.0
    # affine components are left out of the minimum
    f = VectorFunction([_quad_with_gamma(1.0), with_defaults(Affine([1.0, 0.0]))])
    assert hat_beta(f, 1) == pytest.approx(1 / 3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.sampled_from([1, 2]), st.floats(0.0, 5.0))
def test_beta_monotone_in_gamma(g1, g2, p, alpha):
    lo, hi = sorted((g1, g2))
    lo, hi = lo / math.factorial(p), hi / math.factorial(p)

    def make(g):
        q = Quadratic(np.eye(2))
        q.constants = Constants(L1=1.0, L2=1.0, sigma2=g, sigma3=g)
        return q

    b_lo, b_hi = beta(make(lo), p, alpha), beta(make(hi), p, alpha)
    assert 0 <= b_lo <= b_hi < 1


def test_component_dict_round_trip():
    rng = np.random.default_rng(2)
    for comp in _components(rng):
        comp = with_defaults(comp)
        back = component_from_dict(comp.to_dict())
        x = rng.normal(size=3)
        assert back.value(x) == pytest.approx(comp.value(x), rel=1e-14)
        assert back.constants == comp.constants
