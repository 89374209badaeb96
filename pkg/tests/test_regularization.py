import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcopt.corpus import corpus_get
from fcopt.errors import ConfigError, DomainError
from fcopt.methods import CompositeProblem, MethodConfig, run_full_basic
from fcopt.outer import OuterFunction, SimpleSet
from fcopt.regularization import (build_regularizer, choose_mu, regularize,
                                  regularized_condition_number, solve_via_regularization,
                                  xi_measure)
from fcopt.smooth import Affine, AffineLogSumExp, Quadratic, VectorFunction, default_constants, hat_beta
from fcopt.verify import check_constants


def _vf(comps, norm=None):
    for c in comps:
        c.constants = default_constants(c, norm)
    return VectorFunction(comps, norm)


def lse_problem(n=3, m=2, seed=0, kind="MaxForm"):
    rng = np.random.default_rng(seed)
    comps = [AffineLogSumExp(rng.normal(size=(4, n)), rng.normal(size=4)) for _ in range(m)]
    return CompositeProblem(_vf(comps), OuterFunction(kind, m, SimpleSet.all()), rng.normal(size=n))


@pytest.mark.parametrize("p", [1, 2])
def test_regularizer_touches_and_majorizes(p):
    problem = lse_problem()
    reg = build_regularizer(problem, p)
    x0 = problem.x0
    np.testing.assert_array_equal(reg.values(x0), problem.f.values(x0))
    rng = np.random.default_rng(1)
    X = x0 + rng.normal(scale=2.0, size=(1000, 3))
    for x in X:
        assert np.all(reg.values(x) >= problem.f.values(x))
    # d - f is convex: midpoint test on each component
    for x, y in zip(X[:500], X[500:]):
        mid = reg.gap_terms(0.5 * (x + y))
        assert np.all(mid <= 0.5 * (reg.gap_terms(x) + reg.gap_terms(y)) + 1e-12)


def test_regularizer_constant_examples():
    f1 = Quadratic(np.eye(2))
    problem = CompositeProblem(_vf([f1]), OuterFunction("AdditiveComposite", 1, SimpleSet.all()),
                               [1.0, 1.0])
    reg = build_regularizer(problem, 1)
    for mu in (0.1, 0.5, 1.0):
        assert reg.mixed(mu).components[0].constants.sigma2 >= mu * 1.0
    lse = lse_problem(m=1, kind="AdditiveComposite")
    reg2 = build_regularizer(lse, 2, c=[1.0])
    base = lse.f.components[0].constants.L2
    assert reg2.component_constants(0).L2 == pytest.approx(base + 2.0)


def test_regularizer_needs_positive_constants():
    comps = [Quadratic(np.eye(2)), Affine([1.0, 1.0], -1.0)]
    problem = CompositeProblem(_vf(comps), OuterFunction("ConstraintForm", 2, SimpleSet.all()),
                               [0.0, 0.0])
    with pytest.raises(ConfigError):
        build_regularizer(problem, 1)
    assert build_regularizer(problem, 1, c=[1.0, 0.5]).c.tolist() == [1.0, 0.5]
    with pytest.raises(ConfigError):
        build_regularizer(problem, 1, c=[1.0, 0.0])


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("mu", [0.05, 1.0])
def test_mixed_constants_survive_sampling(p, mu):
    problem = lse_problem()
    rp = regularize(problem, build_regularizer(problem, p), mu)
    for comp in rp.problem.f.components:
        rep = check_constants(comp, samples=1000, seed=2, norm=problem.norm)
        assert rep.passed, rep.to_dict()


@pytest.mark.parametrize("entry", ["d", "e", "k"])
def test_regularized_upper_bound(entry):
    problem = corpus_get(entry).problem
    rp = regularize(problem, build_regularizer(problem, 1), 0.3)
    x0 = problem.x0
    assert rp.phi_mu(x0) == problem.phi(x0)
    rng = np.random.default_rng(3)
    for x in x0 + rng.normal(scale=2.0, size=(1000, problem.n)):
        assert problem.phi(x) <= rp.phi_mu(x) + 1e-12


# p = 2, mu = 1: (1 + p) 2^{p-1} (1/(mu p!) + 1) = 3 * 2 * 1.5 = 9, so beta = 1/(1 + 3)
@pytest.mark.parametrize("mu, p, expected", [(1.0, 1, 1 / 5), (1.0, 2, 1 / 4),
                                             (0.0, 1, 0.0), (0.0, 2, 0.0)])
def test_condition_number_examples(mu, p, expected):
    assert regularized_condition_number(mu, p) == pytest.approx(expected, rel=1e-15)


def test_condition_number_vanishes_with_mu():
    vals = [regularized_condition_number(10.0 ** -k, 1) for k in range(1, 12)]
    assert all(b > a for a, b in zip(vals[1:], vals[:-1]))
    assert vals[-1] < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1.0), st.sampled_from([1, 2]), st.integers(0, 2 ** 16))
def test_closed_form_matches_generic_hat_beta(mu, p, seed):
    problem = lse_problem(seed=seed)
    rp = regularize(problem, build_regularizer(problem, p), mu)
    assert hat_beta(rp.problem.f, p) == pytest.approx(regularized_condition_number(mu, p),
                                                      rel=1e-12, abs=1e-15)


def _constraint_pair():
    comps = [Affine([0.0], 0.0), Affine([0.0], -1.0)]
    return CompositeProblem(_vf(comps), OuterFunction("ConstraintForm", 2, SimpleSet.all()), [0.0])


def test_xi_constraint_example():
    problem = _constraint_pair()
    xi = xi_measure(problem, np.zeros(1), np.array([0.0, 2.0]), 1.0)
    # the indicator accepts u <= 1e-9, which moves the threshold to 2 / (1 + 1e-9)
    assert xi == pytest.approx(2.0 / (1 + 1e-9), rel=1e-12)
    # the defining condition fails just below and holds at the returned value
    fx = problem.f.values(np.zeros(1))
    assert problem.F.eval(np.zeros(1), fx + np.array([0.0, 2.0]) / (xi * (1 - 1e-9))) == math.inf
    assert problem.F.eval(np.zeros(1), fx + np.array([0.0, 2.0]) / xi) <= 1.0


def test_xi_zero_direction_returns_lower_bracket():
    problem = _constraint_pair()
    assert xi_measure(problem, np.zeros(1), np.zeros(2), 1.0) == 1e-12


@pytest.mark.parametrize("g, A", [(0.5, 2.0), (3.0, 1.0), (1e-3, 0.75)])
def test_xi_additive_closed_form(g, A):
    problem = CompositeProblem(_vf([Quadratic(np.eye(2))]),
                               OuterFunction("AdditiveComposite", 1, SimpleSet.all()), [0.5, 0.5])
    x = np.array([0.5, 0.5])
    assert xi_measure(problem, x, np.array([g]), A) == pytest.approx(g / (A - problem.phi(x)),
                                                                     rel=1e-12)


def test_xi_requires_phi_below_level():
    problem = _constraint_pair()
    with pytest.raises(DomainError):
        xi_measure(problem, np.zeros(1), np.ones(2), 0.0)
    with pytest.raises(ConfigError):
        xi_measure(problem, np.zeros(1), -np.ones(2), 1.0)


@pytest.mark.parametrize("entry", ["b", "d", "k"])
def test_xi_under_contraction(entry):
    problem = corpus_get(entry).problem
    rng = np.random.default_rng(5)
    x0 = problem.x0
    A = problem.phi(x0) + 1.0
    checked = 0
    for _ in range(200):
        xb = x0 + rng.normal(size=problem.n)
        if not problem.phi(xb) <= A:
            continue
        g = rng.uniform(0.0, 1.0, size=problem.m)
        xi0 = xi_measure(problem, x0, g, A)
        for tau in np.arange(1, 10) / 10:
            xt = (1 - tau) * x0 + tau * xb
            assert xi_measure(problem, xt, g, A) <= xi0 / (1 - tau) + 1e-6
        checked += 1
    assert checked >= 20


@pytest.mark.parametrize("delta, xi0, expected", [(0.1, 1.0, 0.01), (1.0, 1.0, 1.0),
                                                  (3.0, 0.5, 1.0), (1e-8, 1.0, 1e-16)])
def test_choose_mu(delta, xi0, expected):
    assert choose_mu(None, delta, xi0) == pytest.approx(expected, rel=1e-15)


def test_choose_mu_rejects_bad_estimate():
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(ConfigError):
            choose_mu(None, 0.1, bad)


def test_solve_on_rank_deficient_quadratic():
    problem = corpus_get("h").problem
    tr = solve_via_regularization(problem, 1, 1e-3)
    assert tr.status == "ok" and tr.info["certified"]
    assert tr.phi[-1] - problem.known_opt <= 1e-3
    rp = tr.info["regularized"]
    for x, pm in zip(tr.iterates, tr.extras["phi_mu"]):
        assert pm == rp.phi_mu(x)
        assert problem.phi(x) <= pm + 1e-12
    assert tr.extras["phi_mu"][0] == problem.phi(problem.x0)


def test_solve_on_affine_constrained_instance():
    problem = corpus_get("b").problem
    tr = solve_via_regularization(problem, 1, 1e-3, c=[1.0, 1.0, 1.0])
    rp = tr.info["regularized"]
    for x in tr.iterates:
        assert problem.phi(x) <= rp.phi_mu(x) + 1e-12
    assert tr.phi[-1] - problem.known_opt <= 1e-3


def test_mu_zero_is_plain_full_step():
    problem = corpus_get("e").problem
    tr = solve_via_regularization(problem, 1, 1e-3, iters=50, mu=0)
    ref = run_full_basic(problem, MethodConfig(method="full", iters=50))
    np.testing.assert_array_equal(tr.phi, ref.phi)
