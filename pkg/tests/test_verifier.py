import math

import numpy as np
import pytest

from fcopt.corpus import corpus_get
from fcopt.errors import ConfigError
from fcopt.methods import MethodConfig, run_method
from fcopt.outer import OuterFunction, SimpleSet
from fcopt.smooth import (AffineLogSumExp, PowerOfNorm, Quadratic, VectorFunction, beta,
                          default_constants, hat_beta)
from fcopt.verify import (check_rate, check_remark_convexity, check_subhomo_equivalence,
                          check_theorem_main, check_vector_growth)

SEEDS = [1, 2, 3]


def with_defaults(comp):
    comp.constants = default_constants(comp)
    return comp


def quad():
    return with_defaults(Quadratic(np.array([[2.0, 0.5], [0.5, 1.0]]), [0.3, -0.2], 0.1))


def power():
    return with_defaults(PowerOfNorm(np.array([0.5, -1.0]), 3, 1 / 3))


def lse():
    return with_defaults(AffineLogSumExp([[1.0, 0.2], [-0.4, 1.0], [0.0, -1.0]], [0.0, 0.3, -0.1]))


THEOREM_CASES = [("quad", 1, 1.0), ("quad", 1, 3.0), ("power", 2, 2.0), ("power", 2, 5.0),
                 ("lse", 1, 1.0), ("lse", 2, 2.0)]
MAKERS = {"quad": quad, "power": power, "lse": lse}


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("name, p, alpha", THEOREM_CASES)
def test_theorem_main_holds(name, p, alpha, seed):
    rep = check_theorem_main(MAKERS[name](), p, alpha, samples=10000, seed=seed)
    assert rep.passed and rep.samples == 10000, rep.to_dict()


def test_theorem_main_quadratic_example():
    # f = 1/2||x||^2, p = 1, alpha = 1: beta_1 = 1/3 and the function form is
    # f(y) - f(x) - <x, y - x> = 1/2 r^2 >= (1/3)/2 r^2
    comp = with_defaults(Quadratic(np.eye(2)))
    assert beta(comp, 1, 1.0) == pytest.approx(1 / 3)
    rep = check_theorem_main(comp, 1, 1.0, samples=2000, seed=0)
    assert rep.passed
    # the slack is never needed: the worst case stays well below zero
    assert rep.max_violation < -1e-9


def test_theorem_main_beta_zero_is_convexity():
    rep = check_theorem_main(lse(), 1, 1.0, samples=5000, seed=4, beta=0.0)
    assert rep.passed


def _function_form_gap(comp, x, y, p, alpha, b):
    """Direct pointwise evaluation of f(y) - right-hand side."""
    h = y - x
    r = np.linalg.norm(h)
    L = comp.constants.L(p)
    rhs = comp.value(x) + comp.grad(x) @ h
    if p == 2:
        rhs += 0.5 * b * h @ comp.hess(x) @ h
    rhs += alpha * L * b ** p / math.factorial(p + 1) * r ** (p + 1)
    return comp.value(y) - rhs


@pytest.mark.parametrize("name, p, alpha, planted", [("quad", 1, 1.0, 1.5), ("power", 2, 2.0, 0.95)])
def test_planted_beta_is_caught_and_witness_refails(name, p, alpha, planted):
    comp = MAKERS[name]()
    rep = check_theorem_main(comp, p, alpha, samples=10000, seed=1, beta=planted)
    assert not rep.passed and rep.max_violation > 0
    w = rep.witness
    x, y, b = np.array(w["x"]), np.array(w["y"]), float(w["beta"])
    gap = _function_form_gap(comp, x, y, p, alpha, b)
    h = y - x
    glhs = (comp.grad(y) - comp.grad(x)) @ h
    grhs = alpha * comp.constants.L(p) * b ** p / math.factorial(p) * np.linalg.norm(h) ** (p + 1)
    if p == 2:
        grhs += b * h @ comp.hess(x) @ h
    assert gap < 0 or glhs < grhs
    # the same seed reproduces the same report
    again = check_theorem_main(comp, p, alpha, samples=10000, seed=1, beta=planted)
    assert again.to_dict() == rep.to_dict()


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("name, p, alpha", [("quad", 1, 1.0), ("power", 2, 2.0), ("power", 2, 4.0),
                                            ("lse", 1, 1.0), ("lse", 2, 3.0)])
def test_remark_convexity(name, p, alpha, seed):
    rep = check_remark_convexity(MAKERS[name](), p, alpha, samples=10000, seed=seed)
    assert rep.passed, rep.to_dict()


def test_remark_convexity_needs_alpha_at_least_p():
    with pytest.raises(ConfigError):
        check_remark_convexity(power(), 2, 1.0, samples=10)


def mixed_vf():
    return VectorFunction([quad(), with_defaults(Quadratic(np.eye(2) * 0.2, [1.0, 0.0])), lse()])


def power_vf():
    return VectorFunction([power(), with_defaults(PowerOfNorm(np.zeros(2), 3, 1.0)), lse()])


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("make, p", [(mixed_vf, 1), (power_vf, 2)])
def test_vector_growth(make, p, seed):
    f = make()
    # the LSE component is merely convex, so the whole vector only admits beta = 0
    assert hat_beta(f, p) == 0.0
    rep = check_vector_growth(f, p, samples=10000, seed=seed)
    assert rep.passed, rep.to_dict()


@pytest.mark.parametrize("seed", SEEDS)
def test_vector_growth_uniformly_convex_pair(seed):
    f = VectorFunction([quad(), with_defaults(Quadratic(np.eye(2) * 0.2, [1.0, 0.0]))])
    hb = hat_beta(f, 1)
    assert hb > 0
    assert check_vector_growth(f, 1, beta=hb, samples=10000, seed=seed).passed
    assert check_vector_growth(f, 1, beta=0.5 * hb, samples=10000, seed=seed).passed


def test_vector_growth_detects_beta_above_hat_beta():
    # for 1/2||x||^2 the function form reads r^2/2 >= beta r^2/2, so every beta > 1 fails;
    # hat_beta = 1/3 sits well inside the safe range
    f = VectorFunction([with_defaults(Quadratic(np.diag([1.0, 1.0])))])
    hb = hat_beta(f, 1)
    assert hb == pytest.approx(1 / 3)
    rep = check_vector_growth(f, 1, beta=1.0 + 0.05, samples=10000, seed=1)
    assert not rep.passed
    assert rep.details["violations_per_component"][0] > 0


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("kind, m", [("MaxForm", 3), ("LogSumExpForm", 3), ("AdditiveComposite", 1),
                                     ("ConstraintForm", 3)])
def test_subhomogeneous_equivalence(kind, m, seed):
    F = OuterFunction(kind, m, SimpleSet.all())
    rep = check_subhomo_equivalence(F, samples=10000, seed=seed)
    assert rep.passed, rep.to_dict()
    assert rep.details["agree"] and all(rep.details["conditions"].values())


@pytest.mark.parametrize("seed", SEEDS)
def test_counterexample_fails_all_conditions(seed):
    F = OuterFunction("SquaredHinge", 1, SimpleSet.all())
    rep = check_subhomo_equivalence(F, samples=10000, seed=seed)
    assert not rep.passed
    assert rep.details["agree"] and not any(rep.details["conditions"].values())
    u, v, t = float(rep.witness["u"][0]), float(rep.witness["v"][0]), float(rep.witness["t"])
    # the worst sample violates the ray or the scaling condition on its own
    Fu = lambda s: max(s, 0.0) ** 2
    assert Fu(u + t * v) > Fu(u) + t * Fu(v) or Fu(float(rep.witness["gamma"]) * u) > \
        float(rep.witness["gamma"]) * Fu(u)


def test_check_rate_examples():
    problem = corpus_get("a").problem
    tr = run_method(problem, MethodConfig(method="full", iters=30))
    assert check_rate(tr).status == "pass"
    tr = run_method(corpus_get("e").problem, MethodConfig(method="fgm", iters=100))
    rep = check_rate(tr)
    assert rep.passed and rep.details["rows_checked"] == 100
    tr = run_method(corpus_get("f").problem, MethodConfig(method="cgm", iters=1))
    p = corpus_get("f").problem
    assert tr.bound[1] == 4 * p.F_L(1) * p.domain_diameter() ** 2


def test_check_rate_detects_violation_and_reports_missing_optimum():
    problem = corpus_get("a").problem
    tr = run_method(problem, MethodConfig(method="gm", iters=10))
    # a wrong optimal value far below the true one makes every gap exceed its bound
    offset = 10.0 * np.nanmax(tr.bound)
    rep = check_rate(tr, phi_star=problem.known_opt - offset)
    assert not rep.passed and rep.max_violation > 0
    # the worst row is the last one, where the bound is smallest
    assert rep.witness["k"] == 10
    tr.phi_star = None
    assert check_rate(tr).status == "inconclusive"
