"""Regenerate the bundled problem files in src/fcopt/corpus/.

Run from the repository root: ``python3 scripts/build_corpus.py``.
Every optimum below is closed form (or a 1-D root found to machine
precision); tests/test_corpus.py cross-checks them by grid search or long
high-accuracy runs.
"""

import math
import os
import sys

import numpy as np
from scipy.optimize import brentq

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fcopt.methods import CompositeProblem  # noqa: E402
from fcopt.outer import OuterFunction, SimpleSet  # noqa: E402
from fcopt.problem_io import save_problem  # noqa: E402
from fcopt.smooth import (Affine, AffineLogSumExp, PowerOfNorm, Quadratic, Sum,  # noqa: E402
                          VectorFunction, default_constants)

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "fcopt", "corpus")

FIRST_ORDER = ["restricted", "full", "gm", "fgm"]


def quad_centered(center, scale=1.0):
    """scale/2 ||x - center||^2 as a Quadratic."""
    c = np.asarray(center, dtype=float)
    n = c.size
    return Quadratic(scale * np.eye(n), -scale * c, 0.5 * scale * c @ c)


def level_radius(phi, x_opt, level, rng, directions=1000, t_max=1e3):
    """max ||x - x*|| over {phi <= level} by bisection along random rays, +1%."""
    n = x_opt.size
    best = 0.0
    D = rng.normal(size=(directions, n))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    for d in D:
        lo, hi = 0.0, 1.0
        while phi(x_opt + hi * d) <= level and hi < t_max:
            lo, hi = hi, 2 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if phi(x_opt + mid * d) <= level:
                lo = mid
            else:
                hi = mid
        best = max(best, lo)
    return 1.01 * best


def finish(name, f, F, x0, x_opt, phi_star, analytic, methods, provenance, rng, d0=True):
    x0 = np.asarray(x0, dtype=float)
    x_opt = np.asarray(x_opt, dtype=float)
    prob = CompositeProblem(f, F, x0, known_opt=phi_star, x_opt=x_opt, name=name)
    diff = abs(prob.phi(x_opt) - phi_star)
    assert diff < 1e-12 * (1 + abs(phi_star)), (name, prob.phi(x_opt), phi_star)
    prob.R = float(np.linalg.norm(x_opt - x0))
    if d0:
        prob.D0 = level_radius(prob.phi, x_opt, prob.phi(x0), rng)
    if F.Q.bounded:
        prob.diameter = F.Q.diameter()
    prob.metadata = {"analytic_opt": analytic, "applicable_methods": methods,
                     "provenance": provenance}
    save_problem(prob, os.path.join(OUT, name + ".json"))
    print(f"{name}: phi* = {phi_star:.12g}, D0 = {prob.D0}, diameter = {prob.diameter}")


def with_constants(comps, norm=None):
    for c in comps:
        c.constants = default_constants(c, norm)
    return VectorFunction(comps, norm)


def main():
    rng = np.random.default_rng(20240601)
    os.makedirs(OUT, exist_ok=True)

    # (a) unconstrained strongly convex quadratic
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -1.0])
    x_opt = np.linalg.solve(A, b)
    f = with_constants([Quadratic(A, -b, 0.0)])
    finish("a_quadratic", f, OuterFunction("AdditiveComposite", 1, SimpleSet.all()),
           [2.0, 2.0], x_opt, float(-0.5 * b @ x_opt), "x* = A^{-1} b, phi* = -b^T A^{-1} b / 2",
           FIRST_ORDER, "unconstrained strongly convex quadratic", rng)

    # (b) quadratic objective with two active affine constraints at a vertex
    f = with_constants([quad_centered([2.0, 2.0]), Affine([1.0, 2.0], -2.0),
                        Affine([2.0, 1.0], -2.0)])
    finish("b_affine_constrained_quadratic", f, OuterFunction("ConstraintForm", 3, SimpleSet.all()),
           [0.0, 0.0], [2 / 3, 2 / 3], 16 / 9,
           "x* = (2/3, 2/3), multipliers (4/9, 4/9), phi* = 16/9", FIRST_ORDER,
           "functional constraints, KKT solved by hand", rng)

    # (c) one-dimensional: minimize x subject to x^2 - 1 <= 0
    f = with_constants([Affine([1.0], 0.0), Quadratic([[2.0]], [0.0], -1.0)])
    finish("c_dual1_1d", f, OuterFunction("ConstraintForm", 2, SimpleSet.all()),
           [0.0], [-1.0], -1.0, "x* = -1, phi* = -1 (feasible set [-1, 1])",
           ["restricted", "full"], "1-D instance with quadratic constraint", rng)

    # (d) max of three quadratics centered on an equilateral triangle
    centers = [np.array([math.cos(t), math.sin(t)]) for t in (0, 2 * math.pi / 3, 4 * math.pi / 3)]
    f = with_constants([quad_centered(c) for c in centers])
    finish("d_max_quadratics", f, OuterFunction("MaxForm", 3, SimpleSet.all()),
           [1.5, 1.0], [0.0, 0.0], 0.5, "x* = circumcenter 0, phi* = 1/2",
           FIRST_ORDER, "max-type composite of strongly convex quadratics", rng)

    # (e) log-sum-exp of five affine pieces with symmetric slopes
    rows = np.array([[math.cos(2 * math.pi * j / 5), math.sin(2 * math.pi * j / 5)] for j in range(5)])
    f = with_constants([AffineLogSumExp(rows, np.zeros(5))])
    finish("e_lse_affine", f, OuterFunction("AdditiveComposite", 1, SimpleSet.all()),
           [1.0, 0.5], [0.0, 0.0], math.log(5.0), "x* = 0 by symmetry, phi* = ln 5",
           ["full", "gm", "fgm", "cubic", "contr-prox"], "smooth log-sum-exp", rng)

    # (f) box-constrained log-sum-exp
    rows = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    f = with_constants([AffineLogSumExp(rows, np.zeros(3))])
    Q = SimpleSet.box([-1.0, -1.0], [1.0, 1.0])
    finish("f_box_lse", f, OuterFunction("AdditiveComposite", 1, Q),
           [0.8, 0.9], [0.0, -1.0], math.log(2 + math.exp(-1.0)),
           "x* = (0, -1), phi* = ln(2 + e^{-1})",
           ["full", "gm", "fgm", "cgm", "cubic", "contr-newton", "contr-prox"],
           "log-sum-exp over a box", rng)

    # (g) max of a quadratic and a cubic power of the norm (uniformly convex)
    c1, c2 = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    t = brentq(lambda s: 0.5 * (1 - s) ** 2 - (1 + s) ** 3 / 3, -1.0, 1.0, xtol=1e-16)
    f = with_constants([quad_centered(c1), PowerOfNorm(c2, 3, 1 / 3)])
    finish("g_max_quadratic_power", f, OuterFunction("MaxForm", 2, SimpleSet.all()),
           [0.5, 1.0], [t, 0.0], 0.5 * (1 - t) ** 2,
           "x* = (t, 0) with (1 - t)^2 / 2 = (1 + t)^3 / 3, phi* = (1 - t)^2 / 2",
           ["restricted", "full", "cubic", "contr-prox"],
           "uniformly convex max of quadratic and cubic norm power", rng)

    # (h) rank-deficient convex quadratic, target in the range
    M = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 2.0, 1.0]])
    x_opt = np.array([1.0, -1.0, 0.5])
    r = M @ x_opt
    f = with_constants([Quadratic(M.T @ M, -M.T @ r, 0.5 * r @ r)])
    finish("h_rank_deficient_quadratic", f, OuterFunction("AdditiveComposite", 1, SimpleSet.all()),
           [1.0, 1.0, 1.0], x_opt, 0.0, "phi* = 0 (target in range of M); minimizers form a line",
           ["full", "gm", "fgm"], "merely convex quadratic for the regularization pipeline",
           rng, d0=False)

    # (i) log-sum-exp over the unit ball
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    f = with_constants([AffineLogSumExp(rows, np.zeros(2))])
    Q = SimpleSet.ball([0.0, 0.0], 1.0)
    s = 1 / math.sqrt(2)
    finish("i_ball_lse", f, OuterFunction("AdditiveComposite", 1, Q),
           [0.5, 0.0], [-s, -s], math.log(2.0) - s, "x* = -(1, 1)/sqrt 2, phi* = ln 2 - 1/sqrt 2",
           ["full", "gm", "fgm", "cgm", "cubic", "contr-newton", "contr-prox"],
           "log-sum-exp over a Euclidean ball", rng)

    # (j) quadratic over a box with the unconstrained minimizer outside
    f = with_constants([quad_centered([2.0, -0.5])])
    Q = SimpleSet.box([0.0, 0.0], [1.0, 1.0])
    finish("j_box_quadratic", f, OuterFunction("AdditiveComposite", 1, Q),
           [0.2, 0.7], [1.0, 0.0], 0.625, "x* = (1, 0), phi* = 5/8",
           ["restricted", "full", "gm", "fgm", "cgm", "contr-newton"],
           "projection-type quadratic over a box", rng)

    # (k) log-sum-exp outer function of three quadratics
    f = with_constants([quad_centered(c) for c in centers])
    finish("k_lse_of_quadratics", f, OuterFunction("LogSumExpForm", 3, SimpleSet.all()),
           [1.0, -1.0], [0.0, 0.0], math.log(3.0) + 0.5, "x* = 0 by symmetry, phi* = ln 3 + 1/2",
           ["restricted", "full", "gm", "fgm"], "functional composite with a smooth outer function",
           rng)

    # (l) cubic norm power plus a linear term
    a = np.array([0.6, -0.8]) * 2.0
    na = float(np.linalg.norm(a))
    p3 = PowerOfNorm(np.zeros(2), 3, 1 / 3)
    p3.constants = default_constants(p3)
    lin = Affine(a, 0.0)
    lin.constants = default_constants(lin)
    f = with_constants([Sum([p3, lin])])
    finish("l_cubic_power", f, OuterFunction("AdditiveComposite", 1, SimpleSet.all()),
           [1.0, 1.0], -a / math.sqrt(na), -2 / 3 * na ** 1.5,
           "x* = -a / sqrt|a|, phi* = -(2/3)|a|^{3/2}",
           ["restricted", "full", "cubic", "contr-prox"], "uniformly convex of degree three", rng)


if __name__ == "__main__":
    main()
