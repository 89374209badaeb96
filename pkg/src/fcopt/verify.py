"""Sampled checks of the inequalities behind the methods.

Every check draws its samples from ``numpy.random.default_rng(seed)``, so a
failing report can be reproduced exactly from the seed; the worst sample
is stored as the witness.
"""

import math

import numpy as np

from .errors import ConfigError
from .report import CheckReport, from_violations
from .smooth import beta as beta_fn
from .smooth import hat_beta

__all__ = ["check_theorem_main", "check_remark_convexity", "check_subhomo_equivalence",
           "check_vector_growth", "check_rate", "check_constants", "sample_pairs"]


def sample_pairs(rng, n, samples, scale=1.0, center=None):
    """Pairs (x, y) with x ~ N(center, scale^2) and ||y - x|| spread over
    several orders of magnitude."""
    center = np.zeros(n) if center is None else center
    X = center + rng.normal(scale=scale, size=(samples, n))
    D = rng.normal(size=(samples, n)) * (scale * np.exp(rng.uniform(-3.0, 1.0, size=samples)))[:, None]
    return X, X + D


def _betas(rng, samples, top):
    """beta in [0, top]; a quarter of the samples sit at the endpoint."""
    b = rng.uniform(0.0, top, size=samples)
    b[: max(1, samples // 4)] = top
    return b


def _norms(norm, H):
    if norm is None:
        return np.sqrt(np.einsum("ij,ij->i", H, H))
    return norm.norms(H)


def _growth_terms(comp, X, Y, p, coef_l, beta, norm=None):
    """Both sides of the gradient and function growth inequalities.

    Returns (grad_lhs, grad_rhs, fun_lhs, fun_rhs, r) with
    ``coef_l = c L_p / p!`` multiplying ||h||^{p+1} in the gradient form.
    """
    H = Y - X
    r = _norms(norm, H)
    gx, gy = comp.grads(X), comp.grads(Y)
    fx, fy = comp.values(X), comp.values(Y)
    glhs = np.einsum("ij,ij->i", gy - gx, H)
    flhs = fy
    frhs = fx + np.einsum("ij,ij->i", gx, H)
    grhs = coef_l * beta ** p * r ** (p + 1)
    frhs = frhs + coef_l * beta ** p * r ** (p + 1) / (p + 1)
    if p == 2:
        d2 = comp.hess_forms(X, H)
        grhs = grhs + beta * d2
        frhs = frhs + 0.5 * beta * d2
    return glhs, grhs, flhs, frhs, r


def check_theorem_main(component, p, alpha, samples=10000, seed=0, scale=1.0, norm=None,
                       beta=None):
    """Gradient and function growth inequalities with beta in [0, beta_p(f, alpha)].

    ``beta`` overrides the sampled range's upper end (used to plant
    violations).
    """
    L = component.constants.L(p)
    if not np.isfinite(L):
        raise ConfigError(f"theorem check needs L_{p} < inf")
    if beta is not None:
        top = float(beta)
    elif L == 0:
        top = 1.0  # both inequalities reduce to plain convexity of the p-th order model
    else:
        top = beta_fn(component, p, alpha)
    rng = np.random.default_rng(seed)
    X, Y = sample_pairs(rng, component.n, samples, scale)
    B = _betas(rng, samples, top)
    coef = alpha * L / math.factorial(p)
    glhs, grhs, flhs, frhs, r = _growth_terms(component, X, Y, p, coef, B, norm)
    slack = 1e-8 * (1 + r ** (p + 1))
    scale_f = 1e-12 * (np.abs(flhs) + np.abs(frhs))
    vg = grhs - glhs - slack
    vf = frhs - flhs - slack - scale_f
    rep = from_violations(f"theorem_main[p={p},alpha={alpha}]", np.maximum(vg, vf),
                          {"x": X, "y": Y, "beta": B})
    rep.details = {"beta_max": top, "gradient_violations": int(np.sum(vg > 0)),
                   "function_violations": int(np.sum(vf > 0)), "kind": component.kind}
    return rep


def check_remark_convexity(component, p, alpha, samples=10000, seed=0, scale=1.0, norm=None):
    """Midpoint convexity in y of the right-hand side of the function growth
    inequality, for alpha >= p."""
    if alpha < p:
        raise ConfigError("the convexity remark needs alpha >= p")
    L = component.constants.L(p)
    if not np.isfinite(L):
        raise ConfigError(f"convexity check needs L_{p} < inf")
    rng = np.random.default_rng(seed)
    X, Y1 = sample_pairs(rng, component.n, samples, scale)
    _, Y2 = sample_pairs(rng, component.n, samples, scale)
    B = _betas(rng, samples, beta_fn(component, p, alpha) if L > 0 else 1.0)
    coef = alpha * L / math.factorial(p)

    def rhs(Y):
        return _growth_terms(component, X, Y, p, coef, B, norm)[3]

    Ym = 0.5 * (Y1 + Y2)
    r1, r2, rm = rhs(Y1), rhs(Y2), rhs(Ym)
    viol = rm - 0.5 * (r1 + r2) - 1e-9 * (1 + np.abs(r1) + np.abs(r2))
    return from_violations(f"remark_convexity[p={p},alpha={alpha}]", viol,
                           {"x": X, "y1": Y1, "y2": Y2, "beta": B})


def check_subhomo_equivalence(F, samples=10000, seed=0, scale=2.0):
    """Test the scaling definition and the three equivalent conditions
    on common samples of the u-part of F.

    The report passes iff every condition holds; ``details`` lists the
    per-condition outcome and whether the four agree.
    """
    rng = np.random.default_rng(seed)
    m = F.m
    U = rng.normal(scale=scale, size=(samples, m))
    V = rng.normal(scale=scale, size=(samples, m))
    T = rng.exponential(2.0, size=samples)
    Gam = 1.0 + rng.exponential(2.0, size=samples)
    # deterministic probes: u = v = 2 * ones, t = 1, gamma = 2
    U[0], V[0], T[0], Gam[0] = 2.0, 2.0, 1.0, 2.0
    if F.kind == "ConstraintForm" and m > 1:
        U[:, 1:] = -np.abs(U[:, 1:])
        V[:, 1:] = -np.abs(V[:, 1:])
    fu, fv = F.eval_u(U), F.eval_u(V)
    tol = 1e-9

    def viol(lhs, rhs, valid):
        with np.errstate(invalid="ignore"):
            v = lhs - rhs - tol * (1 + np.abs(rhs))
        return np.where(valid, v, -np.inf)

    fgu = F.eval_u(Gam[:, None] * U)
    v_def = viol(fgu, Gam * fu, np.isfinite(fu) & np.isfinite(fgu))
    gu, gv = F.grad_u(U), F.grad_u(V)
    v1 = viol(np.einsum("ij,ij->i", gu, U), fu, np.isfinite(fu))
    v2 = viol(np.einsum("ij,ij->i", gv, U), fu, np.isfinite(fu) & np.isfinite(fv))
    W = U + T[:, None] * V
    fw = F.eval_u(W)
    v3 = viol(fw, fu + T * fv, np.isfinite(fu) & np.isfinite(fv) & np.isfinite(fw))
    conds = {"scaling": v_def, "gradient_at_point": v1, "gradient_anywhere": v2, "ray": v3}
    outcome = {k: bool(np.all(v <= 0)) for k, v in conds.items()}
    worst = np.max(np.vstack(list(conds.values())), axis=0)
    rep = from_violations("subhomogeneous", worst,
                          {"u": U, "v": V, "t": T, "gamma": Gam})
    rep.details = {"kind": F.kind, "conditions": outcome,
                   "agree": len(set(outcome.values())) == 1,
                   "claimed": F.subhomogeneous}
    return rep


def check_vector_growth(f, p, beta=None, samples=10000, seed=0, scale=1.0):
    """Component-wise growth inequality with alpha = p and beta <= hat_beta."""
    b = hat_beta(f, p) if beta is None else float(beta)
    rng = np.random.default_rng(seed)
    X, Y = sample_pairs(rng, f.n, samples, scale)
    worst = np.full(samples, -np.inf)
    per = []
    for comp in f.components:
        L = comp.constants.L(p)
        if not np.isfinite(L):
            if b > 0:
                raise ConfigError("vector growth with beta > 0 needs finite L_p")
            L = 0.0
        coef = p * L / math.factorial(p)
        _, _, flhs, frhs, r = _growth_terms(comp, X, Y, p, coef, np.full(samples, b), f.norm)
        v = frhs - flhs - 1e-8 * (1 + r ** (p + 1)) - 1e-12 * (np.abs(flhs) + np.abs(frhs))
        per.append(int(np.sum(v > 0)))
        worst = np.maximum(worst, v)
    rep = from_violations(f"vector_growth[p={p}]", worst, {"x": X, "y": Y})
    rep.details = {"beta": b, "hat_beta": hat_beta(f, p), "violations_per_component": per}
    return rep


def check_constants(component, samples=2000, seed=0, scale=1.0, norm=None):
    """Falsification of declared constants: Taylor residual bounds for
    p = 1, 2, uniform convexity for degrees 2, 3, and finite-difference
    agreement of the gradient oracle."""
    rng = np.random.default_rng(seed)
    X, Y = sample_pairs(rng, component.n, samples, scale)
    H = Y - X
    r = _norms(norm, H)
    c = component.constants
    fx, fy = component.values(X), component.values(Y)
    gx, gy = component.grads(X), component.grads(Y)
    lin = fx + np.einsum("ij,ij->i", gx, H)
    rounding = 1e-12 * (np.abs(fx) + np.abs(fy) + 1)
    parts = {}
    if np.isfinite(c.L1):
        parts["taylor1"] = np.abs(fy - lin) - c.L1 / 2 * r ** 2 - 1e-9 - rounding
    if np.isfinite(c.L2):
        quad = lin + 0.5 * component.hess_forms(X, H)
        parts["taylor2"] = np.abs(fy - quad) - c.L2 / 6 * r ** 3 - 1e-9 - rounding
    mono = np.einsum("ij,ij->i", gy - gx, H)
    parts["uc2"] = c.sigma2 * r ** 2 - mono - 1e-9 - 1e-12 * np.abs(mono)
    parts["uc3"] = c.sigma3 * r ** 3 - mono - 1e-9 - 1e-12 * np.abs(mono)
    # central differences of the value along random directions
    eps = 1e-5
    Dirs = rng.normal(size=X.shape)
    fd = (component.values(X + eps * Dirs) - component.values(X - eps * Dirs)) / (2 * eps)
    an = np.einsum("ij,ij->i", gx, Dirs)
    parts["gradient_fd"] = np.abs(fd - an) - 1e-6 * (1 + np.abs(an))
    worst = np.max(np.vstack(list(parts.values())), axis=0)
    rep = from_violations(f"constants[{component.kind}]", worst, {"x": X, "y": Y})
    rep.details = {k: int(np.sum(v > 0)) for k, v in parts.items()}
    for k in ("L1", "L2", "sigma2", "sigma3"):
        rep.details[k] = getattr(c, k)
    return rep


def check_rate(trace, phi_star=None, slack=1e-6):
    """phi_k - phi* <= bound_k + slack (1 + |phi*|) for every row with a bound."""
    ps = trace.phi_star if phi_star is None else phi_star
    name = f"rate[{trace.method}]"
    if ps is None:
        return CheckReport(name, 0, float("nan"), True, status="inconclusive",
                           details={"reason": "no reference optimal value"})
    phi = trace.phi
    bnd = trace.bound
    have = np.isfinite(bnd)
    if not np.any(have):
        return CheckReport(name, 0, float("nan"), True, status="inconclusive",
                           details={"reason": "trace has no bound column"})
    k = np.arange(len(phi))
    viol = np.where(have, phi - ps - bnd - slack * (1 + abs(ps)), -np.inf)
    rep = from_violations(name, viol[have], {"k": k[have], "phi": phi[have], "bound": bnd[have]})
    rep.details = {"phi_star": ps, "rows_checked": int(np.sum(have))}
    return rep
