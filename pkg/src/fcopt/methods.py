"""Iterative methods for the fully composite problem phi(x) = F(x, f(x)).

Every runner takes a :class:`CompositeProblem` and a :class:`MethodConfig`
and returns a :class:`RunTrace` whose ``bound`` column holds the right-hand
side of the method's convergence guarantee at iteration k (``None`` when
the constants it needs are not available).
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, InapplicableMethodError
from .smooth import hat_beta
from .subproblems import (ModelProblem, SolverOptions, contracted_lmo, cubic_step,
                          full_step_p1, full_step_p2, grad_reg_step, solve_model)

__all__ = [
    "CompositeProblem", "MethodConfig", "RunTrace", "phi", "run_method", "METHODS",
    "run_restricted_basic", "run_full_basic", "run_gm", "run_cgm", "run_fgm",
    "run_cubic_newton", "run_contracting_newton", "run_contracting_prox",
    "cgm_gamma", "contr_newton_gamma", "fgm_sequence", "prox_schedule",
    "bregman", "prox_d", "prox_d_grad",
]

log = logging.getLogger("fcopt")
INF = math.inf


class CompositeProblem:
    """The pair (f, F) with geometry, start point and optional reference data.

    Parameters
    ----------
    f : VectorFunction
    F : OuterFunction
    x0 : array
        Starting point; must lie in dom phi.
    known_opt : float, optional
        Optimal value, used for the gap column and linear-rate bounds.
    x_opt : array, optional
        A minimizer (needed for the FGM and proximal-scheme bounds).
    D0, diameter, R : float, optional
        Level-set radius, domain diameter and a bound on ||x* - x0||.
    """

    def __init__(self, f, F, x0, known_opt=None, x_opt=None, D0=None, diameter=None,
                 R=None, name="", metadata=None):
        self.f = f
        self.F = F
        self.norm = f.norm
        if F.m != f.m:
            raise ConfigError(f"outer function expects m={F.m}, f has {f.m} components")
        if F.Q.kind != "All" and F.Q.n != f.n:
            raise ConfigError("set Q has the wrong dimension")
        if F.Q.kind != "All":
            F.Q = F.Q.bind(f.norm)
        if F.linear is not None and F.linear.size != f.n:
            raise ConfigError("linear term has the wrong dimension")
        self.x0 = np.asarray(x0, dtype=float).ravel()
        if self.x0.size != f.n:
            raise ConfigError(f"x0 has length {self.x0.size}, expected n={f.n}")
        if not np.isfinite(self.phi(self.x0)):
            raise DomainError("x0 is not in dom phi")
        self.known_opt = None if known_opt is None else float(known_opt)
        self.x_opt = None if x_opt is None else np.asarray(x_opt, dtype=float).ravel()
        self.D0 = None if D0 is None else float(D0)
        self.diameter = None if diameter is None else float(diameter)
        self.R = None if R is None else float(R)
        self.name = name
        self.metadata = dict(metadata or {})

    @property
    def n(self):
        return self.f.n

    @property
    def m(self):
        return self.f.m

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if not self.F.in_x_domain(x):
            return INF
        return self.F.eval(x, self.f.values(x))

    def F_L(self, p):
        return self.F.F_of_constants(self.f.L(p))

    def level_radius(self):
        """D_0 for the bounds: declared value, else the diameter of a bounded Q."""
        if self.D0 is not None:
            return self.D0
        if self.F.Q.bounded:
            return self.F.Q.diameter()
        return None

    def domain_diameter(self):
        if self.F.Q.bounded:
            return self.F.Q.diameter()
        return self.diameter

    def dist_to_opt(self):
        if self.x_opt is not None:
            return self.norm.norm(self.x0 - self.x_opt)
        return self.R

    def with_x0(self, x0):
        out = CompositeProblem.__new__(CompositeProblem)
        out.__dict__.update(self.__dict__)
        out.x0 = np.asarray(x0, dtype=float)
        return out


def phi(problem, x):
    return problem.phi(x)


@dataclass
class MethodConfig:
    method: str = "full"
    p: int = 1
    iters: int = 100
    alpha: float = 1.0
    beta: float = None
    delta: float = None
    epsilon: float = 1e-6
    rho_hat: float = None
    seed: int = 0
    inner_max: int = 200
    inner_diagnostics: bool = False
    solver: SolverOptions = field(default_factory=SolverOptions)

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {sorted(METHODS)}")
        if self.p not in (1, 2):
            raise ConfigError("p must be 1 or 2")
        if int(self.iters) < 1:
            raise ConfigError("iteration budget K must be >= 1")
        if not self.alpha >= 1:
            raise ConfigError("alpha must be >= 1")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")


class RunTrace:
    """Per-iteration records of one run."""

    COLUMNS = ("k", "phi", "gap", "bound", "step_norm", "inner_iters", "subproblem_kkt")

    def __init__(self, method, problem, config):
        self.method = method
        self.config = config
        self.phi_star = problem.known_opt
        self.rows = []
        self.iterates = []
        self.extras = {}
        self.warnings = []
        self.status = "running"
        self.info = {}

    def add(self, k, x, phi_val, bound=None, step_norm=0.0, inner_iters=0, kkt=0.0, **extra):
        gap = None if self.phi_star is None else phi_val - self.phi_star
        self.rows.append({"k": k, "phi": phi_val, "gap": gap, "bound": bound,
                          "step_norm": step_norm, "inner_iters": inner_iters,
                          "subproblem_kkt": kkt})
        self.iterates.append(np.array(x, dtype=float))
        for key, v in extra.items():
            self.extras.setdefault(key, []).append(v)

    def warn(self, msg):
        if msg not in self.warnings:
            self.warnings.append(msg)
            log.warning(msg)

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    @property
    def phi(self):
        return self.column("phi")

    @property
    def bound(self):
        return self.column("bound")

    @property
    def x_final(self):
        return self.iterates[-1]

    def __len__(self):
        return len(self.rows)


# --- schedules and prox function -------------------------------------------------

def cgm_gamma(k):
    return 2.0 / (k + 2.0)


def contr_newton_gamma(k):
    return 3.0 / (k + 3.0)


def fgm_sequence(K):
    """A_0..A_K and a_1..a_K with a_{k+1}^2 = A_k + a_{k+1}."""
    A, a = [0.0], []
    for _ in range(K):
        ak = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * A[-1]))
        a.append(ak)
        A.append(A[-1] + ak)
    return np.array(A), np.array(a)


def prox_schedule(k):
    """(A_k, A_{k+1}, gamma_k) for the proximal scheme."""
    A_k = (k / 3.0) ** 3
    A_next = ((k + 1) / 3.0) ** 3
    return A_k, A_next, (A_next - A_k) / A_next


def prox_d(norm, x0, alpha, x):
    return alpha / 3.0 * norm.norm(x - x0) ** 3


def prox_d_grad(norm, x0, alpha, x):
    d = x - x0
    return alpha * norm.norm(d) * norm.apply(d)


def bregman(norm, x0, alpha, v, x):
    """rho_d(v; x) = d(x) - d(v) - <grad d(v), x - v>."""
    return (prox_d(norm, x0, alpha, x) - prox_d(norm, x0, alpha, v)
            - float(prox_d_grad(norm, x0, alpha, v) @ (x - v)))


# --- gates --------------------------------------------------------------------------

def _require_subhomogeneous(problem, name):
    if not problem.F.subhomogeneous:
        raise InapplicableMethodError(
            f"{name} needs an outer function that is subhomogeneous in u")


def _require_FL(problem, p, name, positive=True):
    FL = problem.F_L(p)
    if not np.isfinite(FL):
        raise InapplicableMethodError(
            f"{name} is inapplicable: F(L_{p}(f)) = +inf for this problem "
            f"(L_{p}(f) = {problem.f.L(p).tolist()})")
    if positive and not FL > 0:
        raise InapplicableMethodError(f"{name} needs F(L_{p}(f)) > 0, got {FL}")
    return FL


def _require_bounded(problem, name):
    if not problem.F.Q.bounded:
        raise InapplicableMethodError(f"{name} needs a bounded domain (Box or Ball Q)")


def _step(trace, k, x_new, x_old, problem, bound, res):
    trace.add(k, x_new, problem.phi(x_new), bound=bound,
              step_norm=problem.norm.norm(x_new - x_old),
              inner_iters=int(res.inner_iterations), kkt=float(res.kkt_residual))


def _gap0(problem, phi0):
    return None if problem.known_opt is None else phi0 - problem.known_opt


# --- the methods --------------------------------------------------------------------

def run_restricted_basic(problem, config):
    """x_{k+1} = model minimizer restricted to x_k + beta (dom phi - x_k)."""
    p = config.p
    hb = hat_beta(problem.f, p)
    if not hb > 0:
        raise InapplicableMethodError(
            f"restricted method needs hat_beta_{p}(f) > 0 (uniform convexity); got {hb}")
    beta = hb if config.beta is None else float(config.beta)
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if beta > hb * (1 + 1e-12):
        raise ConfigError(f"beta = {beta} exceeds hat_beta_{p}(f) = {hb}")
    trace = RunTrace("restricted", problem, config)
    trace.info["beta"] = beta
    x = problem.x0.copy()
    phi0 = problem.phi(x)
    g0 = _gap0(problem, phi0)
    trace.add(0, x, phi0, bound=g0)
    for k in range(config.iters):
        if p == 1:
            res = full_step_p1(problem, x, beta=beta, restricted=True, opts=config.solver)
        else:
            res = full_step_p2(problem, x, restricted_beta=beta, opts=config.solver)
        bound = None if g0 is None else (1 - beta) ** (k + 1) * g0
        _step(trace, k + 1, res.y, x, problem, bound, res)
        x = res.y
    trace.status = "ok"
    return trace


def _full_bound(problem, p, k, g0, hb, FL, D0):
    cands = []
    if g0 is not None and hb > 0:
        cands.append((1 - hb) ** k * g0)
    if k >= 1 and problem.F.subhomogeneous and np.isfinite(FL) and D0 is not None:
        cands.append((p + 1) ** (p + 1) * FL * D0 ** (p + 1) / math.factorial(p) / k ** p)
    return min(cands) if cands else None


def run_full_basic(problem, config):
    """x_{k+1} = global minimizer of the p-th order model over dom phi."""
    p = config.p
    trace = RunTrace("full", problem, config)
    try:
        hb = hat_beta(problem.f, p)
    except Exception:  # undefined constants only disable the linear bound
        hb = 0.0
    FL = problem.F_L(p)
    D0 = problem.level_radius()
    x = problem.x0.copy()
    phi0 = problem.phi(x)
    g0 = _gap0(problem, phi0)
    if _full_bound(problem, p, 1, g0, hb, FL, D0) is None:
        trace.warn("no valid bound: F(L_p(f)) = +inf or D_0 unknown, and no uniform convexity")
    trace.info.update(hat_beta=hb, F_L=FL, D0=D0)
    trace.add(0, x, phi0, bound=_full_bound(problem, p, 0, g0, hb, FL, D0))
    step = full_step_p1 if p == 1 else full_step_p2
    for k in range(config.iters):
        res = step(problem, x, opts=config.solver)
        _step(trace, k + 1, res.y, x, problem, _full_bound(problem, p, k + 1, g0, hb, FL, D0), res)
        x = res.y
    trace.status = "ok"
    return trace


def run_gm(problem, config):
    """Gradient method with the quadratic regularizer outside of F."""
    _require_subhomogeneous(problem, "gm")
    FL = _require_FL(problem, 1, "gm")
    M = config.alpha * FL
    D0 = problem.level_radius()
    trace = RunTrace("gm", problem, config)
    trace.info.update(M=M, D0=D0)
    if D0 is None:
        trace.warn("D_0 unknown: bound column omitted")
    x = problem.x0.copy()
    trace.add(0, x, problem.phi(x))
    for k in range(config.iters):
        res = grad_reg_step(problem, x, M, opts=config.solver)
        kk = k + 1
        bound = None if D0 is None else 4 * config.alpha * FL * D0 ** 2 / kk
        _step(trace, kk, res.y, x, problem, bound, res)
        x = res.y
    trace.status = "ok"
    return trace


def run_cgm(problem, config):
    """Contracting conditional gradient with gamma_k = 2/(k+2)."""
    _require_bounded(problem, "cgm")
    _require_subhomogeneous(problem, "cgm")
    FL = _require_FL(problem, 1, "cgm", positive=False)
    Dm = problem.domain_diameter()
    trace = RunTrace("cgm", problem, config)
    trace.info.update(diameter=Dm)
    x = problem.x0.copy()
    trace.add(0, x, problem.phi(x))
    for k in range(config.iters):
        g = cgm_gamma(k)
        res = contracted_lmo(problem, x, g, p=1, opts=config.solver)
        kk = k + 1
        _step(trace, kk, res.y, x, problem, 4 * FL * Dm ** 2 / kk, res)
        trace.extras.setdefault("gamma", []).append(g)
        x = res.y
    trace.status = "ok"
    return trace


def run_fgm(problem, config):
    """Fast gradient method with A_{k+1} = A_k + a_{k+1}, a_{k+1}^2 = A_{k+1}."""
    _require_subhomogeneous(problem, "fgm")
    FL = _require_FL(problem, 1, "fgm")
    M = config.alpha * FL
    dist = problem.dist_to_opt()
    trace = RunTrace("fgm", problem, config)
    trace.info.update(M=M, dist=dist)
    if dist is None:
        trace.warn("||x* - x0|| unknown (no x_opt or R): bound column omitted")
    x = problem.x0.copy()
    v = x.copy()
    A = 0.0
    trace.add(0, x, problem.phi(x), A=A, v=v.copy(), y=None)
    for k in range(config.iters):
        a = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * A))
        A_next = A + a
        y = (a * v + A * x) / A_next
        res = grad_reg_step(problem, y, M, opts=config.solver)
        x_next = res.y
        v = x_next + (A / a) * (x_next - x)
        kk = k + 1
        bound = None if dist is None else 2 * M * dist ** 2 / kk ** 2
        trace.add(kk, x_next, problem.phi(x_next), bound=bound,
                  step_norm=problem.norm.norm(x_next - x), inner_iters=int(res.inner_iterations),
                  kkt=float(res.kkt_residual), A=A_next, v=v.copy(), y=y.copy())
        x, A = x_next, A_next
    trace.status = "ok"
    return trace


def run_cubic_newton(problem, config):
    """Cubic Newton with the cubic regularizer outside of F, M = alpha F(L_2)."""
    _require_subhomogeneous(problem, "cubic")
    FL = _require_FL(problem, 2, "cubic")
    M = config.alpha * FL
    D0 = problem.level_radius()
    trace = RunTrace("cubic", problem, config)
    trace.info.update(M=M, D0=D0)
    if D0 is None:
        trace.warn("D_0 unknown: bound column omitted")
    x = problem.x0.copy()
    trace.add(0, x, problem.phi(x))
    for k in range(config.iters):
        res = cubic_step(problem, x, M, opts=config.solver)
        kk = k + 1
        bound = None if D0 is None else 9 * (1 + config.alpha) * FL * D0 ** 3 / (2 * kk ** 2)
        _step(trace, kk, res.y, x, problem, bound, res)
        x = res.y
    trace.status = "ok"
    return trace


def run_contracting_newton(problem, config):
    """Contracting Newton with gamma_k = 3/(k+3)."""
    _require_bounded(problem, "contr-newton")
    _require_subhomogeneous(problem, "contr-newton")
    FL = _require_FL(problem, 2, "contr-newton", positive=False)
    Dm = problem.domain_diameter()
    trace = RunTrace("contr-newton", problem, config)
    trace.info.update(diameter=Dm)
    x = problem.x0.copy()
    trace.add(0, x, problem.phi(x))
    for k in range(config.iters):
        g = contr_newton_gamma(k)
        res = contracted_lmo(problem, x, g, p=2, opts=config.solver)
        kk = k + 1
        _step(trace, kk, res.y, x, problem, 9 * FL * Dm ** 3 / kk ** 2, res)
        trace.extras.setdefault("gamma", []).append(g)
        x = res.y
    trace.status = "ok"
    return trace


class _ProxSubproblem:
    """h(x) = A phi(gamma x + (1 - gamma) x_k) + rho_d(v_k; x), handled in
    the contracted variable y = gamma x + (1 - gamma) x_k."""

    def __init__(self, problem, alpha, xk, vk, A, gamma):
        self.problem, self.alpha = problem, alpha
        self.xk, self.vk, self.A, self.gamma = xk, vk, A, gamma
        norm = problem.norm
        self.grad_d_v = prox_d_grad(norm, problem.x0, alpha, vk)
        self.y0 = gamma * problem.x0 + (1 - gamma) * xk
        self.S = problem.F.Q.contract(xk, gamma)
        L2bar = gamma ** 3 * problem.f.L(2)
        # constant of the outer part A F(., u) for the contracted smooth part
        self.Mbar = A * problem.F.F_of_constants(L2bar)

    def to_y(self, x):
        return self.gamma * x + (1 - self.gamma) * self.xk

    def to_x(self, y):
        return self.xk + (y - self.xk) / self.gamma

    def h(self, x):
        p = self.problem
        return (self.A * p.phi(self.to_y(x))
                + bregman(p.norm, p.x0, self.alpha, self.vk, x))

    def cubic_step(self, z, opts):
        p = self.problem
        yt = self.to_y(z)
        g3 = self.gamma ** 3
        model = ModelProblem(
            p.F, p.norm, yt, p.f.values(yt), p.f.jacobian(yt), Hs=p.f.hessians(yt),
            S=self.S, weight=self.A,
            cubic=[(self.alpha / g3, self.y0), (self.Mbar / (2 * g3), yt)],
            linear=-self.grad_d_v / self.gamma)
        res = solve_model(model, opts)
        return self.to_x(res.y), res


def run_contracting_prox(problem, config):
    """Contracting proximal-point scheme with cubic-Newton inner steps."""
    _require_subhomogeneous(problem, "contr-prox")
    alpha = _require_FL(problem, 2, "contr-prox")
    norm = problem.norm
    x0 = problem.x0.copy()
    eps = config.epsilon
    if config.rho_hat is not None:
        rho_hat = float(config.rho_hat)
        rho_src = "config"
    elif problem.x_opt is not None:
        rho_hat = alpha / 3.0 * norm.norm(x0 - problem.x_opt) ** 3
        rho_src = "x_opt"
    elif problem.R is not None:
        rho_hat = alpha / 3.0 * problem.R ** 3
        rho_src = "R"
    else:
        pre = run_cubic_newton(problem, replace(config, iters=20, method="cubic"))
        rho_hat = alpha / 3.0 * norm.norm(x0 - pre.x_final) ** 3
        rho_src = "cubic-newton pre-run"
    rho_hat = max(rho_hat, 1e-300)
    delta = config.delta if config.delta is not None else min(eps, eps ** 2 / rho_hat)
    trace = RunTrace("contr-prox", problem, config)
    trace.info.update(alpha=alpha, delta=delta, rho_hat=rho_hat, rho_source=rho_src)

    x_star = problem.x_opt
    phi_star = problem.known_opt
    c1 = c2 = None
    if x_star is not None:
        s6d = (6 * delta) ** (1 / 3)
        c1 = alpha ** (1 / 3) * s6d ** 2 + 2 * alpha ** (2 / 3) * s6d * norm.norm(x_star - x0)
        c2 = 2 * alpha ** (2 / 3) * s6d
    sum1 = sum2 = 0.0

    x, v = x0.copy(), x0.copy()
    trace.add(0, x, problem.phi(x), A=0.0, v=v.copy(), inner_h=[], inner_h_star=None,
              N_max=0, Mbar=None)
    for k in range(config.iters):
        A_k, A_next, gamma = prox_schedule(k)
        sub = _ProxSubproblem(problem, alpha, x, v, A_next, gamma)
        if sub.Mbar > alpha * (1 + 1e-12):
            trace.warn(f"inner cubic constant {sub.Mbar:.4g} exceeds F(L_2) = {alpha:.4g}; "
                       "the 3/4 inner rate is not guaranteed")
        G0 = 9.0 * (rho_hat + (k + 1) ** 3 * eps)
        n_max = max(1, math.ceil(math.log(max(G0 / delta, 1.0)) / math.log(4.0 / 3.0)))
        n_max = min(n_max, config.inner_max)
        z = v.copy()
        hz = sub.h(z)
        hist = [hz]
        iters = kkt = 0
        for t in range(n_max):
            z_new, res = sub.cubic_step(z, config.solver)
            h_new = sub.h(z_new)
            iters += 1
            kkt = max(kkt, float(res.kkt_residual))
            decrease = hz - h_new
            if h_new <= hz:
                z, hz = z_new, h_new
            hist.append(h_new)
            if decrease < delta / 4.0:
                break
        else:
            if n_max == config.inner_max:
                trace.warn("inner budget exhausted; continuing with the best inner iterate")
        h_star = None
        if config.inner_diagnostics:
            zz, hh = z.copy(), hz
            for _ in range(60):
                zn, _res = sub.cubic_step(zz, config.solver)
                hn = sub.h(zn)
                if not hn < hh - 1e-15 * (1 + abs(hh)):
                    break
                zz, hh = zn, hn
            h_star = hh
        v = z
        x_new = gamma * v + (1 - gamma) * x
        bound = None
        if x_star is not None and phi_star is not None:
            dv = norm.norm(x_star - v)
            sum1 += dv
            sum2 += dv ** 2
            Ck = (k + 1) * delta + c1 * sum1 + c2 * sum2
            bound = (bregman(norm, x0, alpha, x0, x_star) + Ck
                     - bregman(norm, x0, alpha, v, x_star)) / A_next
        trace.add(k + 1, x_new, problem.phi(x_new), bound=bound,
                  step_norm=norm.norm(x_new - x), inner_iters=iters, kkt=kkt,
                  A=A_next, v=v.copy(), inner_h=hist, inner_h_star=h_star, N_max=n_max,
                  Mbar=sub.Mbar)
        x = x_new
    trace.status = "ok"
    return trace


METHODS = {
    "restricted": run_restricted_basic,
    "full": run_full_basic,
    "gm": run_gm,
    "cgm": run_cgm,
    "fgm": run_fgm,
    "cubic": run_cubic_newton,
    "contr-newton": run_contracting_newton,
    "contr-prox": run_contracting_prox,
}


def run_method(problem, config):
    config.validate()
    return METHODS[config.method](problem, config)
