"""Regularization of a merely convex problem towards uniform convexity.

With ``d_i(x) = f_i(x) + c_i/(p+1) ||x - x0||^{p+1}`` the regularized
objective ``phi_mu(x) = F(x, (1 - mu) f(x) + mu d(x))`` has uniformly
convex components, so the full-step method converges linearly on it; the
price is a bias controlled by the local measure ``xi_A`` and ``mu``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError
from .methods import CompositeProblem, MethodConfig, RunTrace, run_full_basic
from .smooth import Constants, PowerOfNorm, Sum, VectorFunction, hat_beta
from .subproblems import full_step_p1, full_step_p2

__all__ = ["Regularizer", "RegularizedProblem", "build_regularizer",
           "regularized_condition_number", "xi_measure", "choose_mu",
           "solve_via_regularization"]

INF = math.inf


def _term_constants(p, c):
    """Constants of c/(p+1) ||x - x0||^{p+1} as used in the regularized components."""
    if p == 1:
        return Constants(L1=c, L2=0.0, sigma2=c, sigma3=0.0)
    return Constants(L1=INF, L2=2.0 * c, sigma2=0.0, sigma3=c / 2.0)


@dataclass
class Regularizer:
    f: VectorFunction
    x0: np.ndarray
    c: np.ndarray
    p: int

    @property
    def degree(self):
        return self.p + 1

    def gap_terms(self, x):
        """d(x) - f(x) = c/(p+1) ||x - x0||^{p+1}, component-wise."""
        r = self.f.norm.norm(np.asarray(x, dtype=float) - self.x0)
        return self.c / (self.p + 1) * r ** (self.p + 1)

    def values(self, x):
        return self.f.values(x) + self.gap_terms(x)

    def component_constants(self, i, weight=1.0):
        """Constants of f_i + weight * c_i/(p+1)||x - x0||^{p+1}: the p-th
        order Lipschitz constant adds weight*c_i*p!, the uniform convexity
        parameter is weight*c_i/2^{p-1}."""
        base = self.f.components[i].constants
        p, wc = self.p, weight * self.c[i]
        if p == 1:
            return Constants(L1=base.L1 + wc, L2=base.L2, sigma2=wc, sigma3=base.sigma3)
        return Constants(L1=INF, L2=base.L2 + 2.0 * wc, sigma2=base.sigma2, sigma3=wc / 2.0)

    def mixed(self, mu):
        """The vector function (1 - mu) f + mu d with declared constants."""
        comps = []
        for i, fi in enumerate(self.f.components):
            coeff = mu * self.c[i] / (self.p + 1)
            term = PowerOfNorm(self.x0, self.p + 1, coeff, norm=self.f.norm,
                               constants=_term_constants(self.p, mu * self.c[i]))
            comps.append(Sum([fi, term], constants=self.component_constants(i, mu)))
        return VectorFunction(comps, self.f.norm)


@dataclass
class RegularizedProblem:
    original: CompositeProblem
    regularizer: Regularizer
    mu: float
    problem: CompositeProblem

    def phi_mu(self, x):
        return self.problem.phi(x)


def build_regularizer(problem, p, c=None):
    """Regularizer centered at x0 with c_i = L_p(f_i) unless given."""
    if p not in (1, 2):
        raise ConfigError("p must be 1 or 2")
    L = problem.f.L(p)
    if c is None:
        if np.any(L == 0):
            raise ConfigError(f"L_{p}(f_i) = 0 for some component; supply c explicitly")
        if np.any(~np.isfinite(L)):
            raise ConfigError(f"L_{p}(f_i) = +inf for some component")
        c = L.copy()
    c = np.asarray(c, dtype=float).ravel()
    if c.size != problem.m or np.any(c <= 0):
        raise ConfigError("regularizer needs one positive c_i per component")
    return Regularizer(problem.f, problem.x0.copy(), c, p)


def regularize(problem, reg, mu):
    if not 0 < mu <= 1:
        raise ConfigError("mu must lie in (0, 1]")
    f_mu = reg.mixed(mu)
    prob = CompositeProblem(f_mu, problem.F, problem.x0, name=problem.name + "+reg",
                            D0=problem.D0, diameter=problem.diameter)
    return RegularizedProblem(problem, reg, mu, prob)


def regularized_condition_number(mu, p):
    """Closed-form beta of the regularized problem when c_i = L_p(f_i)."""
    if mu < 0 or mu > 1:
        raise ConfigError("mu must lie in [0, 1]")
    if mu == 0:
        return 0.0
    fact = math.factorial(p)
    return 1.0 / (1.0 + ((1 + p) * 2 ** (p - 1) * (1.0 / (mu * fact) + 1.0)) ** (1.0 / p))


def xi_measure(problem, x, g, A, lo=1e-12, hi=1e12, iters=200):
    """min{lam > 0 : F(x, f(x) + g/lam) <= A} by bisection in log(lam)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ConfigError("g must be nonnegative")
    fx = problem.f.values(x)
    if not problem.phi(x) < A:
        raise DomainError(f"xi_A needs phi(x) < A (phi(x) = {problem.phi(x)}, A = {A})")

    def ok(lam):
        return problem.F.eval(x, fx + g / lam) <= A

    if ok(lo):
        return lo
    if not ok(hi):
        return INF
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if ok(math.exp(mid)):
            b = mid
        else:
            a = mid
    return math.exp(b)


def choose_mu(problem, target_delta, xi0_estimate):
    """mu = delta^2 / xi0, clipped to (0, 1]."""
    if not xi0_estimate > 0:
        raise ConfigError("xi0 estimate must be positive")
    if not np.isfinite(xi0_estimate):
        raise ConfigError("xi0 estimate is infinite; raise the level A")
    return min(1.0, target_delta ** 2 / xi0_estimate)


def solve_via_regularization(problem, p, epsilon, iters=20000, pre_iters=100, mu=None,
                             c=None, solver=None):
    """Approximately minimize phi via the regularized problem.

    Steps: a short full-step pre-run gives x^ and phi^*; the level is
    ``A = phi(x0) + (phi(x0) - phi^*)``; the regularized problem is
    solved to relative accuracy ``delta = eps / (2 (phi(x0) - phi^*))``
    with ``mu = choose_mu(eps / (4 (A - phi^*)), xi_A(x0; d(x^) - f(x^)))``.
    The run stops once the one-step linear rate certifies
    ``phi_mu(x_k) - phi_mu^* <= (phi_mu(x_k) - phi_mu(x_{k+1})) / beta
    <= delta (phi(x0) - phi^*)``.
    """
    cfg = MethodConfig(method="full", p=p, iters=pre_iters)
    if solver is not None:
        cfg.solver = solver
    pre = run_full_basic(problem, cfg)
    phi0 = problem.phi(problem.x0)
    k_best = int(np.argmin(pre.phi))
    x_hat, phi_hat = pre.iterates[k_best], float(pre.phi[k_best])
    spread = phi0 - phi_hat
    info = {"phi0": phi0, "phi_star_estimate": phi_hat, "x_hat": x_hat.tolist()}
    trace = RunTrace("regularize-solve", problem, cfg)
    trace.info.update(info)
    if mu == 0 or spread <= 0:
        # degenerate: no regularization (or x0 already optimal for the pre-run)
        plain = run_full_basic(problem, replace(cfg, iters=max(1, min(iters, 1000))))
        plain.method = "regularize-solve"
        plain.info.update(info, mu=0.0)
        return plain
    reg = build_regularizer(problem, p, c)
    A = phi0 + spread
    g_hat = reg.gap_terms(x_hat)
    xi0 = xi_measure(problem, problem.x0, g_hat, A)
    delta = epsilon / (2.0 * spread)
    mu_target = epsilon / (4.0 * (A - phi_hat))
    if mu is None:
        mu = choose_mu(problem, mu_target, xi0)
    rp = regularize(problem, reg, mu)
    beta = hat_beta(rp.problem.f, p)
    trace.info.update(A=A, xi0_estimate=xi0, mu=mu, delta=delta, beta=beta,
                      bias_bound=2 * math.sqrt(mu * xi0) * (A - phi_hat))
    step = full_step_p1 if p == 1 else full_step_p2
    phi_star = problem.known_opt
    x = problem.x0.copy()
    phimu = rp.phi_mu(x)
    bias = 2 * math.sqrt(mu * xi0)

    def bound(k):
        if phi_star is None:
            return None
        return (1 - beta) ** k * (phi0 - phi_star) + bias * (A - phi_star)

    trace.add(0, x, problem.phi(x), bound=bound(0), phi_mu=phimu, certificate=None)
    certified = False
    for k in range(iters):
        res = step(rp.problem, x, opts=cfg.solver)
        y = res.y
        phimu_new = rp.phi_mu(y)
        cert = max(phimu - phimu_new, 0.0) / beta
        trace.add(k + 1, y, problem.phi(y), bound=bound(k + 1),
                  step_norm=problem.norm.norm(y - x), inner_iters=int(res.inner_iterations),
                  kkt=float(res.kkt_residual), phi_mu=phimu_new, certificate=cert)
        x, phimu = y, phimu_new
        if cert <= delta * spread:
            certified = True
            break
    trace.status = "ok" if certified else "uncertified"
    if not certified:
        trace.warn("regularized run did not certify the target accuracy within the budget")
    trace.info["certified"] = certified
    trace.info["regularized"] = rp
    return trace
