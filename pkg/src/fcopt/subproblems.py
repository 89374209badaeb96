"""Solvers for the per-iteration model problems.

Every auxiliary problem of the methods has the shape

    minimize_y   w * F~( q(y) ) + s(y)      subject to  y in S

with component models around an anchor ``xb`` (``h = y - xb``)

    q_i(y) = c_i + <g_i, h> + 1/2 <H_i h, h> + a_i/2 ||h||^2 + kappa_i/3 ||h||^3,

``F~`` the u-part of the outer function and ``s`` a sum of simple extra
terms: a linear form, quadratics ``M/2 ||y - z||^2`` and cubics
``k/3 ||y - z||^3``.  S is the set Q of the outer function, possibly
contracted towards a point.

How the problem is solved depends on the outer kind:

* ``AdditiveComposite`` (and m = 1): the multiplier is fixed, so one
  aggregated problem is solved directly.
* ``MaxForm`` / ``ConstraintForm``: the concave dual over lambda (simplex,
  or lambda_1 = 1, lambda >= 0) is maximized by a nonmonotone spectral
  projected gradient method; for each lambda the aggregated problem is
  solved exactly (eigen-decomposition / secular equation, closed-form
  LMO, box faces, ball trust region) or by an accelerated projected
  gradient method when nothing closed-form applies.  When the aggregated
  problem is not strictly convex and S is bounded (linear models in a
  contracted step) the dual is nonsmooth; the problem is then solved by
  a proximal-point loop whose iterations are strictly convex, and
  certified by a Frank-Wolfe lower bound.
* ``LogSumExpForm`` / ``SquaredHinge``: the primal is smooth and is
  minimized directly (damped Newton, or accelerated projected gradient on
  a bounded S).
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ConfigError, ConvergenceError, InapplicableMethodError, ModelInfeasibleError
from .outer import FEAS_TOL, SimpleSet

__all__ = [
    "DualPoint", "SubproblemResult", "ModelProblem", "SolverOptions", "solve_model",
    "full_step_p1", "full_step_p2", "grad_reg_step", "contracted_lmo", "cubic_step",
    "project_simplex",
]

INF = math.inf


@dataclass
class DualPoint:
    lam: np.ndarray
    tau: float = None


@dataclass
class SubproblemResult:
    y: np.ndarray
    dual: DualPoint = None
    model_value: float = INF
    kkt_residual: float = 0.0
    inner_iterations: int = 0
    lower_bound: float = -INF
    info: dict = field(default_factory=dict)

    @property
    def gap(self):
        return self.model_value - self.lower_bound


@dataclass
class SolverOptions:
    dual_tol: float = 1e-10
    dual_max_iter: int = 5000
    inner_tol: float = 1e-12
    inner_max_iter: int = 20000
    newton_tol: float = 1e-11
    newton_max_iter: int = 200
    gap_tol: float = 1e-6
    prox_max_iter: int = 2000
    accept_tol: float = 1e-6


class _Unbounded(Exception):
    pass


def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _project_constraint_cone(v):
    out = np.maximum(v, 0.0)
    out[0] = 1.0
    return out


class ModelProblem:
    """Data of one model problem (see module docstring)."""

    def __init__(self, F, norm, center, c, G, Hs=None, a=None, kappa=None, S=None,
                 weight=1.0, quad=(), cubic=(), linear=None):
        self.F = F
        self.norm = norm
        self.center = np.asarray(center, dtype=float)
        self.n = self.center.size
        self.c = np.asarray(c, dtype=float).ravel()
        self.m = self.c.size
        self.G = np.asarray(G, dtype=float).reshape(self.m, self.n)
        self.Hs = None if Hs is None else np.asarray(Hs, dtype=float).reshape(self.m, self.n, self.n)
        self.a = np.zeros(self.m) if a is None else np.asarray(a, dtype=float).ravel()
        self.kappa = np.zeros(self.m) if kappa is None else np.asarray(kappa, dtype=float).ravel()
        for name, v in (("a", self.a), ("kappa", self.kappa)):
            if np.any(~np.isfinite(v)) or np.any(v < 0):
                raise InapplicableMethodError(
                    f"model regularization coefficients {name} must be finite and nonnegative, got {v}")
        self.S = S if S is not None else F.Q
        if self.S.kind != "All" and self.S.norm is None:
            self.S = self.S.bind(norm)
        self.weight = float(weight)
        self.quad = [(float(M), np.asarray(z, dtype=float)) for M, z in quad if M > 0]
        cub_center, cub_off = 0.0, []
        for k, z in cubic:
            if k <= 0:
                continue
            z = np.asarray(z, dtype=float)
            if np.array_equal(z, self.center):
                cub_center += float(k)
            else:
                cub_off.append((float(k), z))
        self.cubic_center = cub_center
        self.cubic_off = cub_off
        lin = np.zeros(self.n) if linear is None else np.asarray(linear, dtype=float).copy()
        if F.linear is not None:
            lin = lin + self.weight * F.linear
        self.linear = lin
        self.B = norm.matrix()

    # --- model pieces -----------------------------------------------------
    def q(self, y):
        h = y - self.center
        out = self.c + self.G @ h
        if self.Hs is not None:
            out = out + 0.5 * np.einsum("j,ijk,k->i", h, self.Hs, h)
        r = self.norm.norm(h)
        return out + 0.5 * self.a * r ** 2 + self.kappa / 3.0 * r ** 3

    def q_batch(self, Y):
        Hh = np.atleast_2d(Y) - self.center
        out = self.c + Hh @ self.G.T
        if self.Hs is not None:
            out = out + 0.5 * np.einsum("pj,ijk,pk->pi", Hh, self.Hs, Hh)
        r = self.norm.norms(Hh)[:, None]
        return out + 0.5 * self.a * r ** 2 + self.kappa / 3.0 * r ** 3

    def q_jac(self, y):
        h = y - self.center
        Bh = self.norm.apply(h)
        r = self.norm.norm(h)
        J = self.G + np.outer(self.a + self.kappa * r, Bh)
        if self.Hs is not None:
            J = J + self.Hs @ h
        return J

    def q_hessians(self, y):
        h = y - self.center
        Bh = self.norm.apply(h)
        r = self.norm.norm(h)
        extra = r * self.B + (np.outer(Bh, Bh) / r if r > 0 else 0.0)
        H = (self.a[:, None, None] * self.B + self.kappa[:, None, None] * extra)
        if self.Hs is not None:
            H = H + self.Hs
        return H

    def s(self, y):
        v = float(self.linear @ y)
        for M, z in self.quad:
            v += 0.5 * M * self.norm.norm(y - z) ** 2
        if self.cubic_center:
            v += self.cubic_center / 3.0 * self.norm.norm(y - self.center) ** 3
        for k, z in self.cubic_off:
            v += k / 3.0 * self.norm.norm(y - z) ** 3
        return v

    def s_batch(self, Y):
        Y = np.atleast_2d(Y)
        v = Y @ self.linear
        for M, z in self.quad:
            v = v + 0.5 * M * self.norm.norms(Y - z) ** 2
        if self.cubic_center:
            v = v + self.cubic_center / 3.0 * self.norm.norms(Y - self.center) ** 3
        for k, z in self.cubic_off:
            v = v + k / 3.0 * self.norm.norms(Y - z) ** 3
        return v

    def _cubic_terms(self):
        out = list(self.cubic_off)
        if self.cubic_center:
            out.append((self.cubic_center, self.center))
        return out

    def s_grad(self, y):
        g = self.linear.copy()
        for M, z in self.quad:
            g += M * self.norm.apply(y - z)
        for k, z in self._cubic_terms():
            d = y - z
            g += k * self.norm.norm(d) * self.norm.apply(d)
        return g

    def s_hess(self, y):
        H = sum(M for M, _ in self.quad) * self.B
        for k, z in self._cubic_terms():
            d = y - z
            r = self.norm.norm(d)
            if r > 0:
                Bd = self.norm.apply(d)
                H = H + k * (r * self.B + np.outer(Bd, Bd) / r)
        return H

    def value(self, y, tol=FEAS_TOL):
        """Model objective at y (+inf outside S or outside D)."""
        if not self.S.contains(y, tol):
            return INF
        return self.weight * float(self.F.eval_u(self.q(y))) + self.s(y)

    def value_batch(self, Y, tol=FEAS_TOL):
        Y = np.atleast_2d(Y)
        v = self.weight * np.asarray(self.F.eval_u(self.q_batch(Y)), dtype=float) + self.s_batch(Y)
        return np.where(self.S.contains_batch(Y, tol), v, INF)

    def lagrangian(self, y, lam):
        return self.weight * float(lam @ self.q(y)) + self.s(y)

    def lagrangian_grad(self, y, lam):
        return self.weight * (lam @ self.q_jac(y)) + self.s_grad(y)

    # --- aggregation for a fixed multiplier ------------------------------
    def aggregate(self, lam, extra_quad=()):
        """Coefficients (G, P, kappa) of the lambda-aggregated problem in h,
        plus the off-center cubic terms."""
        om = self.weight * np.asarray(lam, dtype=float)
        G = om @ self.G + self.linear
        P = (om @ self.a) * self.B
        if self.Hs is not None:
            P = P + np.einsum("i,ijk->jk", om, self.Hs)
        for M, z in list(self.quad) + list(extra_quad):
            G = G + M * self.norm.apply(self.center - z)
            P = P + M * self.B
        kappa = float(om @ self.kappa) + self.cubic_center
        return G, 0.5 * (P + P.T), kappa, self.cubic_off

    def strictly_convex(self):
        """True when every aggregated problem is strictly convex in h."""
        if self.quad or self.cubic_center or self.cubic_off:
            return True
        active = self.weight > 0
        if self.F.kind == "ConstraintForm":
            return active and (self.a[0] > 0 or self.kappa[0] > 0)
        return active and bool(np.all((self.a > 0) | (self.kappa > 0)))


# --- aggregated problem solvers -----------------------------------------------

def _agg_value(G, P, kappa, off, center, norm, y):
    h = y - center
    v = float(G @ h + 0.5 * h @ P @ h + kappa / 3.0 * norm.norm(h) ** 3)
    for k, z in off:
        v += k / 3.0 * norm.norm(y - z) ** 3
    return v


def _agg_grad(G, P, kappa, off, center, norm, y):
    h = y - center
    g = G + P @ h + kappa * norm.norm(h) * norm.apply(h)
    for k, z in off:
        d = y - z
        g = g + k * norm.norm(d) * norm.apply(d)
    return g


def _agg_hess(P, kappa, off, center, norm, y):
    H = P.copy()
    B = norm.matrix()
    for k, z in [(kappa, center)] + list(off):
        if k == 0:
            continue
        d = y - z
        r = norm.norm(d)
        if r > 0:
            Bd = norm.apply(d)
            H = H + k * (r * B + np.outer(Bd, Bd) / r)
    return H


def _gen_eig(P, norm):
    """Eigen-pairs of P relative to B: V^T B V = I, V^T P V = diag(w)."""
    w, V = scipy.linalg.eigh(P, norm.matrix())
    w = np.maximum(w, 0.0)
    return w, V


def _unconstrained_cubic(G, P, kappa, norm, tol):
    """argmin <G,h> + 1/2<Ph,h> + kappa/3 ||h||^3 over all h (P PSD)."""
    n = G.size
    if not np.any(G):
        return np.zeros(n), 0
    w, V = _gen_eig(P, norm)
    gt = V.T @ G
    if kappa == 0.0:
        scale = max(w.max(initial=0.0), 1.0)
        small = w <= 1e-13 * scale
        if np.any(np.abs(gt[small]) > 1e-11 * max(np.linalg.norm(gt), 1e-300)):
            raise _Unbounded()
        c = np.where(small, 0.0, -gt / np.where(small, 1.0, w))
        return V @ c, 1
    gnorm = np.linalg.norm(gt)

    def excess(r):
        return np.linalg.norm(gt / (w + kappa * r)) - r

    hi = math.sqrt(gnorm / kappa)
    lo = 0.0
    if w.min() > 0 and excess(0.0) <= 0:
        return V @ (-gt / w), 1
    lo = max(lo, 1e-300)
    if excess(lo) <= 0:
        return np.zeros(n), 1
    r, res = scipy.optimize.brentq(excess, lo, hi * (1 + 1e-12) + 1e-300, xtol=1e-300,
                                   rtol=max(tol, 4 * np.finfo(float).eps), full_output=True)
    c = -gt / (w + kappa * r)
    return V @ c, res.iterations


def _ball_quadratic(G, P, center, S, norm):
    """Exact min of <G,h> + 1/2<Ph,h> over y = center + h in a B-ball."""
    e = S.center - center
    g = G + P @ e
    w, V = _gen_eig(P, norm)
    gt = V.T @ g
    r = S.radius
    scale = max(w.max(initial=0.0), 1.0)
    small = w <= 1e-13 * scale
    flat = np.any(small & (np.abs(gt) > 1e-14 * max(np.linalg.norm(gt), 1e-300)))
    if not flat:
        z0 = np.where(small, 0.0, -gt / np.where(small, 1.0, w))
        if np.linalg.norm(z0) <= r:
            return S.center + V @ z0
    if not np.any(gt):
        return S.center.copy()

    def excess(nu):
        return np.linalg.norm(gt / (w + nu)) - r

    hi = np.linalg.norm(gt) / r
    lo = 1e-300
    if excess(lo) <= 0:
        lo = 0.0
    nu = scipy.optimize.brentq(excess, lo, hi * (1 + 1e-12) + 1e-300, xtol=1e-300, rtol=1e-15)
    z = -gt / (w + nu)
    z *= min(1.0, r / max(np.linalg.norm(z), 1e-300))
    return S.center + V @ z


def _box_quadratic_faces(G, P, center, S, tol):
    """Exact min of <G,h> + 1/2<Ph,h> over a small box by enumerating faces."""
    n = G.size
    lo, hi = S.lower - center, S.upper - center
    best, best_val = None, INF
    grad_scale = np.abs(G).max() + np.abs(P).max() * np.abs(np.concatenate([lo, hi])).max() + 1e-300
    for code in np.ndindex(*(3,) * n):
        code = np.asarray(code)
        h = np.where(code == 1, lo, np.where(code == 2, hi, 0.0))
        free = code == 0
        if np.any(free):
            Pff = P[np.ix_(free, free)]
            rhs = -(G[free] + P[np.ix_(free, ~free)] @ h[~free])
            sol, *_ = np.linalg.lstsq(Pff, rhs, rcond=1e-13)
            if np.linalg.norm(Pff @ sol - rhs) > 1e-10 * (1 + np.linalg.norm(rhs)):
                continue
            h[free] = sol
            if np.any(h < lo - 1e-12 * (1 + np.abs(lo))) or np.any(h > hi + 1e-12 * (1 + np.abs(hi))):
                continue
            h = np.clip(h, lo, hi)
        g = G + P @ h
        fw = float(g @ h - np.where(g > 0, g * lo, g * hi).sum())
        if fw > tol * grad_scale * (1 + np.abs(hi - lo).max()):
            continue
        val = float(G @ h + 0.5 * h @ P @ h)
        if val < best_val:
            best, best_val = h, val
    return None if best is None else center + best


def _fw_gap(grad, y, S):
    return float(grad @ (y - S.lmo(grad)))


def _fista(fun, grad, y0, S, norm, tol, max_iter, L0=1.0):
    """Accelerated projected gradient with backtracking and restarts.

    Stops once the Frank-Wolfe gap (an upper bound on the optimality gap)
    drops below ``tol``.  Metric: diag(B) on a Box, B on a Ball.
    """
    if S.kind == "Box":
        w = norm.diag() if norm.is_diagonal else np.ones(y0.size)
        solve = lambda g: g / w
        sqn = lambda v: float(np.dot(v * w, v))
    else:
        solve = norm.solve
        sqn = lambda v: norm.norm(v) ** 2
    x = S.project(y0)
    fx = fun(x)
    yk, t_mom, L = x.copy(), 1.0, max(L0, 1e-12)
    best, fbest, gap = x.copy(), fx, INF
    it = 0
    for it in range(1, max_iter + 1):
        gy = grad(yk)
        fy = fun(yk)
        while True:
            xn = S.project(yk - solve(gy) / L)
            step = xn - yk
            fn = fun(xn)
            if fn <= fy + gy @ step + 0.5 * L * sqn(step) + 1e-15 * (1 + abs(fy)):
                break
            L *= 2.0
            if L > 1e30:
                break
        if fn < fbest:
            best, fbest = xn.copy(), fn
        if fn > fx:  # restart momentum
            t_mom, yk = 1.0, x.copy()
            L *= 0.9
            continue
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t_mom ** 2))
        yk = xn + ((t_mom - 1) / t_new) * (xn - x)
        yk = S.project(yk)
        x, fx, t_mom = xn, fn, t_new
        L *= 0.95
        if it % 5 == 0 or it < 5:
            gap = _fw_gap(grad(best), best, S)
            if gap <= tol:
                break
    gap = _fw_gap(grad(best), best, S)
    return best, gap, it


def _constrained_newton(fun, grad, hess, y0, S, norm, tol, max_iter):
    """Newton steps whose quadratic model is minimized exactly over a Ball
    or a small Box, with Armijo backtracking along the feasible segment.

    Returns ``None`` when a quadratic subproblem cannot be solved exactly,
    so the caller can fall back to a first-order method.
    """
    y = S.project(y0)
    fy = fun(y)
    gap = INF
    for it in range(1, max_iter + 1):
        g = grad(y)
        gap = _fw_gap(g, y, S)
        if gap <= tol:
            return y, max(gap, 0.0), it
        H = hess(y)
        H = H + 1e-12 * max(1.0, np.abs(H).max()) * norm.matrix()
        if S.kind == "Ball":
            z = _ball_quadratic(g, H, y, S, norm)
        else:
            z = _box_quadratic_faces(g, H, y, S, 1e-10)
        if z is None:
            return None
        d = z - y
        slope = float(g @ d)
        if slope >= 0:
            return y, max(gap, 0.0), it
        t = 1.0
        while True:
            yn = y + t * d
            fn = fun(yn)
            if fn <= fy + 1e-4 * t * slope + 4e-16 * (1 + abs(fy)):
                break
            t *= 0.5
            if t < 1e-14:
                return y, max(gap, 0.0), it
        y, fy = yn, fn
    return y, max(_fw_gap(grad(y), y, S), 0.0), max_iter


def _newton(fun, grad, hess, y0, norm, tol, max_iter):
    """Damped Newton with Armijo backtracking on a smooth convex function."""
    y = y0.copy()
    fy = fun(y)
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(y)
        gn = norm.dual_norm(g)
        if gn <= tol * (1 + abs(fy)):
            return y, gn, it
        H = hess(y)
        reg = 1e-14 * max(1.0, np.abs(H).max())
        try:
            d = -np.linalg.solve(H + reg * norm.matrix(), g)
        except np.linalg.LinAlgError:
            d = -norm.solve(g)
        slope = g @ d
        if slope >= 0:
            d, slope = -norm.solve(g), -gn ** 2
        t = 1.0
        while True:
            yn = y + t * d
            fn = fun(yn)
            if fn <= fy + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if not np.isfinite(fn):
            raise _Unbounded()
        if fn > fy and t < 1e-12:
            return y, gn, it
        if fy - fn <= 1e-16 * (1 + abs(fy)) and t < 1e-6:
            return yn, norm.dual_norm(grad(yn)), it
        y, fy = yn, fn
        if not np.isfinite(fy) or norm.norm(y) > 1e150:
            raise _Unbounded()
    return y, norm.dual_norm(grad(y)), it


def _isotropic(P, norm):
    """p with P = p B, or None."""
    B = norm.matrix()
    p = float(np.trace(P) / np.trace(B))
    if np.abs(P - p * B).max() <= 1e-14 * max(1.0, abs(p)) * max(1.0, np.abs(B).max()):
        return p
    return None


def solve_aggregated(G, P, kappa, off, center, S, norm, opts, start=None):
    """argmin over y in S of <G,h> + 1/2<Ph,h> + kappa/3||h||^3 + sum k/3||y - z||^3.

    Returns ``(y, residual, iterations)``; raises ``_Unbounded`` when the
    infimum is -inf.
    """
    fun = lambda y: _agg_value(G, P, kappa, off, center, norm, y)
    grd = lambda y: _agg_grad(G, P, kappa, off, center, norm, y)
    if S.kind == "All":
        if not off:
            h, it = _unconstrained_cubic(G, P, kappa, norm, opts.inner_tol)
            y = center + h
            return y, norm.dual_norm(grd(y)), it
        y0 = center if start is None else start
        return _newton(fun, grd, lambda y: _agg_hess(P, kappa, off, center, norm, y),
                       y0, norm, opts.newton_tol, opts.newton_max_iter)
    if kappa == 0.0 and not off:
        if not np.any(P):
            y = S.lmo(G)
            return y, 0.0, 1
        p = _isotropic(P, norm)
        if p is not None and p > 0 and (S.kind == "Ball" or norm.is_diagonal):
            # B-metric projection of the unconstrained minimizer
            y = S.project(center - norm.solve(G) / p)
            return y, max(_fw_gap(grd(y), y, S), 0.0), 1
        if S.kind == "Ball":
            y = _ball_quadratic(G, P, center, S, norm)
            return y, max(_fw_gap(grd(y), y, S), 0.0), 1
        if S.n <= 6:
            y = _box_quadratic_faces(G, P, center, S, 1e-12)
            if y is not None:
                return y, max(_fw_gap(grd(y), y, S), 0.0), 3 ** S.n
    y0 = center if start is None else start
    if S.kind == "Ball" or S.n <= 6:
        scale = 1 + abs(fun(S.project(y0))) + norm.dual_norm(G) * S.diameter()
        out = _constrained_newton(fun, grd, lambda y: _agg_hess(P, kappa, off, center, norm, y),
                                  y0, S, norm, opts.inner_tol * scale, opts.newton_max_iter)
        if out is not None and out[1] <= opts.inner_tol * scale:
            return out
    L0 = np.linalg.eigvalsh(P).max() + (kappa + sum(k for k, _ in off)) * S.diameter() * norm.max_eig()
    y0 = center if start is None else start
    scale = 1 + abs(fun(S.project(y0))) + norm.dual_norm(G) * S.diameter()
    y, gap, it = _fista(fun, grd, y0, S, norm, opts.inner_tol * scale, opts.inner_max_iter,
                        L0=max(L0, 1e-8))
    return y, max(gap, 0.0), it


# --- the three solution strategies ----------------------------------------------

def _result_primal(model, y, residual, iters, lam, info=None):
    val = model.value(y)
    lb = val - residual if model.S.kind != "All" else val
    tau = float(lam @ (model.weight * model.kappa)) * model.norm.norm(y - model.center)
    return SubproblemResult(y=y, dual=DualPoint(lam=lam, tau=tau), model_value=val,
                            kkt_residual=residual, inner_iterations=iters,
                            lower_bound=lb, info=info or {})


def _solve_fixed(model, opts):
    lam = np.zeros(model.m)
    lam[0] = 1.0
    G, P, kappa, off = model.aggregate(lam)
    try:
        y, res, it = solve_aggregated(G, P, kappa, off, model.center, model.S, model.norm, opts)
    except _Unbounded:
        raise ModelInfeasibleError("model problem is unbounded below") from None
    return _result_primal(model, y, res, it, lam)


def _dual_eval(model, lam, opts, extra_quad=(), start=None):
    G, P, kappa, off = model.aggregate(lam, extra_quad)
    try:
        y, res, it = solve_aggregated(G, P, kappa, off, model.center, model.S, model.norm,
                                      opts, start=start)
    except _Unbounded:
        return -INF, None, None, 1
    q = model.q(y)
    val = model.weight * float(lam @ q) + model.s(y)
    for M, z in extra_quad:
        val += 0.5 * M * model.norm.norm(y - z) ** 2
    return val, model.weight * q, y, it


def _spg_dual(model, opts, lam0=None, extra_quad=()):
    """Maximize the concave dual over the multiplier set by SPG."""
    constraint = model.F.kind == "ConstraintForm"
    proj = _project_constraint_cone if constraint else project_simplex
    m = model.m
    lam = proj(np.ones(m) if constraint else np.full(m, 1.0 / m)) if lam0 is None else proj(lam0)
    val, g, y, iters = _dual_eval(model, lam, opts, extra_quad)
    if not np.isfinite(val):
        # look for a finite starting multiplier
        for scale in (10.0, 100.0, 1e4):
            trial = proj(np.where(np.arange(m) == 0, 1.0, scale) if constraint else np.full(m, 1.0 / m))
            val, g, y, it = _dual_eval(model, trial, opts, extra_quad)
            iters += it
            if np.isfinite(val):
                lam = trial
                break
        else:
            raise ModelInfeasibleError("no multiplier with a finite dual value")
    step = 1.0 / max(1.0, np.abs(g).max())
    hist = [val]
    pg = INF
    it = 0
    for it in range(1, opts.dual_max_iter + 1):
        pg = float(np.abs(proj(lam + g) - lam).max())
        if pg <= opts.dual_tol * (1 + abs(val)):
            break
        d = proj(lam + step * g) - lam
        slope = float(g @ d)
        ref = min(hist[-10:])
        t = 1.0
        while True:
            lam_n = lam + t * d
            val_n, g_n, y_n, k = _dual_eval(model, lam_n, opts, extra_quad, start=y)
            iters += k
            if np.isfinite(val_n) and val_n >= ref + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-16:
                break
        if t < 1e-16:
            break
        sk, yk = lam_n - lam, g_n - g
        curv = -float(sk @ yk)
        step = float(sk @ sk) / curv if curv > 1e-300 else 1e10
        step = min(max(step, 1e-12), 1e12)
        lam, val, g, y = lam_n, val_n, g_n, y_n
        hist.append(val)
        if np.abs(lam).max() > 1e12:
            raise ModelInfeasibleError("dual multipliers diverge: model constraints are infeasible")
    return lam, val, g, y, pg, iters


def _solve_dual(model, opts, lam0=None):
    lam, dval, g, y, pg, iters = _spg_dual(model, opts, lam0)
    val = model.value(y)
    res = pg
    if model.S.kind != "All":
        res = max(res, _fw_gap(model.lagrangian_grad(y, lam), y, model.S))
    if res > opts.accept_tol * (1 + abs(dval)):
        raise ConvergenceError(f"dual ascent stalled (residual {res:.3e})",
                               best=y, residual=res)
    tau = float(lam @ (model.weight * model.kappa)) * model.norm.norm(y - model.center)
    return SubproblemResult(y=y, dual=DualPoint(lam=lam, tau=tau), model_value=val,
                            kkt_residual=res, inner_iterations=iters, lower_bound=dval)


def _frank_wolfe_bound(model, y, lam):
    """Lower bound on the optimal value valid for any multiplier lam."""
    g = model.lagrangian_grad(y, lam)
    return model.lagrangian(y, lam) + float(g @ (model.S.lmo(g) - y))


def _solve_prox(model, opts):
    """Proximal-point loop for non-strictly-convex models on bounded S."""
    S = model.S
    constraint = model.F.kind == "ConstraintForm"
    y = S.project(model.center)
    lam = None
    om = np.full(model.m, model.weight / model.m)
    gscale = max(model.norm.dual_norm(om @ model.G + model.linear), 1e-12)
    rho = gscale / max(S.diameter(), 1e-12)
    rho_min = rho * 1e-8
    best = (INF, y, None, -INF)
    total = 0
    for it in range(1, opts.prox_max_iter + 1):
        lam, dval, g, y_new, pg, k = _spg_dual(model, opts, lam, extra_quad=[(rho, y)])
        total += k
        y = y_new
        val = model.value(y)
        lb = _frank_wolfe_bound(model, y, lam)
        if constraint and not np.isfinite(val):
            # tolerate tiny violations of model constraints when ranking
            val_rank = INF
        else:
            val_rank = val
        if val_rank - lb < best[0] - best[3] or best[2] is None:
            best = (val_rank, y.copy(), lam.copy(), lb)
        else:
            best = (best[0], best[1], best[2], max(best[3], lb))
        gap = best[0] - best[3]
        if gap <= opts.gap_tol * (1 + abs(best[0])):
            break
        rho = max(rho * 0.5, rho_min)
    val, y, lam, lb = best
    gap = val - lb
    if not gap <= opts.gap_tol * (1 + abs(val)) * 10:
        raise ConvergenceError(f"proximal-point model solve did not certify (gap {gap:.3e})",
                               best=y, residual=gap)
    return SubproblemResult(y=y, dual=DualPoint(lam=lam, tau=0.0 if not np.any(model.kappa)
                                                else float(lam @ (model.weight * model.kappa))
                                                * model.norm.norm(y - model.center)),
                            model_value=val, kkt_residual=gap, inner_iterations=total,
                            lower_bound=lb, info={"prox_iterations": it})


def _solve_smooth_primal(model, opts):
    F = model.F
    w = model.weight

    def fun(y):
        return w * float(F.eval_u(model.q(y))) + model.s(y)

    def grad(y):
        return w * (F.grad_u(model.q(y)) @ model.q_jac(y)) + model.s_grad(y)

    def hess(y):
        u = model.q(y)
        pi = F.grad_u(u)
        J = model.q_jac(y)
        H = np.einsum("i,ijk->jk", pi, model.q_hessians(y)) + J.T @ F.hess_u(u) @ J
        return w * H + model.s_hess(y)

    if model.S.kind == "All":
        try:
            y, res, it = _newton(fun, grad, hess, model.center.copy(), model.norm,
                                 opts.newton_tol, opts.newton_max_iter)
        except _Unbounded:
            raise ModelInfeasibleError("smooth model problem is unbounded below") from None
        lb = fun(y) - res ** 2  # crude, exact in the limit
    else:
        L0 = max(np.linalg.eigvalsh(hess(model.S.project(model.center))).max(), 1e-8)
        scale = 1 + abs(fun(model.S.project(model.center)))
        y, res, it = _fista(fun, grad, model.center, model.S, model.norm,
                            opts.inner_tol * scale * 100, opts.inner_max_iter, L0=L0)
        lb = fun(y) - res
    if res > opts.accept_tol * (1 + abs(fun(y))):
        raise ConvergenceError(f"smooth model solve stalled (residual {res:.3e})",
                               best=y, residual=res)
    lam = F.grad_u(model.q(y))
    return SubproblemResult(y=y, dual=DualPoint(lam=lam), model_value=model.value(y),
                            kkt_residual=res, inner_iterations=it, lower_bound=lb)


def solve_model(model, opts=None, lam0=None):
    """Minimize a :class:`ModelProblem`; dispatches on the outer kind."""
    opts = opts or SolverOptions()
    kind = model.F.kind
    if kind == "AdditiveComposite" or (model.m == 1 and model.F.uses_dual):
        return _solve_fixed(model, opts)
    if model.F.uses_dual:
        if model.S.kind != "All" and not model.strictly_convex():
            return _solve_prox(model, opts)
        return _solve_dual(model, opts, lam0)
    return _solve_smooth_primal(model, opts)


# --- the named steps used by the methods ----------------------------------------

def _problem_parts(problem, x):
    f = problem.f
    return f.values(x), f.jacobian(x)


def _check_finite_L(L, p):
    if np.any(~np.isfinite(L)):
        raise InapplicableMethodError(
            f"a component has L_{p} = +inf, so the order-{p} model is not an upper bound")


def full_step_p1(problem, xb, beta=1.0, restricted=False, opts=None):
    """Model step with the first-order model plus L_1/2 ||y - xb||^2 per component."""
    xb = np.asarray(xb, dtype=float)
    L1 = problem.f.L(1)
    _check_finite_L(L1, 1)
    if not np.any(L1 > 0):
        raise InapplicableMethodError("full_step_p1 needs a component with L_1 > 0")
    c, G = _problem_parts(problem, xb)
    S = problem.F.Q.contract(xb, beta) if restricted else problem.F.Q
    model = ModelProblem(problem.F, problem.norm, xb, c, G, a=L1, S=S)
    res = solve_model(model, opts)
    res.info["model"] = model
    return res


def full_step_p2(problem, xb, restricted_beta=None, opts=None):
    """Model step with the second-order model plus L_2/3 ||y - xb||^3 per component."""
    xb = np.asarray(xb, dtype=float)
    L2 = problem.f.L(2)
    _check_finite_L(L2, 2)
    if not np.any(L2 > 0):
        raise InapplicableMethodError("full_step_p2 needs a component with L_2 > 0")
    c, G = _problem_parts(problem, xb)
    Hs = problem.f.hessians(xb)
    S = problem.F.Q if restricted_beta is None else problem.F.Q.contract(xb, restricted_beta)
    model = ModelProblem(problem.F, problem.norm, xb, c, G, Hs=Hs, kappa=L2, S=S)
    res = solve_model(model, opts)
    res.info["model"] = model
    return res


def grad_reg_step(problem, anchor, M, opts=None):
    """argmin F(y, f(x) + <f'(x), y - x>) + M/2 ||y - x||^2 over y in Q."""
    if not M > 0:
        raise ConfigError("grad_reg_step needs M > 0")
    x = np.asarray(anchor, dtype=float)
    c, G = _problem_parts(problem, x)
    model = ModelProblem(problem.F, problem.norm, x, c, G, quad=[(M, x)])
    res = solve_model(model, opts)
    res.info["model"] = model
    return res


def cubic_step(problem, anchor, M, opts=None):
    """argmin F(y, Omega_2(f, x; y)) + M/6 ||y - x||^3 over y in Q."""
    if not M > 0:
        raise ConfigError("cubic_step needs M > 0")
    x = np.asarray(anchor, dtype=float)
    c, G = _problem_parts(problem, x)
    Hs = problem.f.hessians(x)
    model = ModelProblem(problem.F, problem.norm, x, c, G, Hs=Hs, cubic=[(M / 2.0, x)])
    res = solve_model(model, opts)
    res.info["model"] = model
    return res


def contracted_lmo(problem, xk, gamma, p=1, opts=None):
    """argmin F(y, Omega_p(f, x_k; y)) over y in x_k + gamma (Q - x_k)."""
    if not 0 < gamma <= 1:
        raise ConfigError("contraction gamma must lie in (0, 1]")
    if not problem.F.Q.bounded:
        raise InapplicableMethodError("contracted steps need a bounded set Q (Box or Ball)")
    x = np.asarray(xk, dtype=float)
    c, G = _problem_parts(problem, x)
    Hs = problem.f.hessians(x) if p == 2 else None
    S = problem.F.Q.contract(x, gamma)
    model = ModelProblem(problem.F, problem.norm, x, c, G, Hs=Hs, S=S)
    res = solve_model(model, opts)
    res.info["model"] = model
    return res
