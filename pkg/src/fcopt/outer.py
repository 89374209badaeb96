"""The outer function F(x, u) and the simple sets Q it restricts x to.

Built-in kinds::

    ConstraintForm      u1          if u_i <= 0 (i >= 2) and x in Q
    AdditiveComposite   u1 + <c, x> if x in Q
    MaxForm             max_i u_i   if x in Q
    LogSumExpForm       ln sum_i exp(u_i)   (optionally restricted to Q)
    SquaredHinge        sum_i max(u_i, 0)^2 (convex and monotone, *not*
                        subhomogeneous; kept as a negative control)
"""

import itertools
import math

import numpy as np

from .errors import ConfigError, DimensionError
from .linalg import NormOperator
from .report import CheckReport, from_violations

__all__ = ["SimpleSet", "OuterFunction", "FEAS_TOL", "eval_F", "F_of_constants",
           "check_subhomogeneous", "domain_membership", "project_to_Q"]

FEAS_TOL = 1e-9
INF = math.inf


class SimpleSet:
    """``All``, ``Box[lower, upper]`` or ``Ball(center, radius)`` (B-norm radius)."""

    def __init__(self, kind="All", lower=None, upper=None, center=None, radius=None,
                 norm=None, n=None):
        self.kind = kind
        self.lower = self.upper = self.center = None
        self.radius = None
        if kind == "All":
            self.n = n
        elif kind == "Box":
            self.lower = np.asarray(lower, dtype=float).ravel()
            self.upper = np.asarray(upper, dtype=float).ravel()
            if self.lower.shape != self.upper.shape:
                raise DimensionError("Box bounds have different lengths")
            if np.any(self.lower > self.upper):
                raise ConfigError("Box needs lower <= upper")
            if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
                raise ConfigError("Box bounds must be finite")
            self.n = self.lower.size
        elif kind == "Ball":
            self.center = np.asarray(center, dtype=float).ravel()
            self.radius = float(radius)
            if not self.radius > 0:
                raise ConfigError("Ball radius must be positive")
            self.n = self.center.size
        else:
            raise ConfigError(f"unknown set kind {kind!r}")
        if n is not None and self.n != n:
            raise DimensionError(f"set has dimension {self.n}, expected {n}")
        self.norm = norm if norm is not None or self.n is None else NormOperator.identity(self.n)

    @classmethod
    def all(cls, n=None):
        return cls("All", n=n)

    @classmethod
    def box(cls, lower, upper, norm=None):
        return cls("Box", lower=lower, upper=upper, norm=norm)

    @classmethod
    def ball(cls, center, radius, norm=None):
        return cls("Ball", center=center, radius=radius, norm=norm)

    @property
    def bounded(self):
        return self.kind != "All"

    def bind(self, norm):
        """Copy of this set measured in ``norm``."""
        out = SimpleSet.__new__(SimpleSet)
        out.__dict__.update(self.__dict__)
        out.norm = norm
        out.n = norm.n if self.n is None else self.n
        return out

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        if self.kind == "All":
            return True
        if self.kind == "Box":
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        return self.norm.norm(x - self.center) <= self.radius + tol

    def contains_batch(self, X, tol=FEAS_TOL):
        X = np.atleast_2d(X)
        if self.kind == "All":
            return np.ones(len(X), dtype=bool)
        if self.kind == "Box":
            return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)
        return self.norm.norms(X - self.center) <= self.radius + tol

    def project(self, x):
        """Clamp (Box, Euclidean) or radial scaling in the B-norm (Ball)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "All":
            return x.copy()
        if self.kind == "Box":
            return np.clip(x, self.lower, self.upper)
        d = x - self.center
        r = self.norm.norm(d)
        if r <= self.radius:
            return x.copy()
        return self.center + d * (self.radius / r)

    def lmo(self, g):
        """A minimizer of ``<g, v>`` over the set; ties go to the lower bound."""
        g = np.asarray(g, dtype=float)
        if self.kind == "All":
            raise ConfigError("linear minimization over an unbounded set")
        if self.kind == "Box":
            return np.where(g > 0, self.lower, np.where(g < 0, self.upper, self.lower))
        gn = self.norm.dual_norm(g)
        if gn == 0.0:
            return self.center.copy()
        return self.center - self.norm.solve(g) * (self.radius / gn)

    def support(self, g):
        """``min_{v in set} <g, v>``."""
        return float(np.dot(g, self.lmo(g)))

    def contract(self, anchor, gamma):
        """The set ``anchor + gamma (self - anchor)``."""
        anchor = np.asarray(anchor, dtype=float)
        if self.kind == "All" or gamma == 1.0:
            return self
        if self.kind == "Box":
            lo = anchor + gamma * (self.lower - anchor)
            hi = anchor + gamma * (self.upper - anchor)
            return SimpleSet("Box", lower=np.minimum(lo, hi), upper=np.maximum(lo, hi),
                             norm=self.norm)
        return SimpleSet("Ball", center=anchor + gamma * (self.center - anchor),
                         radius=gamma * self.radius, norm=self.norm)

    def diameter(self):
        """``max ||x - y||`` over the set, in the B-norm."""
        if self.kind == "All":
            return INF
        if self.kind == "Ball":
            return 2.0 * self.radius
        w = self.upper - self.lower
        if self.norm.is_diagonal:
            return float(np.sqrt(np.sum(self.norm.diag() * w ** 2)))
        # maximum of a convex quadratic over the box of differences is at a vertex
        if self.n > 20:
            raise ConfigError("exact Box diameter in a dense norm needs n <= 20")
        best = 0.0
        for signs in itertools.product((-1.0, 1.0), repeat=self.n - 1):
            d = w * np.concatenate(([1.0], signs))
            best = max(best, self.norm.norm(d))
        return best

    def sample(self, rng, k, scale=1.0):
        """``k`` points in the set (uniform on a Box, radial on a Ball)."""
        if self.kind == "All":
            return rng.normal(scale=scale, size=(k, self.n))
        if self.kind == "Box":
            return self.lower + rng.random((k, self.n)) * (self.upper - self.lower)
        d = rng.normal(size=(k, self.n))
        d /= np.maximum(self.norm.norms(d), 1e-300)[:, None]
        r = self.radius * rng.random(k) ** (1.0 / self.n)
        return self.center + d * r[:, None]

    def to_dict(self):
        if self.kind == "All":
            return {"kind": "All"}
        if self.kind == "Box":
            return {"kind": "Box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        return {"kind": "Ball", "center": self.center.tolist(), "radius": self.radius}

    @classmethod
    def from_dict(cls, d, norm=None):
        if d is None:
            return cls.all(norm.n if norm is not None else None).bind(norm) if norm else cls.all()
        kind = d.get("kind", "All")
        if kind == "All":
            s = cls.all(norm.n if norm is not None else None)
            return s.bind(norm) if norm is not None else s
        if kind == "Box":
            return cls.box(d["lower"], d["upper"], norm=norm)
        if kind == "Ball":
            return cls.ball(d["center"], d["radius"], norm=norm)
        raise ConfigError(f"unknown set kind {kind!r}")

    def __repr__(self):
        if self.kind == "Box":
            return f"Box({self.lower.tolist()}, {self.upper.tolist()})"
        if self.kind == "Ball":
            return f"Ball({self.center.tolist()}, {self.radius})"
        return "All"


KINDS = ("ConstraintForm", "AdditiveComposite", "MaxForm", "LogSumExpForm", "SquaredHinge")
_DEFAULT_SUBHOMO = {k: True for k in KINDS}
_DEFAULT_SUBHOMO["SquaredHinge"] = False


class OuterFunction:
    """F(x, u) for one of the built-in kinds.

    Parameters
    ----------
    kind : str
    m : int
        Number of u-coordinates.
    Q : SimpleSet, optional
        Restriction on x (indicator); ``All`` by default.
    linear : array, optional
        The linear part ``c`` of psi for ``AdditiveComposite``.
    subhomogeneous : bool, optional
        Claimed subhomogeneity in u; defaults to the true property of the kind.
    """

    def __init__(self, kind, m, Q=None, linear=None, subhomogeneous=None):
        if kind not in KINDS:
            raise ConfigError(f"unknown outer kind {kind!r}")
        if m < 1:
            raise ConfigError("outer function needs m >= 1")
        if kind == "AdditiveComposite" and m != 1:
            raise ConfigError("AdditiveComposite uses exactly one smooth component")
        self.kind = kind
        self.m = int(m)
        self.Q = Q if Q is not None else SimpleSet.all()
        self.linear = None if linear is None else np.asarray(linear, dtype=float).ravel()
        if self.linear is not None and kind != "AdditiveComposite":
            raise ConfigError("a linear term is only allowed for AdditiveComposite")
        self.subhomogeneous = (_DEFAULT_SUBHOMO[kind] if subhomogeneous is None
                               else bool(subhomogeneous))

    # structure flags used by the subproblem engine
    @property
    def uses_dual(self):
        return self.kind in ("ConstraintForm", "MaxForm")

    @property
    def is_smooth(self):
        return self.kind in ("LogSumExpForm", "SquaredHinge")

    def _check_u(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.m:
            raise DimensionError(f"u has length {u.shape[-1]}, F expects m={self.m}")
        return u

    def eval_u(self, u):
        """u-part of F (no x-dependence); vectorized over rows."""
        u = self._check_u(u)
        if self.kind in ("ConstraintForm", "AdditiveComposite"):
            if self.m == 1:
                return u[..., 0] * 1.0
            ok = np.all(u[..., 1:] <= FEAS_TOL, axis=-1)
            return np.where(ok, u[..., 0], INF)
        if self.kind == "MaxForm":
            return u.max(axis=-1)
        if self.kind == "LogSumExpForm":
            top = u.max(axis=-1)
            with np.errstate(invalid="ignore"):
                return top + np.log(np.exp(u - top[..., None]).sum(axis=-1))
        return (np.maximum(u, 0.0) ** 2).sum(axis=-1)

    def grad_u(self, u):
        """A subgradient in u (the gradient for smooth kinds)."""
        u = self._check_u(u)
        out = np.zeros_like(u)
        if self.kind in ("ConstraintForm", "AdditiveComposite"):
            out[..., 0] = 1.0
        elif self.kind == "MaxForm":
            idx = np.argmax(u, axis=-1)
            np.put_along_axis(out, np.expand_dims(idx, -1), 1.0, axis=-1)
        elif self.kind == "LogSumExpForm":
            e = np.exp(u - u.max(axis=-1, keepdims=True))
            out = e / e.sum(axis=-1, keepdims=True)
        else:
            out = 2.0 * np.maximum(u, 0.0)
        return out

    def hess_u(self, u):
        u = self._check_u(u)
        if self.kind == "LogSumExpForm":
            pi = self.grad_u(u)
            return np.diag(pi) - np.outer(pi, pi)
        if self.kind == "SquaredHinge":
            return np.diag(2.0 * (u > 0))
        return np.zeros((self.m, self.m))

    def psi(self, x):
        """The x-only part: ``<c, x>`` for AdditiveComposite, else 0 (on Q)."""
        if self.linear is None:
            return 0.0
        return float(self.linear @ x)

    def in_x_domain(self, x, tol=FEAS_TOL):
        return self.Q.contains(x, tol)

    def u_in_domain(self, u):
        return bool(np.isfinite(self.eval_u(u)))

    def eval(self, x, u):
        if not self.in_x_domain(x):
            return INF
        return float(self.eval_u(u)) + self.psi(x)

    def eval_batch(self, X, U):
        X = np.atleast_2d(X)
        vals = np.asarray(self.eval_u(U), dtype=float)
        if self.linear is not None:
            vals = vals + X @ self.linear
        return np.where(self.Q.contains_batch(X), vals, INF)

    def F_of_constants(self, L):
        """``sup_x F(x, L)`` in closed form (the linear part of psi is not
        part of the u-dependence and is left out)."""
        L = np.asarray(self._check_u(L), dtype=float)
        if self.kind in ("ConstraintForm", "AdditiveComposite"):
            if self.m > 1 and np.any(L[1:] > 0):
                return INF
            return float(L[0])
        if self.kind == "MaxForm":
            return float(L.max())
        if np.any(np.isinf(L)):
            return INF
        return float(self.eval_u(L))

    def to_dict(self):
        d = {"kind": self.kind, "m": self.m, "Q": self.Q.to_dict(),
             "subhomogeneous": self.subhomogeneous}
        if self.linear is not None:
            d["parameters"] = {"linear": self.linear.tolist()}
        return d

    @classmethod
    def from_dict(cls, d, m, norm=None):
        params = d.get("parameters") or {}
        Q = SimpleSet.from_dict(d.get("Q"), norm=norm)
        return cls(d["kind"], int(d.get("m", m)), Q=Q, linear=params.get("linear"),
                   subhomogeneous=d.get("subhomogeneous"))

    def __repr__(self):
        return f"OuterFunction({self.kind}, m={self.m}, Q={self.Q!r})"


def eval_F(F, x, u):
    return F.eval(x, u)


def F_of_constants(F, L):
    return F.F_of_constants(L)


def domain_membership(F, x):
    return F.in_x_domain(x)


def project_to_Q(Q, x):
    return Q.project(x)


def _sample_u(rng, m, k, scale):
    return rng.normal(scale=scale, size=(k, m))


def check_subhomogeneous(F, x=None, samples=1000, seed=0, slack=1e-9, scale=2.0):
    """Sample ``F(x, u + t v) <= F(x, u) + t F(x, v)`` and
    ``<g_u, u> <= F(x, u)``; returns a CheckReport with the worst witness.

    Only pairs where all three points lie in the domain D(x) count.
    """
    rng = np.random.default_rng(seed)
    U = _sample_u(rng, F.m, samples, scale)
    V = _sample_u(rng, F.m, samples, scale)
    T = rng.exponential(2.0, size=samples)
    if F.kind == "ConstraintForm" and F.m > 1:
        # keep constraint coordinates feasible so the check is informative
        U[:, 1:] = -np.abs(U[:, 1:])
        V[:, 1:] = -np.abs(V[:, 1:])
    fu, fv = F.eval_u(U), F.eval_u(V)
    W = U + T[:, None] * V
    fw = F.eval_u(W)
    valid = np.isfinite(fu) & np.isfinite(fv) & np.isfinite(fw)
    with np.errstate(invalid="ignore"):
        v3 = np.where(valid, fw - fu - T * fv - slack * (1 + np.abs(fu) + T * np.abs(fv)), -INF)
    G = F.grad_u(U)
    v1 = np.where(np.isfinite(fu), np.einsum("ij,ij->i", G, U) - fu - slack * (1 + np.abs(fu)), -INF)
    viol = np.maximum(v3, v1)
    rep = from_violations("subhomogeneous", viol, {"u": U, "v": V, "t": T,
                                                   "lhs_ray": fw, "rhs_ray": fu + T * fv})
    rep.details = {"kind": F.kind, "ray_violations": int(np.sum(v3 > 0)),
                   "gradient_violations": int(np.sum(v1 > 0))}
    return rep
