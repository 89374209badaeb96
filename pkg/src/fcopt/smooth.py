"""Smooth convex components f_i, the vector function f = (f_1, ..., f_m),
their Taylor models and the condition constants built from L_p and sigma_{p+1}.

Every component carries *declared* constants (``L1``, ``L2``, ``sigma2``,
``sigma3``).  They are problem data; :func:`default_constants` gives the
closed forms for each kind, and :mod:`fcopt.verify` can only falsify them.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (ConfigError, DimensionError, InconsistentConstantsError,
                     UndefinedConditionNumberError)
from .linalg import NormOperator

__all__ = [
    "Constants", "Quadratic", "AffineLogSumExp", "PowerOfNorm", "Affine", "Sum",
    "VectorFunction", "TaylorModel", "default_constants", "condition_number",
    "beta", "hat_beta", "taylor_eval", "component_from_dict",
]

INF = math.inf


@dataclass(frozen=True)
class Constants:
    L1: float = INF
    L2: float = INF
    sigma2: float = 0.0
    sigma3: float = 0.0

    def L(self, p):
        if p == 1:
            return self.L1
        if p == 2:
            return self.L2
        raise ConfigError(f"only p in {{1, 2}} is supported, got p={p}")

    def sigma(self, degree):
        if degree == 2:
            return self.sigma2
        if degree == 3:
            return self.sigma3
        raise ConfigError(f"only degrees 2 and 3 are supported, got {degree}")

    def __add__(self, other):
        return Constants(self.L1 + other.L1, self.L2 + other.L2,
                         self.sigma2 + other.sigma2, self.sigma3 + other.sigma3)

    def to_dict(self):
        return {k: _num_out(getattr(self, k)) for k in ("L1", "L2", "sigma2", "sigma3")}

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in ("L1", "L2", "sigma2", "sigma3") if k not in d]
        if missing:
            raise ConfigError(f"component constants missing: {missing}")
        vals = {k: _num_in(d[k]) for k in ("L1", "L2", "sigma2", "sigma3")}
        for k, v in vals.items():
            if not v >= 0:
                raise ConfigError(f"constant {k} must be nonnegative, got {v}")
        return cls(**vals)


def _num_out(v):
    return "inf" if v == INF else float(v)


def _num_in(v):
    if isinstance(v, str):
        if v.lower() in ("inf", "+inf", "infinity"):
            return INF
        raise ConfigError(f"cannot parse number {v!r}")
    return float(v)


class _Component:
    kind = None
    constants: Constants

    def __init__(self, n, constants=None):
        self.n = n
        self.constants = constants

    # batch fallbacks; subclasses override with vectorized versions
    def values(self, X):
        return np.array([self.value(x) for x in X])

    def grads(self, X):
        return np.array([self.grad(x) for x in X])

    def hess_forms(self, X, H):
        """``<hess(x_k) h_k, h_k>`` for each row pair."""
        return np.array([h @ self.hess(x) @ h for x, h in zip(X, H)])

    def with_constants(self, constants):
        self.constants = constants
        return self

    def to_dict(self):
        d = {"kind": self.kind, "parameters": self._params()}
        if self.constants is not None:
            d["constants"] = self.constants.to_dict()
        return d

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class Quadratic(_Component):
    """``f(x) = 1/2 <Ax, x> + <b, x> + c`` with symmetric PSD ``A``."""

    kind = "Quadratic"

    def __init__(self, A, b=None, c=0.0, constants=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"Quadratic A must be square, got {A.shape}")
        self.A = 0.5 * (A + A.T)
        self.b = np.zeros(n) if b is None else np.asarray(b, dtype=float).ravel()
        if self.b.shape != (n,):
            raise DimensionError("Quadratic b has the wrong length")
        self.c = float(c)
        super().__init__(n, constants)

    def value(self, x):
        return float(0.5 * x @ self.A @ x + self.b @ x + self.c)

    def grad(self, x):
        return self.A @ x + self.b

    def hess(self, x):
        return self.A.copy()

    def values(self, X):
        return 0.5 * np.einsum("ij,jk,ik->i", X, self.A, X) + X @ self.b + self.c

    def grads(self, X):
        return X @ self.A + self.b

    def hess_forms(self, X, H):
        return np.einsum("ij,jk,ik->i", H, self.A, H)

    def _params(self):
        return {"A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}


class AffineLogSumExp(_Component):
    """``f(x) = ln sum_j exp(<a_j, x> + b_j)``."""

    kind = "AffineLogSumExp"

    def __init__(self, rows, offsets=None, constants=None):
        R = np.atleast_2d(np.asarray(rows, dtype=float))
        self.rows = R
        self.offsets = (np.zeros(R.shape[0]) if offsets is None
                        else np.asarray(offsets, dtype=float).ravel())
        if self.offsets.shape != (R.shape[0],):
            raise DimensionError("AffineLogSumExp needs one offset per row")
        super().__init__(R.shape[1], constants)

    def _softmax(self, z):
        zmax = z.max(axis=-1, keepdims=True)
        e = np.exp(z - zmax)
        s = e.sum(axis=-1, keepdims=True)
        return e / s, (zmax + np.log(s))[..., 0]

    def value(self, x):
        _, v = self._softmax(self.rows @ x + self.offsets)
        return float(v)

    def grad(self, x):
        pi, _ = self._softmax(self.rows @ x + self.offsets)
        return pi @ self.rows

    def hess(self, x):
        pi, _ = self._softmax(self.rows @ x + self.offsets)
        mean = pi @ self.rows
        return (self.rows.T * pi) @ self.rows - np.outer(mean, mean)

    def values(self, X):
        return self._softmax(X @ self.rows.T + self.offsets)[1]

    def grads(self, X):
        pi, _ = self._softmax(X @ self.rows.T + self.offsets)
        return pi @ self.rows

    def hess_forms(self, X, H):
        pi, _ = self._softmax(X @ self.rows.T + self.offsets)
        ah = H @ self.rows.T
        mean = np.einsum("ij,ij->i", pi, ah)
        return np.einsum("ij,ij->i", pi, ah ** 2) - mean ** 2

    def _params(self):
        return {"rows": self.rows.tolist(), "offsets": self.offsets.tolist()}


class PowerOfNorm(_Component):
    """``f(x) = c ||x - x_c||^q`` in the B-norm, ``q >= 2``."""

    kind = "PowerOfNorm"

    def __init__(self, center, degree, coefficient, norm=None, constants=None):
        self.center = np.asarray(center, dtype=float).ravel()
        self.degree = float(degree)
        self.coefficient = float(coefficient)
        if self.degree < 2:
            raise ConfigError("PowerOfNorm degree must be >= 2")
        if self.coefficient <= 0:
            raise ConfigError("PowerOfNorm coefficient must be positive")
        n = self.center.size
        self.norm = norm if norm is not None else NormOperator.identity(n)
        super().__init__(n, constants)

    def value(self, x):
        return self.coefficient * self.norm.norm(x - self.center) ** self.degree

    def grad(self, x):
        h = x - self.center
        r = self.norm.norm(h)
        if r == 0.0:
            return np.zeros(self.n)
        q, c = self.degree, self.coefficient
        return c * q * r ** (q - 2) * self.norm.apply(h)

    def hess(self, x):
        h = x - self.center
        r = self.norm.norm(h)
        q, c = self.degree, self.coefficient
        B = self.norm.matrix()
        if r == 0.0:
            return 2 * c * B if q == 2 else np.zeros((self.n, self.n))
        Bh = self.norm.apply(h)
        out = c * q * r ** (q - 2) * B
        if q != 2:
            out = out + c * q * (q - 2) * r ** (q - 4) * np.outer(Bh, Bh)
        return out

    def values(self, X):
        return self.coefficient * self.norm.norms(X - self.center) ** self.degree

    def grads(self, X):
        Hs = X - self.center
        r = self.norm.norms(Hs)
        q, c = self.degree, self.coefficient
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, c * q * r ** (q - 2), 0.0)
        return scale[:, None] * self.norm.apply(Hs)

    def hess_forms(self, X, H):
        D = X - self.center
        r = self.norm.norms(D)
        q, c = self.degree, self.coefficient
        BH = self.norm.apply(H)
        hBh = np.einsum("ij,ij->i", BH, H)
        dBh = np.einsum("ij,ij->i", self.norm.apply(D), H)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.where(r > 0, c * q * r ** (q - 2), 2 * c if q == 2 else 0.0)
            extra = np.where(r > 0, c * q * (q - 2) * r ** (q - 4) * dBh ** 2, 0.0)
        return base * hBh + extra

    def _params(self):
        return {"center": self.center.tolist(), "degree": self.degree,
                "coefficient": self.coefficient}


class Affine(_Component):
    """``f(x) = <a, x> + b``."""

    kind = "Affine"

    def __init__(self, a, b=0.0, constants=None):
        self.a = np.asarray(a, dtype=float).ravel()
        self.b = float(b)
        super().__init__(self.a.size, constants)

    def value(self, x):
        return float(self.a @ x + self.b)

    def grad(self, x):
        return self.a.copy()

    def hess(self, x):
        return np.zeros((self.n, self.n))

    def values(self, X):
        return X @ self.a + self.b

    def grads(self, X):
        return np.broadcast_to(self.a, X.shape).copy()

    def hess_forms(self, X, H):
        return np.zeros(len(X))

    def _params(self):
        return {"a": self.a.tolist(), "b": self.b}


class Sum(_Component):
    """Sum of components; used by the regularization pipeline."""

    kind = "Sum"

    def __init__(self, terms, constants=None):
        self.terms = list(terms)
        if not self.terms:
            raise ConfigError("Sum needs at least one term")
        n = self.terms[0].n
        if any(t.n != n for t in self.terms):
            raise DimensionError("Sum terms have different dimensions")
        super().__init__(n, constants)

    def value(self, x):
        return float(sum(t.value(x) for t in self.terms))

    def grad(self, x):
        return sum(t.grad(x) for t in self.terms)

    def hess(self, x):
        return sum(t.hess(x) for t in self.terms)

    def values(self, X):
        return sum(t.values(X) for t in self.terms)

    def grads(self, X):
        return sum(t.grads(X) for t in self.terms)

    def hess_forms(self, X, H):
        return sum(t.hess_forms(X, H) for t in self.terms)

    def _params(self):
        return {"terms": [t.to_dict() for t in self.terms]}


def default_constants(comp, norm=None):
    """Closed-form L_1, L_2, sigma_2, sigma_3 of a component w.r.t. ``norm``."""
    norm = norm if norm is not None else NormOperator.identity(comp.n)
    if isinstance(comp, Quadratic):
        eig = scipy.linalg.eigh(comp.A, norm.matrix(), eigvals_only=True)
        return Constants(L1=max(float(eig[-1]), 0.0), L2=0.0,
                         sigma2=max(float(eig[0]), 0.0), sigma3=0.0)
    if isinstance(comp, AffineLogSumExp):
        R = comp.rows
        diffs = R[:, None, :] - R[None, :, :]
        spread = max(norm.dual_norm(d) for d in diffs.reshape(-1, comp.n))
        biggest = max(norm.dual_norm(r) for r in R)
        # variance and third central moment of <a_J, h> under softmax weights
        return Constants(L1=min(spread ** 2 / 4, biggest ** 2), L2=spread ** 3 / 4,
                         sigma2=0.0, sigma3=0.0)
    if isinstance(comp, PowerOfNorm):
        q, c = comp.degree, comp.coefficient
        if q == 2:
            return Constants(L1=2 * c, L2=0.0, sigma2=2 * c, sigma3=0.0)
        if q == 3:
            return Constants(L1=INF, L2=6 * c, sigma2=0.0, sigma3=1.5 * c)
        return Constants(L1=INF, L2=INF, sigma2=0.0, sigma3=0.0)
    if isinstance(comp, Affine):
        return Constants(0.0, 0.0, 0.0, 0.0)
    if isinstance(comp, Sum):
        total = Constants(0.0, 0.0, 0.0, 0.0)
        for t in comp.terms:
            total = total + (t.constants or default_constants(t, norm))
        return total
    raise TypeError(f"unknown component {comp!r}")


def component_from_dict(d, norm=None, require_constants=True):
    kind, params = d["kind"], d.get("parameters", {})
    if kind == "Quadratic":
        comp = Quadratic(params["A"], params.get("b"), params.get("c", 0.0))
    elif kind == "AffineLogSumExp":
        comp = AffineLogSumExp(params["rows"], params.get("offsets"))
    elif kind == "PowerOfNorm":
        comp = PowerOfNorm(params["center"], params["degree"], params["coefficient"], norm=norm)
    elif kind == "Affine":
        comp = Affine(params["a"], params.get("b", 0.0))
    elif kind == "Sum":
        comp = Sum([component_from_dict(t, norm, require_constants=False)
                    for t in params["terms"]])
    else:
        raise ConfigError(f"unknown component kind {kind!r}")
    if "constants" in d:
        comp.constants = Constants.from_dict(d["constants"])
    elif require_constants:
        raise ConfigError(f"component {kind} has no declared constants")
    return comp


class TaylorModel:
    """Snapshot of f at an anchor: values, gradients and (p = 2) Hessians.

    For general p the model is
    ``Omega_p(f, x; y) = f(x) + sum_{k=1}^p D^k f(x)[y - x]^k / k!``;
    only p in {1, 2} is materialized here.
    """

    def __init__(self, f, x, p):
        if p not in (1, 2):
            raise ConfigError("TaylorModel supports p in {1, 2}")
        self.order = p
        self.anchor = np.array(x, dtype=float)
        self.values = f.values(self.anchor)
        self.jacobian = f.jacobian(self.anchor)
        self.hessians = f.hessians(self.anchor) if p == 2 else None

    def __call__(self, y):
        h = np.asarray(y, dtype=float) - self.anchor
        out = self.values + self.jacobian @ h
        if self.order == 2:
            out = out + 0.5 * np.einsum("j,ijk,k->i", h, self.hessians, h)
        return out


def taylor_eval(model, y):
    return model(y)


class VectorFunction:
    """The vector function f = (f_1, ..., f_m) sharing dimension n and norm B."""

    def __init__(self, components, norm=None):
        self.components = list(components)
        if not self.components:
            raise ConfigError("a VectorFunction needs at least one component")
        self.n = self.components[0].n
        if any(c.n != self.n for c in self.components):
            raise DimensionError("components have different dimensions")
        self.norm = norm if norm is not None else NormOperator.identity(self.n)
        for c in self.components:
            if c.constants is None:
                c.constants = default_constants(c, self.norm)

    @property
    def m(self):
        return len(self.components)

    def values(self, x):
        return np.array([c.value(x) for c in self.components])

    def jacobian(self, x):
        return np.array([c.grad(x) for c in self.components]).reshape(self.m, self.n)

    def hessians(self, x):
        return np.array([c.hess(x) for c in self.components]).reshape(self.m, self.n, self.n)

    def L(self, p):
        return np.array([c.constants.L(p) for c in self.components])

    def sigma(self, degree):
        return np.array([c.constants.sigma(degree) for c in self.components])

    def gamma(self, p):
        out = []
        for c in self.components:
            L = c.constants.L(p)
            out.append(np.nan if L == 0 else condition_number(c, p))
        return np.array(out)

    def taylor(self, x, p):
        return TaylorModel(self, x, p)


def condition_number(component, p):
    """gamma_p = sigma_{p+1} / L_p, checked against gamma_p <= 1/p!."""
    L = component.constants.L(p)
    sigma = component.constants.sigma(p + 1)
    if L == 0:
        raise UndefinedConditionNumberError(
            f"L_{p} = 0 for {component!r}: condition number undefined")
    if L == INF:
        return 0.0
    gamma = sigma / L
    if gamma > (1 + 1e-12) / math.factorial(p):
        raise InconsistentConstantsError(
            f"gamma_{p} = {gamma:.6g} exceeds 1/{p}! for a full-domain component")
    return gamma


def beta(component, p, alpha):
    """beta_p(f, alpha) = (p! g)^{1/p} / ((1 + alpha)^{1/p} + (p! g)^{1/p})."""
    if alpha < 0:
        raise ConfigError("alpha must be nonnegative")
    g = condition_number(component, p)
    t = (math.factorial(p) * g) ** (1.0 / p)
    return t / ((1.0 + alpha) ** (1.0 / p) + t)


def hat_beta(f, p):
    """min_i beta_p(f_i, p).

    Components with L_p(f_i) = 0 (affine, or quadratic when p = 2) satisfy
    the vector growth inequality for any beta in [0, 1] and are left out of
    the minimum; if every component is left out the result is 1.
    """
    vals = [beta(c, p, p) for c in f.components if c.constants.L(p) != 0]
    return min(vals) if vals else 1.0
