"""Primal/dual Euclidean norms induced by an SPD operator B, and SPD solves.

Points and covectors are plain 1-D ``numpy`` arrays.  The operator ``B``
fixes the geometry once per problem:

    ||x||   = <Bx, x>^(1/2)
    ||g||_* = <g, B^{-1} g>^(1/2)
"""

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotSPDError

__all__ = ["NormOperator", "norm", "dual_norm", "spd_solve", "cholesky"]

_SYM_RTOL = 1e-12


def cholesky(A):
    """Lower Cholesky factor of ``A``; raises NotSPDError on a bad pivot."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.abs(A).max(), 1.0) if A.size else 1.0
    if np.abs(A - A.T).max(initial=0.0) > _SYM_RTOL * scale:
        raise NotSPDError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("matrix is not positive definite (Cholesky pivot <= 0)") from exc


def spd_solve(A, rhs):
    """Solve ``A x = rhs`` for symmetric positive-definite ``A``."""
    rhs = np.asarray(rhs, dtype=float)
    L = cholesky(A)
    if L.shape[0] != rhs.shape[0]:
        raise DimensionError(f"matrix is {L.shape}, right-hand side has length {rhs.shape[0]}")
    return scipy.linalg.cho_solve((L, True), rhs)


class NormOperator:
    """The SPD operator ``B`` with cached factorization.

    Parameters
    ----------
    kind : {"identity", "diagonal", "dense"}
    data : None, (n,) array of positive weights, or (n, n) SPD matrix.
    n : int
        Dimension; required for the identity, inferred otherwise.
    """

    def __init__(self, kind="identity", data=None, n=None):
        self.kind = kind
        if kind == "identity":
            if n is None:
                raise DimensionError("identity norm needs an explicit dimension")
            self.n = int(n)
            self.data = None
        elif kind == "diagonal":
            d = np.asarray(data, dtype=float).ravel()
            if np.any(~np.isfinite(d)) or np.any(d <= 0):
                raise NotSPDError("diagonal norm weights must be positive")
            self.data = d
            self.n = d.size
        elif kind == "dense":
            B = np.asarray(data, dtype=float)
            self._chol = cholesky(B)
            self.data = B
            self.n = B.shape[0]
        else:
            raise ValueError(f"unknown norm kind {kind!r}")
        if n is not None and int(n) != self.n:
            raise DimensionError(f"norm dimension {self.n} does not match n={n}")

    @classmethod
    def identity(cls, n):
        return cls("identity", n=n)

    @property
    def is_diagonal(self):
        return self.kind in ("identity", "diagonal")

    def matrix(self):
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "diagonal":
            return np.diag(self.data)
        return self.data.copy()

    def diag(self):
        """Diagonal of B (exact for identity/diagonal kinds)."""
        if self.kind == "identity":
            return np.ones(self.n)
        if self.kind == "diagonal":
            return self.data
        return np.diag(self.data).copy()

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n:
            raise DimensionError(f"vector has length {v.shape[-1]}, norm expects {self.n}")
        return v

    def apply(self, x):
        """``B x``; works row-wise on 2-D input."""
        x = self._check(x)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "diagonal":
            return x * self.data
        return x @ self.data.T

    def solve(self, g):
        """``B^{-1} g``; works row-wise on 2-D input."""
        g = self._check(g)
        if self.kind == "identity":
            return g.copy()
        if self.kind == "diagonal":
            return g / self.data
        return scipy.linalg.cho_solve((self._chol, True), g.T).T

    def _to_euclid(self, x):
        """``Lb^T x`` so that ||x|| is its Euclidean length (row-wise on 2-D)."""
        if self.kind == "identity":
            return x
        if self.kind == "diagonal":
            return x * np.sqrt(self.data)
        return x @ self._chol

    def norm(self, x):
        x = self._check(x)
        return float(scipy.linalg.norm(self._to_euclid(x)))

    def dual_norm(self, g):
        g = self._check(g)
        if self.kind == "identity":
            return float(scipy.linalg.norm(g))
        if self.kind == "diagonal":
            return float(scipy.linalg.norm(g / np.sqrt(self.data)))
        return float(scipy.linalg.norm(scipy.linalg.solve_triangular(self._chol, g, lower=True)))

    def norms(self, X):
        """Row-wise primal norms of a 2-D array (scaled to avoid under/overflow)."""
        Z = self._to_euclid(self._check(X))
        s = np.max(np.abs(Z), axis=-1)
        safe = np.where(s > 0, s, 1.0)
        return s * np.sqrt(np.einsum("ij,ij->i", Z / safe[:, None], Z / safe[:, None]))

    def sqrt_factor(self):
        """Lower factor ``Lb`` with ``B = Lb Lb^T``."""
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "diagonal":
            return np.diag(np.sqrt(self.data))
        return self._chol.copy()

    def max_eig(self):
        if self.kind == "identity":
            return 1.0
        if self.kind == "diagonal":
            return float(self.data.max())
        return float(np.linalg.eigvalsh(self.data)[-1])

    def min_eig(self):
        if self.kind == "identity":
            return 1.0
        if self.kind == "diagonal":
            return float(self.data.min())
        return float(np.linalg.eigvalsh(self.data)[0])

    def to_dict(self):
        if self.kind == "identity":
            return {"type": "identity"}
        return {"type": self.kind, "data": self.data.tolist()}

    def __repr__(self):
        return f"NormOperator({self.kind!r}, n={self.n})"


def norm(B, x):
    """Primal norm ``<Bx, x>^{1/2}``."""
    return B.norm(x)


def dual_norm(B, g):
    """Dual norm ``<g, B^{-1} g>^{1/2}``."""
    return B.dual_norm(g)
