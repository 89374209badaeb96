"""Independent reference computations used by the tests.

Nothing here calls the package's solvers: minima come from brute-force
grids (with zooming), derivatives from central differences.
"""

import itertools

import numpy as np


def grid_minimize(fun_batch, lo, hi, points=201, levels=6, zoom=4.0):
    """Minimize a function on the box [lo, hi] by repeated grid search.

    ``fun_batch`` maps an (N, n) array to N values (+inf allowed).  Each
    level evaluates a ``points``^n grid, then shrinks the window around the
    best point by ``points / zoom`` (clipped to the original box).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    a, b = lo.copy(), hi.copy()
    best_x, best_v = None, np.inf
    for _ in range(levels):
        axes = [np.linspace(a[i], b[i], points) for i in range(n)]
        X = np.array(list(itertools.product(*axes))) if n > 1 else axes[0][:, None]
        V = fun_batch(X)
        k = int(np.argmin(V))
        if V[k] < best_v:
            best_x, best_v = X[k].copy(), float(V[k])
        half = zoom * (b - a) / (points - 1)
        a = np.maximum(lo, best_x - half)
        b = np.minimum(hi, best_x + half)
    return best_x, best_v


def fd_grad(fun, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (fun(x + e) - fun(x - e)) / (2 * eps)
    return g


def fd_hess(grad, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = eps
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * eps)
    return 0.5 * (H + H.T)
