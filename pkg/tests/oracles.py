"""Independent reference implementations used to check the library.

Everything here is deliberately written from the mathematical definitions,
not by calling back into the package: finite differences for gradients, a
dense matrix build of the damped L-BFGS operator, a dense build of the
single-pair update, and a looped two-pass variance.  Tests freeze against
these, so keep them dumb and obvious.
"""

from __future__ import annotations

import numpy as np


def fd_gradient(fun, x: np.ndarray, h_scale: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function, coordinatewise."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        h = h_scale * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def dense_inverse_hessian(memory) -> np.ndarray:
    """Explicit matrix for the operator the two-loop recursion applies.

    Start from H0 = inv(gamma_tilde) I at the memory's current scaling and
    fold in each stored pair oldest to newest:
        H <- (I - rho s yhat') H (I - rho yhat s') + rho s s'
    """
    n = memory.pairs[0].s.size if memory.pairs else None
    if n is None:
        raise ValueError("need at least one pair to infer the dimension")
    H = np.eye(n) / memory.gamma_tilde
    for pair in memory.pairs:
        rho = pair.rho_hat
        left = np.eye(n) - rho * np.outer(pair.s, pair.y_hat)
        H = left @ H @ left.T + rho * np.outer(pair.s, pair.s)
    return H


def dense_pair_update(mu: float, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Explicit matrix of one inverse-Hessian update applied to mu*I:
    A = mu V V' + rho s s' with V = I - rho s y', rho = 1/s'y."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    n = s.size
    rho = 1.0 / float(s @ y)
    V = np.eye(n) - rho * np.outer(s, y)
    return mu * (V @ V.T) + rho * np.outer(s, s)


def looped_variance_l1(per_sample_grads: np.ndarray, g: np.ndarray) -> float:
    """Two-pass sample variance, summed over coordinates, written as loops."""
    G = np.asarray(per_sample_grads, dtype=float)
    m, n = G.shape
    total = 0.0
    for j in range(n):
        acc = 0.0
        for i in range(m):
            d = G[i, j] - g[j]
            acc += d * d
        total += acc / (m - 1)
    return total


def enumerate_batches(N: int, m: int):
    """All size-m subsets of range(N) in lexicographic order."""
    from itertools import combinations

    return [np.array(c, dtype=np.int64) for c in combinations(range(N), m)]
