"""Independent reference computations used by the tests."""

import itertools

import numpy as np


def lasso_objective(X, y, lam, beta):
    r = y - beta @ X
    return r @ r / (2 * len(y)) + lam * np.abs(beta).sum()


def lasso_enumeration(X, y, lam):
    """Exact lasso minimum by trying every sign/zero pattern.

    For each pattern the smooth problem on the active set is solved with the
    signs fixed; only candidates whose coefficients agree with the pattern
    are kept.  ``X`` is (n_features, N).
    """
    n, N = X.shape
    G = X @ X.T / N
    c = X @ y / N
    best_val, best = lasso_objective(X, y, lam, np.zeros(n)), np.zeros(n)
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        s = np.array(pattern, dtype=float)
        A = np.flatnonzero(s)
        if A.size == 0:
            continue
        sol, *_ = np.linalg.lstsq(G[np.ix_(A, A)], c[A] - lam * s[A], rcond=None)
        if np.any(s[A] * sol < 0):
            continue
        beta = np.zeros(n)
        beta[A] = sol
        val = lasso_objective(X, y, lam, beta)
        if val < best_val:
            best_val, best = val, beta
    return best_val, best


def fopdt_step_samples(gain, time_constant, dead_time, n, dt):
    t = np.arange(n + 1) * dt
    out = np.zeros(n + 1)
    on = t >= dead_time - 1e-12
    out[on] = gain * (1 - np.exp(-(t[on] - dead_time) / time_constant))
    return out
