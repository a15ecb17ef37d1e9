"""L1-regularized least squares by cyclic coordinate descent.

Every routine here works with predictors laid out feature-major: an
``(n_features, n_samples)`` matrix whose columns are samples, and a target
vector of length ``n_samples``.  The objective is

    (1 / 2N) * ||y - beta @ X||^2 + lam * ||beta||_1

with no intercept.  When ``standardize`` is on, each predictor row is divided
by its root-mean-square before fitting (the penalty acts on the rescaled
coefficients) and coefficients are mapped back to the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 100_000


class LassoConvergenceError(RuntimeError):
    """Raised when coordinate descent runs out of sweeps.

    The best iterate found is kept on ``solution`` so callers can inspect how
    far from optimal it was.
    """

    def __init__(self, message, solution=None, lam=None):
        super().__init__(message)
        self.solution = solution
        self.lam = lam

    @property
    def kkt_residual(self):
        return None if self.solution is None else self.solution.kkt_residual


@dataclass(frozen=True)
class LassoProblem:
    predictors: np.ndarray
    targets: np.ndarray
    lam: float
    standardize: bool = True
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class LassoSolution:
    coefficients: np.ndarray
    objective_value: float
    kkt_residual: float
    sweeps_used: int
    lam: float


def soft_threshold(z, gamma):
    """sign(z) * max(|z| - gamma, 0); works on scalars and arrays."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@njit(cache=True, nogil=True)
def _kkt_from_grad(q, beta, lam):
    # q = -(gradient of the smooth part) = X r / N
    worst = 0.0
    for j in range(q.shape[0]):
        if beta[j] == 0.0:
            v = abs(q[j]) - lam
        elif beta[j] > 0.0:
            v = abs(q[j] - lam)
        else:
            v = abs(q[j] + lam)
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _sweep(G, q, beta, lam, coords):
    biggest = 0.0
    n = G.shape[0]
    for idx in range(coords.shape[0]):
        j = coords[idx]
        gjj = G[j, j]
        if gjj <= 0.0:
            continue
        old = beta[j]
        z = q[j] + gjj * old
        if z > lam:
            new = (z - lam) / gjj
        elif z < -lam:
            new = (z + lam) / gjj
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            beta[j] = new
            for i in range(n):
                q[i] -= delta * G[i, j]
            step = abs(delta) * gjj
            if step > biggest:
                biggest = step
    return biggest


@njit(cache=True, nogil=True)
def _coordinate_descent(G, c, lam, beta, max_sweeps, tol, inner_cap):
    """Full sweeps alternated with sweeps over the active set.

    Returns (sweeps used, kkt residual).  ``beta`` is updated in place.
    """
    n = G.shape[0]
    every = np.arange(n)
    q = c - G @ beta
    sweeps = 0
    kkt = _kkt_from_grad(q, beta, lam)
    while sweeps < max_sweeps and kkt > tol:
        _sweep(G, q, beta, lam, every)
        sweeps += 1
        active = np.nonzero(beta)[0]
        inner = 0
        while active.shape[0] > 0 and inner < inner_cap and sweeps < max_sweeps:
            biggest = _sweep(G, q, beta, lam, active)
            sweeps += 1
            inner += 1
            if biggest < 0.1 * tol:
                break
        # incremental updates drift; refresh before testing optimality
        q = c - G @ beta
        kkt = _kkt_from_grad(q, beta, lam)
    return sweeps, kkt


class Design:
    """Gram statistics of a predictor matrix, shared across targets and lambdas."""

    def __init__(self, predictors, standardize=True):
        X = np.asarray(predictors, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"predictors must be 2-D, got shape {X.shape}")
        if X.shape[1] < 1:
            raise ValueError("need at least one sample")
        if not np.all(np.isfinite(X)):
            raise ValueError("predictors contain non-finite values")
        self.predictors = X
        self.n_features, self.n_samples = X.shape
        self.standardize = standardize
        raw_gram = X @ X.T / self.n_samples
        if standardize:
            rms = np.sqrt(np.clip(np.diag(raw_gram), 0.0, None))
            # zero-variance rows are pinned at coefficient 0
            self.scale = np.where(rms > 0, rms, 0.0)
            inv = np.where(rms > 0, 1.0 / np.where(rms > 0, rms, 1.0), 0.0)
            self._inv = inv
            self.gram = raw_gram * inv[:, None] * inv[None, :]
        else:
            self.scale = np.ones(self.n_features)
            self._inv = np.ones(self.n_features)
            self.gram = raw_gram
        self.gram = np.ascontiguousarray(self.gram)

    def correlations(self, targets):
        y = np.asarray(targets, dtype=float).ravel()
        if y.shape[0] != self.n_samples:
            raise ValueError(
                f"targets have {y.shape[0]} samples, predictors have {self.n_samples}"
            )
        if not np.all(np.isfinite(y)):
            raise ValueError("targets contain non-finite values")
        return (self.predictors @ y) / self.n_samples * self._inv

    def lambda_max(self, targets):
        """Smallest lam at which the all-zero vector is optimal."""
        return float(np.max(np.abs(self.correlations(targets)), initial=0.0))

    def to_original(self, scaled_beta):
        return scaled_beta * self._inv

    def to_scaled(self, beta):
        return np.asarray(beta, dtype=float) * self.scale

    def objective(self, targets, beta, lam):
        y = np.asarray(targets, dtype=float).ravel()
        r = y - beta @ self.predictors
        return float(r @ r / (2 * self.n_samples) + lam * np.abs(self.to_scaled(beta)).sum())

    def kkt(self, targets, beta, lam):
        b = self.to_scaled(beta)
        q = self.correlations(targets) - self.gram @ b
        return float(_kkt_from_grad(q, b, lam))


def _face_step(G, c, lam, beta):
    """One Newton step on the smooth problem over the current support and signs.

    The step is the minimum-norm least-squares direction (the face Gram can be
    singular), line-searched exactly and cut where the first coefficient
    would change sign; that coefficient is set to zero.
    """
    support = np.flatnonzero(beta)
    if support.size == 0:
        return None
    signs = np.sign(beta[support])
    b = beta[support]
    Gaa = G[np.ix_(support, support)]
    resid = c[support] - lam * signs - Gaa @ b
    direction, *_ = np.linalg.lstsq(Gaa, resid, rcond=1e-13)
    curv = direction @ Gaa @ direction
    slope = resid @ direction
    if not (curv > 0 and slope > 0):
        return None
    t = slope / curv
    shrinking = signs * direction < 0
    hit = None
    if np.any(shrinking):
        ratios = -b[shrinking] / direction[shrinking]
        k = int(np.argmin(ratios))
        if ratios[k] < t:
            t = ratios[k]
            hit = np.flatnonzero(shrinking)[k]
    out = beta.copy()
    out[support] = b + t * direction
    if hit is not None:
        out[support[hit]] = 0.0
    return out


def _gram_objective(G, c, lam, b):
    return 0.5 * b @ G @ b - c @ b + lam * np.abs(b).sum()


def _least_squares(design, targets):
    # min-norm solution in the scaled coordinates; zero-variance rows stay 0
    keep = design.scale > 0 if design.standardize else np.ones(design.n_features, bool)
    X = design.predictors[keep] * design._inv[keep, None]
    y = np.asarray(targets, dtype=float).ravel()
    sol, *_ = np.linalg.lstsq(X.T, y, rcond=None)
    b = np.zeros(design.n_features)
    b[keep] = sol
    return b


def _solve(design, targets, lam, start=None, max_sweeps=DEFAULT_MAX_SWEEPS,
           tol=DEFAULT_TOL):
    G = design.gram
    c = design.correlations(targets)
    if lam == 0.0:
        b = _least_squares(design, targets)
        beta = design.to_original(b)
        kkt = float(_kkt_from_grad(c - G @ b, b, 0.0))
        return LassoSolution(beta, design.objective(targets, beta, 0.0), kkt, 0, 0.0)

    b = np.zeros(design.n_features) if start is None else design.to_scaled(start).copy()
    if lam >= np.max(np.abs(c), initial=0.0):
        b[:] = 0.0
    used = 0
    kkt = np.inf
    # a polish after every burst of sweeps cuts the tail on ill-conditioned data
    burst = 50
    while used < max_sweeps:
        n, kkt = _coordinate_descent(G, c, lam, b, min(burst, max_sweeps - used), tol, 200)
        used += int(n)
        if kkt <= tol:
            break
        for _ in range(20):
            cand = _face_step(G, c, lam, b)
            # rounding on a near-singular face can make a step useless; stop then
            if cand is None or _gram_objective(G, c, lam, cand) > _gram_objective(G, c, lam, b):
                break
            b = cand
        kkt = float(_kkt_from_grad(c - G @ b, b, lam))
        if kkt <= tol:
            break
        burst = min(2 * burst, 5000)
    beta = design.to_original(b)
    sol = LassoSolution(beta, design.objective(targets, beta, lam), float(kkt), used, float(lam))
    if kkt > tol:
        raise LassoConvergenceError(
            f"lasso did not converge at lam={lam:g}: kkt residual {kkt:.3g} after "
            f"{used} sweeps", solution=sol, lam=lam)
    return sol


def lasso_fit(problem: LassoProblem, start=None) -> LassoSolution:
    """Minimize the lasso objective for one target vector.

    ``start`` is an optional warm-start coefficient vector in the original
    scale.  Raises LassoConvergenceError if the KKT residual does not drop
    below ``problem.tol`` within ``problem.max_sweeps`` sweeps.
    """
    design = Design(problem.predictors, problem.standardize)
    return _solve(design, problem.targets, float(problem.lam), start,
                  problem.max_sweeps, problem.tol)


def lasso_path(predictors, targets, lambdas, standardize=True,
               max_sweeps=DEFAULT_MAX_SWEEPS, tol=DEFAULT_TOL):
    """Fit a descending sequence of lambdas, warm-starting each from the last.

    ``predictors`` may be a prebuilt :class:`Design`.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) > 0):
        raise ValueError("lambda grid must be sorted in descending order")
    design = predictors if isinstance(predictors, Design) else Design(predictors, standardize)
    out = []
    start = None
    for lam in lambdas:
        try:
            sol = _solve(design, targets, float(lam), start, max_sweeps, tol)
        except LassoConvergenceError as err:
            raise LassoConvergenceError(f"path failed at lam={lam:g}: {err}",
                                        solution=err.solution, lam=float(lam)) from err
        out.append(sol)
        start = sol.coefficients
    return out


def kkt_residual(predictors, targets, lam, coefficients, standardize=False):
    """Largest violation of the lasso optimality conditions.

    With g_j = -(1/N) x_j . (y - beta X): zero coefficients need
    |g_j| <= lam, nonzero ones need g_j + lam * sign(beta_j) = 0.
    """
    design = Design(predictors, standardize)
    return design.kkt(targets, np.asarray(coefficients, dtype=float), float(lam))
