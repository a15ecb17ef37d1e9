"""Model-plant mismatch estimation from routine closed-loop data.

Data windows around reference steps become regression datasets; the
mismatch ``dR`` of an ARX base model is fitted by a row-wise lasso on the
base model's residuals, and the penalty is picked by two-fold
cross-validation between the two windows.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .arx import ArxModel, lagged_regressors
from .lasso import DEFAULT_MAX_SWEEPS, DEFAULT_TOL, Design, LassoConvergenceError, _solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegressionDataset:
    X: np.ndarray
    Y: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        if self.X.shape[1] != self.Y.shape[1]:
            raise ValueError("X and Y must have the same number of columns")

    @property
    def n_samples(self):
        return self.Y.shape[1]

    def merge(self, other):
        return RegressionDataset(np.hstack([self.X, other.X]), np.hstack([self.Y, other.Y]),
                                 np.concatenate([self.indices, other.indices]))


@dataclass(frozen=True)
class MpmEstimate:
    delta_R: np.ndarray
    lam: float
    corrected: ArxModel


@dataclass
class CvReport:
    lambda_grid: np.ndarray
    loss_fold1: np.ndarray
    loss_fold2: np.ndarray
    lambda_star: float
    final_estimate: MpmEstimate
    include_penalty: bool = False
    warnings: list = field(default_factory=list)
    penalty_fold1: np.ndarray = None
    penalty_fold2: np.ndarray = None

    @property
    def loss_sum(self):
        return self.loss_fold1 + self.loss_fold2

    def other_loss_sum(self):
        """The summed curve under the opposite include_penalty choice."""
        if self.penalty_fold1 is None:
            return None
        pen = self.penalty_fold1 + self.penalty_fold2
        return self.loss_sum - pen if self.include_penalty else self.loss_sum + pen

    def to_dict(self, corrected_model_ref=None):
        return {
            "lambda_grid": self.lambda_grid.tolist(),
            "loss_fold1": self.loss_fold1.tolist(),
            "loss_fold2": self.loss_fold2.tolist(),
            "loss_sum": self.loss_sum.tolist(),
            "lambda_star": self.lambda_star,
            "delta_r_l1_norm": float(np.abs(self.final_estimate.delta_R).sum()),
            "include_penalty": self.include_penalty,
            "loss_sum_other": (None if self.penalty_fold1 is None
                               else self.other_loss_sum().tolist()),
            "corrected_model": corrected_model_ref,
            "warnings": list(self.warnings),
        }


def extract_window(record, t_r, half_width, order=0):
    """Sample indices k with k*dt in [t_r - half_width, t_r + half_width].

    Each target also needs ``order`` earlier samples in the record.
    """
    dt = record.sample_period
    lo = int(round((t_r - half_width) / dt))
    hi = int(round((t_r + half_width) / dt))
    if lo - order < 0 or hi >= len(record):
        raise ValueError(
            f"window [{t_r - half_width:g}, {t_r + half_width:g}] min with {order} samples "
            f"of history does not fit in a record of {len(record)} samples")
    return np.arange(lo, hi + 1)


def build_dataset(record, indices, order):
    X = lagged_regressors(record.y, record.u, indices, order)
    return RegressionDataset(X, np.ascontiguousarray(record.y[indices].T), np.asarray(indices))


class _Fold:
    """A dataset with its Gram design and base-model residuals, built once."""

    def __init__(self, dataset, base, standardize):
        self.dataset = dataset
        self.residuals = dataset.Y - base.coefficients @ dataset.X
        self.design = Design(dataset.X, standardize)

    def fit(self, lam, starts=None, max_sweeps=DEFAULT_MAX_SWEEPS, tol=DEFAULT_TOL):
        rows = []
        for r in range(self.residuals.shape[0]):
            start = None if starts is None else starts[r]
            try:
                rows.append(_solve(self.design, self.residuals[r], lam, start, max_sweeps, tol))
            except LassoConvergenceError as err:
                raise LassoConvergenceError(f"output row {r + 1}: {err}",
                                            solution=err.solution, lam=lam) from err
        return np.vstack([s.coefficients for s in rows])

    def path(self, grid, **kw):
        """dR for every lambda in ``grid`` (any order), warm-started high to low."""
        order = np.argsort(-np.asarray(grid), kind="stable")
        out = [None] * len(grid)
        starts = None
        for idx in order:
            dR = self.fit(float(grid[idx]), starts, **kw)
            out[idx] = dR
            starts = dR
        return out


def _as_estimate(base, dR, lam):
    return MpmEstimate(dR, float(lam), base.with_coefficients(base.coefficients + dR))


def estimate_mpm(dataset, base, lam, standardize=True, **kw):
    if dataset.X.shape[0] != base.n_regressors or dataset.Y.shape[0] != base.p:
        raise ValueError("dataset dimensions do not match the base model")
    fold = _Fold(dataset, base, standardize)
    return _as_estimate(base, fold.fit(float(lam), **kw), lam)


def validation_loss(dataset, base, estimate, include_penalty=False):
    """(1/2N)||Y - (R + dR) X||_F^2, optionally plus lam * ||dR||_1."""
    R = base.coefficients + estimate.delta_R
    resid = dataset.Y - R @ dataset.X
    loss = float(np.sum(resid**2) / (2 * dataset.n_samples))
    if include_penalty:
        loss += estimate.lam * float(np.abs(estimate.delta_R).sum())
    return loss


def select_lambda(grid, losses):
    """argmin over the grid; ties go to the larger lambda."""
    grid = np.asarray(grid, dtype=float)
    losses = np.asarray(losses, dtype=float)
    best = np.min(losses)
    tied = np.flatnonzero(losses == best)
    return float(np.max(grid[tied]))


def cross_validate(d1, d2, base, grid, standardize=True, include_penalty=False, **kw):
    """Two-fold cross-validation of the mismatch penalty.

    Fits on one window and scores the other for every lambda, swaps, picks
    the lambda minimizing the summed held-out loss, then refits on both
    windows together.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if d1.n_samples == 0 or d2.n_samples == 0:
        raise ValueError("both datasets must be nonempty")
    losses, penalties = [], []
    for name, train, test in (("fold 1", d1, d2), ("fold 2", d2, d1)):
        fold = _Fold(train, base, standardize)
        try:
            path = fold.path(grid, **kw)
        except LassoConvergenceError as err:
            raise LassoConvergenceError(f"{name}: {err}", err.solution, err.lam) from err
        losses.append(np.array([
            validation_loss(test, base, _as_estimate(base, dR, lam), include_penalty)
            for dR, lam in zip(path, grid)]))
        penalties.append(np.array([lam * np.abs(dR).sum() for dR, lam in zip(path, grid)]))
        log.debug("%s done", name)
    lam_star = select_lambda(grid, losses[0] + losses[1])
    log.info("cross-validation picked lambda* = %g", lam_star)
    final = estimate_mpm(d1.merge(d2), base, lam_star, standardize, **kw)
    return CvReport(grid, losses[0], losses[1], lam_star, final, include_penalty,
                    penalty_fold1=penalties[0], penalty_fold2=penalties[1])


def run_mle_pipeline(record1, record2, t_r, half_width, base, grid, standardize=True,
                     include_penalty=False, **kw):
    """Windows around the reference step in each record, then cross-validation."""
    notes = []
    if record1 is record2 or (len(record1) == len(record2)
                              and np.array_equal(record1.y, record2.y)
                              and np.array_equal(record1.u, record2.u)):
        msg = "both folds come from the same record; cross-validation degenerates to training loss"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    idx1 = extract_window(record1, t_r, half_width, base.order)
    idx2 = extract_window(record2, t_r, half_width, base.order)
    d1 = build_dataset(record1, idx1, base.order)
    d2 = build_dataset(record2, idx2, base.order)
    report = cross_validate(d1, d2, base, grid, standardize, include_penalty, **kw)
    report.warnings.extend(notes)
    return report
