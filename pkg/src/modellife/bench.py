"""Step-response benchmark and response-curve readouts.

Channels are indexed (output, input), the same way as the gain matrix K_ij.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arx
from .plant import TransferMatrixModel, analytic_impulse_response, analytic_step_response


@dataclass(frozen=True)
class ResponseCurve:
    values: np.ndarray
    sample_period: float
    output_index: int
    input_index: int
    kind: str = "step"

    @property
    def times(self):
        return np.arange(len(self.values)) * self.sample_period


@dataclass(frozen=True)
class BenchmarkResult:
    E: float
    per_channel: np.ndarray
    horizon: float


def _n_samples(horizon_minutes, dt):
    n = horizon_minutes / dt
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"horizon {horizon_minutes:g} min is not a multiple of dt={dt:g}")
    return int(round(n))


def response_grid(model, horizon_minutes=100.0, dt=0.2, kind="step"):
    """Responses of every channel, shape (N+1, p, m).

    Transfer-matrix models are sampled from the continuous formulas; ARX
    models are run free from a zero history.
    """
    n = _n_samples(horizon_minutes, dt)
    if isinstance(model, arx.ArxModel):
        if abs(model.sample_period - dt) > 1e-12:
            raise ValueError("ARX model sample period differs from the benchmark's")
        return arx.response_matrix(model, n, kind)
    if isinstance(model, TransferMatrixModel):
        t = np.arange(n + 1) * dt
        fn = analytic_step_response if kind == "step" else analytic_impulse_response
        out = np.empty((n + 1, model.p, model.m))
        for i in range(model.p):
            for j in range(model.m):
                out[:, i, j] = fn(model.channel(i + 1, j + 1), t)
        return out
    raise TypeError(f"cannot compute responses of {type(model).__name__}")


def response_curve(model, output_index, input_index, horizon_minutes=100.0, dt=0.2,
                   kind="step"):
    grid = response_grid(model, horizon_minutes, dt, kind)
    return ResponseCurve(grid[:, output_index - 1, input_index - 1], dt, output_index,
                         input_index, kind)


def step_benchmark(truth, candidate, horizon_minutes=100.0, dt=0.2):
    """Sum of squared step-response differences over all channels, k = 0..N."""
    a = response_grid(truth, horizon_minutes, dt)
    b = response_grid(candidate, horizon_minutes, dt)
    if a.shape != b.shape:
        raise ValueError(f"models have different channel grids: {a.shape[1:]} vs {b.shape[1:]}")
    per = np.sum((a - b) ** 2, axis=0)
    return BenchmarkResult(float(per.sum()), per, float(horizon_minutes))


def final_gain(curve):
    """Mean of the last 5% of a settled step response."""
    v = np.asarray(curve.values if isinstance(curve, ResponseCurve) else curve, dtype=float)
    tail = max(1, int(np.ceil(0.05 * len(v))))
    return float(np.mean(v[-tail:]))


def peak_delay(curve, sample_period=None):
    """Time of the largest-magnitude impulse sample (earliest on ties)."""
    if isinstance(curve, ResponseCurve):
        values, dt = curve.values, curve.sample_period
    else:
        values, dt = np.asarray(curve, dtype=float), sample_period
    if len(values) == 0:
        raise ValueError("empty curve")
    if dt is None:
        raise ValueError("sample_period is required for a bare array")
    return float(np.argmax(np.abs(values)) * dt)


def sweep_models(truth, d1, d2, base, grid, standardize=True, horizon_minutes=100.0, **kw):
    """Corrected models R + dR(lam) fitted on both windows merged, with their E.

    Returns a list of (lam, model, E) in grid order.
    """
    from .mle import _Fold

    fold = _Fold(d1.merge(d2), base, standardize)
    grid = np.asarray(grid, dtype=float)
    out = []
    for lam, dR in zip(grid, fold.path(grid, **kw)):
        model = base.with_coefficients(base.coefficients + dR)
        E = step_benchmark(truth, model, horizon_minutes, base.sample_period).E
        out.append((float(lam), model, E))
    return out


def lambda_sweep(truth, d1, d2, base, grid, standardize=True, horizon_minutes=100.0, **kw):
    """(lam, E(truth, R + dR(lam))) pairs with dR fitted on both windows merged."""
    return [(lam, E) for lam, _, E in
            sweep_models(truth, d1, d2, base, grid, standardize, horizon_minutes, **kw)]
