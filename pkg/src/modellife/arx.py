"""ARX models without a pre-designed input delay.

The regressor at time k stacks the last ``d`` output/input pairs newest
first, ``h_k = [y_k; u_k; y_{k-1}; u_{k-1}; ...; y_{k-d+1}; u_{k-d+1}]``, and
the model predicts ``y_{k+1} = R @ h_k`` with ``R`` of shape (p, d(m+p)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _rng
from .lasso import DEFAULT_MAX_SWEEPS, DEFAULT_TOL, Design, _solve
from .plant import PlantSimulator


@dataclass(frozen=True)
class ArxModel:
    coefficients: np.ndarray
    order: int
    m: int
    p: int
    sample_period: float

    def __post_init__(self):
        R = np.asarray(self.coefficients, dtype=float)
        expected = (self.p, self.order * (self.m + self.p))
        if R.shape != expected:
            raise ValueError(f"coefficients have shape {R.shape}, expected {expected}")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "coefficients", R)

    @property
    def n_regressors(self):
        return self.order * (self.m + self.p)

    def with_coefficients(self, R):
        return ArxModel(np.asarray(R, dtype=float), self.order, self.m, self.p,
                        self.sample_period)

    def to_dict(self):
        return {
            "p": self.p,
            "m": self.m,
            "d": self.order,
            "dt": self.sample_period,
            "coefficients": self.coefficients.ravel(order="C").tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("p", "m", "d", "dt", "coefficients"):
            if key not in d:
                raise ValueError(f"ARX model document is missing '{key}'")
        p, m, order = int(d["p"]), int(d["m"]), int(d["d"])
        coef = np.asarray(d["coefficients"], dtype=float)
        if coef.size != p * order * (m + p):
            raise ValueError(
                f"'coefficients' has {coef.size} entries, expected {p * order * (m + p)}")
        return cls(coef.reshape(p, order * (m + p)), order, m, p, float(d["dt"]))

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def lagged_regressors(y, u, targets, order):
    """Stacked history columns for the target sample indices.

    Column ``n`` holds ``[y_{k-1}; u_{k-1}; ...; y_{k-d}; u_{k-d}]`` for
    ``k = targets[n]``.  ``y`` is (T, p), ``u`` is (T, m).
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    targets = np.asarray(targets, dtype=int)
    if targets.size and targets.min() < order:
        raise ValueError(
            f"target index {targets.min()} has fewer than {order} preceding samples")
    if targets.size and targets.max() >= y.shape[0]:
        raise ValueError(f"target index {targets.max()} is beyond the record")
    z = np.hstack([y, u])
    blocks = [z[targets - lag] for lag in range(1, order + 1)]
    return np.ascontiguousarray(np.hstack(blocks).T)


def one_step_predict(model, history):
    h = np.asarray(history, dtype=float)
    if h.shape[0] != model.n_regressors:
        raise ValueError(f"history has length {h.shape[0]}, expected {model.n_regressors}")
    return model.coefficients @ h


def _run(model, inputs, history):
    """Batched free run.

    ``inputs`` is (n, m, B) for B independent experiments and ``history`` is
    the (d(m+p), B) regressor before time 0.  Returns outputs (n, p, B).
    """
    p = model.p
    width = p + model.m
    R = model.coefficients
    h = history.copy()
    out = np.empty((inputs.shape[0], p, h.shape[1]))
    for k in range(inputs.shape[0]):
        y_k = R @ h
        out[k] = y_k
        h[width:] = h[:-width]
        h[:p] = y_k
        h[p:width] = inputs[k]
    return out


def free_run_simulate(model, inputs, initial_history=None):
    """Simulate the ARX recursion open loop, feeding predictions back.

    ``inputs`` is (n, m).  ``initial_history`` is the regressor holding the
    ``d`` pairs before time 0 (zeros by default).  Returns y_0..y_{n-1} with
    y_0 = R @ initial_history and y_{k+1} = R @ [y_k; u_k; ...].
    """
    u = np.asarray(inputs, dtype=float)
    if u.ndim != 2 or u.shape[1] != model.m:
        raise ValueError(f"inputs must be (n, {model.m})")
    if initial_history is None:
        h0 = np.zeros(model.n_regressors)
    else:
        h0 = np.asarray(initial_history, dtype=float)
        if h0.shape != (model.n_regressors,):
            raise ValueError(f"initial_history must have length {model.n_regressors}")
    return _run(model, u[:, :, None], h0[:, None])[:, :, 0]


def response_matrix(model, n_samples, kind="step"):
    """Step or impulse responses of every channel at once.

    Returns an array (n_samples + 1, p, m): entry [k, i, j] is output i at
    sample k after a unit step (or one-sample unit pulse) on input j at k = 0.
    """
    if kind not in ("step", "impulse"):
        raise ValueError(f"kind must be 'step' or 'impulse', got {kind!r}")
    m = model.m
    u = np.zeros((n_samples + 1, m, m))
    if kind == "step":
        u[:, np.arange(m), np.arange(m)] = 1.0
    else:
        u[0, np.arange(m), np.arange(m)] = 1.0
    return _run(model, u, np.zeros((model.n_regressors, m)))


def step_response(model, input_index, output_index, n_samples):
    """Unit-step response phi_0..phi_N from input ``input_index`` to
    output ``output_index`` (both 1-based), from a zero history."""
    return response_matrix(model, n_samples, "step")[:, output_index - 1, input_index - 1]


def impulse_response(model, input_index, output_index, n_samples):
    """Response to a one-sample unit pulse; the first difference of the step."""
    return response_matrix(model, n_samples, "impulse")[:, output_index - 1, input_index - 1]


@dataclass(frozen=True)
class ConversionConfig:
    excitation_length: int = 50_000
    lam0: float = 1e-6
    order: int = 150
    sample_period: float = 0.2
    seed: int = 42
    excitation_variance: float = 1.0
    standardize: bool = True
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.excitation_length <= self.order:
            raise ValueError("excitation_length must exceed the model order")
        if not self.lam0 > 0:
            raise ValueError("lam0 must be positive")


def fit_rows(X, E, lam, standardize=True, starts=None, design=None,
             max_sweeps=DEFAULT_MAX_SWEEPS, tol=DEFAULT_TOL):
    """Row-wise lasso: each row of ``E`` (p, N) regressed on ``X`` (n, N)."""
    design = design or Design(X, standardize)
    rows = []
    for r in range(E.shape[0]):
        start = None if starts is None else starts[r]
        rows.append(_solve(design, E[r], lam, start, max_sweeps, tol))
    return rows


def convert_from_plant(model, cfg=ConversionConfig()):
    """Fit a sparse ARX coefficient matrix to a transfer-matrix model.

    The noise-free plant is driven by i.i.d. Gaussian inputs held over each
    sample; the resulting data are regressed row by row with the lasso at
    ``cfg.lam0``.
    """
    rng = _rng.stream(cfg.seed, "excitation")
    n0 = cfg.excitation_length
    u = rng.normal(0.0, np.sqrt(cfg.excitation_variance), size=(n0 + 1, model.m))
    sim = PlantSimulator(model, cfg.sample_period)
    y = sim.simulate(u[:-1])
    targets = np.arange(cfg.order, n0 + 1)
    X = lagged_regressors(y, u, targets, cfg.order)
    Y = y[targets].T
    rows = fit_rows(X, Y, cfg.lam0, cfg.standardize, max_sweeps=cfg.max_sweeps, tol=cfg.tol)
    R = np.vstack([s.coefficients for s in rows])
    return ArxModel(R, cfg.order, model.m, model.p, cfg.sample_period)


def exact_from_fopdt(model, sample_period=0.2, order=150):
    """The ARX model that reproduces a sampled FOPDT matrix exactly.

    Each row gets the common denominator prod_j (1 - a_ij q^-1) of its
    channels, so the recursion needs ``m`` output lags and
    ``m + max delay`` input lags.  Useful as a mismatch-free base model.
    """
    from .plant import delay_samples

    p, m = model.p, model.m
    width = p + m
    delays = delay_samples(model, sample_period)
    R = np.zeros((p, order * width))
    for i in range(p):
        poles = [np.exp(-sample_period / model.channel(i + 1, j + 1).time_constant)
                 for j in range(m)]
        denom = np.poly(poles)  # [1, c1, ..., cm] in powers of q^-1
        for lag in range(1, m + 1):
            R[i, (lag - 1) * width + i] = -denom[lag]
        for j in range(m):
            ch = model.channel(i + 1, j + 1)
            n = delays[i, j]
            others = np.atleast_1d(np.poly([poles[l] for l in range(m) if l != j]))
            numer = ch.gain * (1 - poles[j]) * others
            for power, c in enumerate(numer):
                lag = 1 + n + power
                if lag > order:
                    raise ValueError(f"order {order} is too short for channel ({i + 1},{j + 1})")
                R[i, (lag - 1) * width + p + j] += c
    return ArxModel(R, order, m, p, sample_period)
