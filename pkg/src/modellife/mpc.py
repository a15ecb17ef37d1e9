"""Unconstrained multivariable MPC built on a FOPDT prediction model.

The controller always predicts with the model it was built from (the initial
model G0); the plant it drives may differ.  Offset-free tracking comes from a
constant output-disturbance estimate added to every prediction.  The estimate
is a first-order filter of the gap between measured and model output:

    bias <- bias + gain * (y_measured - y_model - bias)

``gain = 1`` is the deadbeat correction.  The default is the steady-state
Kalman gain of a random-walk disturbance with unit process and measurement
noise variances, (sqrt(5) - 1) / 2, which is what commercial toolboxes use
out of the box for integrated-white-noise output disturbances.

Timing (``input_timing``):

* ``"immediate"``: at control instant l the controller reads y_l and the new
  input is held over [l, l+1).  A move Δu_i first shows up in the prediction
  for instant l+i.
* ``"delayed"``: the new input is held from l+1; over [l, l+1) the plant keeps
  the previous one.  A move Δu_i first shows up at instant l+i+1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plant import PlantSimulator


KALMAN_GAIN = (np.sqrt(5.0) - 1.0) / 2.0
TIMINGS = ("immediate", "delayed")


def _diag(values):
    return np.diag(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class MpcConfig:
    prediction_horizon: int = 30
    control_horizon: int = 5
    output_weight: np.ndarray = field(default_factory=lambda: _diag([0.2, 0.2]))
    input_rate_weight: np.ndarray = field(default_factory=lambda: _diag([0.1, 0.1]))
    control_period: float = 1.0
    disturbance_gain: float = KALMAN_GAIN
    input_timing: str = "immediate"

    def __post_init__(self):
        if not 0 < self.disturbance_gain <= 1:
            raise ValueError("disturbance_gain must lie in (0, 1]")
        if self.input_timing not in TIMINGS:
            raise ValueError(f"input_timing must be one of {TIMINGS}")
        if self.control_horizon < 1:
            raise ValueError("control_horizon must be at least 1")
        if self.prediction_horizon <= self.control_horizon:
            raise ValueError(
                f"prediction_horizon ({self.prediction_horizon}) must exceed "
                f"control_horizon ({self.control_horizon})")
        if not self.control_period > 0:
            raise ValueError("control_period must be positive")
        for name in ("output_weight", "input_rate_weight"):
            W = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if W.shape[0] != W.shape[1] or not np.allclose(W, W.T):
                raise ValueError(f"{name} must be a symmetric square matrix")
            if np.linalg.eigvalsh(W).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, W)


def optimal_moves(theta, error, output_weight, rate_weight):
    """Minimize (e - theta dU)' Q (e - theta dU) + dU' W dU over dU.

    ``output_weight`` and ``rate_weight`` are the stacked block-diagonal
    weights.  Solved through the normal equations.
    """
    H = theta.T @ output_weight @ theta + rate_weight
    g = theta.T @ output_weight @ error
    try:
        return np.linalg.solve(H, g)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            "MPC normal equations are singular; input_rate_weight must be positive definite"
        ) from err


class MpcController:
    def __init__(self, model, config=MpcConfig(), sample_period=0.2):
        ratio = config.control_period / sample_period
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(
                "control_period must be a whole multiple of the sample period "
                f"({config.control_period:g} vs {sample_period:g})")
        p, m = model.p, model.m
        if config.output_weight.shape != (p, p) or config.input_rate_weight.shape != (m, m):
            raise ValueError(f"weights must be {p}x{p} and {m}x{m} for this model")
        self.model = model
        self.config = config
        self.substeps = int(round(ratio))
        self.internal = PlantSimulator(model, sample_period)
        self.u = np.zeros(m)
        self.bias = np.zeros(p)
        hp, hc = config.prediction_horizon, config.control_horizon
        self.theta = self._dynamic_matrix(hp, hc)
        self._Q = np.kron(np.eye(hp), config.output_weight)
        self._W = np.kron(np.eye(hc), config.input_rate_weight)

    def _step_coefficients(self, n_periods):
        """S[n] = p x m response n control periods after a unit input step."""
        p, m = self.model.p, self.model.m
        S = np.zeros((n_periods + 1, p, m))
        for j in range(m):
            sim = PlantSimulator(self.model, self.internal.sample_period)
            e = np.zeros(m)
            e[j] = 1.0
            for n in range(1, n_periods + 1):
                for _ in range(self.substeps):
                    y = sim.advance(e)
                S[n, :, j] = y
        return S

    def _dynamic_matrix(self, hp, hc):
        p, m = self.model.p, self.model.m
        S = self._step_coefficients(hp)
        lag = 1 if self.config.input_timing == "delayed" else 0
        theta = np.zeros((hp * p, hc * m))
        for k in range(1, hp + 1):
            for i in range(1, hc + 1):
                if k - i + 1 - lag >= 1:
                    theta[(k - 1) * p:k * p, (i - 1) * m:i * m] = S[k - i + 1 - lag]
        return theta

    def free_response(self):
        """Predicted outputs at instants l+1..l+H_p with no further moves, bias included."""
        sim = self.internal.copy()
        hp = self.config.prediction_horizon
        out = np.empty((hp, self.model.p))
        for k in range(hp):
            for _ in range(self.substeps):
                y = sim.advance(self.u)
            out[k] = y
        return out + self.bias

    def predict_horizon(self, rate_moves):
        moves = np.asarray(rate_moves, dtype=float)
        hc, m = self.config.control_horizon, self.model.m
        if moves.shape != (hc, m):
            raise ValueError(f"need {hc} rate moves of length {m}, got shape {moves.shape}")
        pred = self.free_response().ravel() + self.theta @ moves.ravel()
        return pred.reshape(self.config.prediction_horizon, self.model.p)

    def solve(self, setpoint):
        """Optimal rate moves (H_c, m) for a setpoint held over the horizon."""
        r = np.tile(np.asarray(setpoint, dtype=float), self.config.prediction_horizon)
        e = r - self.free_response().ravel()
        return optimal_moves(self.theta, e, self._Q, self._W).reshape(
            self.config.control_horizon, self.model.m)

    def objective_gradient(self, setpoint, rate_moves):
        r = np.tile(np.asarray(setpoint, dtype=float), self.config.prediction_horizon)
        dU = np.asarray(rate_moves, dtype=float).ravel()
        resid = r - self.free_response().ravel() - self.theta @ dU
        return -2 * self.theta.T @ self._Q @ resid + 2 * self._W @ dU

    def control_step(self, y_measured, setpoint):
        """Read y_l and return the new input ū_{l+1}.

        The internal model is advanced over [l, l+1) under whatever input the
        plant actually holds there, which depends on ``input_timing``.
        """
        y_measured = np.asarray(y_measured, dtype=float)
        gap = y_measured - self.internal.output()
        self.bias = self.bias + self.config.disturbance_gain * (gap - self.bias)
        moves = self.solve(setpoint)
        u_next = self.u + moves[0]
        held = u_next if self.config.input_timing == "immediate" else self.u
        for _ in range(self.substeps):
            self.internal.advance(held)
        self.u = u_next
        return u_next.copy()

    def held_input(self, new_input, previous_input):
        """Input the plant holds over [l, l+1) after a control step."""
        return new_input if self.config.input_timing == "immediate" else previous_input


def new_controller(initial_model, config=MpcConfig(), sample_period=0.2):
    return MpcController(initial_model, config, sample_period)
