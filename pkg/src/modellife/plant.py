"""First-order-plus-dead-time plant models and their exact sampled simulation.

Signals are deviation variables around the column's equilibrium
(y1 = 96.0 wt%, y2 = 0.50 wt%, u1 = 1.95 lb/min, u2 = 1.71 lb/min); the
operating point is never added back.  Channel ``(i, j)`` maps input ``j`` to
output ``i``, matching the gain matrix K_ij.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

COMMENSURATE_TOL = 1e-9


@dataclass(frozen=True)
class FopdtChannel:
    gain: float
    time_constant: float
    dead_time: float

    def __post_init__(self):
        if not self.time_constant > 0:
            raise ValueError(f"time_constant must be positive, got {self.time_constant}")
        if self.dead_time < 0:
            raise ValueError(f"dead_time must be nonnegative, got {self.dead_time}")


@dataclass(frozen=True)
class TransferMatrixModel:
    """A p x m grid of FOPDT channels, stored as a tuple of row tuples."""

    channels: tuple

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.channels)
        if not rows or not rows[0]:
            raise ValueError("model needs at least one channel")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("channel grid is ragged")
        object.__setattr__(self, "channels", rows)

    @property
    def p(self):
        return len(self.channels)

    @property
    def m(self):
        return len(self.channels[0])

    def channel(self, i, j):
        """Channel from input ``j`` to output ``i`` (1-based, like K_ij)."""
        return self.channels[i - 1][j - 1]

    def gains(self):
        return np.array([[c.gain for c in row] for row in self.channels])

    def time_constants(self):
        return np.array([[c.time_constant for c in row] for row in self.channels])

    def dead_times(self):
        return np.array([[c.dead_time for c in row] for row in self.channels])

    def to_dict(self):
        return {
            "gain": self.gains().tolist(),
            "time_constant": self.time_constants().tolist(),
            "dead_time": self.dead_times().tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        K = np.asarray(d["gain"], dtype=float)
        T = np.asarray(d["time_constant"], dtype=float)
        L = np.asarray(d["dead_time"], dtype=float)
        if not (K.shape == T.shape == L.shape) or K.ndim != 2:
            raise ValueError("gain, time_constant and dead_time must be equal-shape 2-D grids")
        return cls(tuple(
            tuple(FopdtChannel(float(K[i, j]), float(T[i, j]), float(L[i, j]))
                  for j in range(K.shape[1]))
            for i in range(K.shape[0])))


@dataclass(frozen=True)
class MismatchSpec:
    gain_deltas: np.ndarray
    delay_deltas: np.ndarray

    @classmethod
    def zeros(cls, p=2, m=2):
        return cls(np.zeros((p, m)), np.zeros((p, m)))


def wood_berry_nominal():
    """Initial column dynamics G0 (Wood and Berry, 1973)."""
    K = [[12.8, -18.9], [6.6, -19.4]]
    T = [[16.7, 21.0], [10.9, 14.4]]
    L = [[1.0, 3.0], [7.0, 3.0]]
    return TransferMatrixModel.from_dict({"gain": K, "time_constant": T, "dead_time": L})


def gain_mismatch():
    """Aged condenser pipe: K11 and K21 drop by half."""
    return MismatchSpec(np.array([[-6.4, 0.0], [-3.3, 0.0]]), np.zeros((2, 2)))


def delay_mismatch():
    """Transport delay of input 2 grows by 4 min on both outputs."""
    return MismatchSpec(np.zeros((2, 2)), np.array([[0.0, 4.0], [0.0, 4.0]]))


def apply_mismatch(model, spec):
    dK = np.asarray(spec.gain_deltas, dtype=float)
    dL = np.asarray(spec.delay_deltas, dtype=float)
    if dK.shape != (model.p, model.m) or dL.shape != (model.p, model.m):
        raise ValueError(f"mismatch grids must be {model.p}x{model.m}")
    rows = []
    for i, row in enumerate(model.channels):
        new = []
        for j, ch in enumerate(row):
            L = ch.dead_time + dL[i, j]
            if L < 0:
                raise ValueError(
                    f"channel ({i + 1},{j + 1}) would get negative dead time {L:g}")
            new.append(replace(ch, gain=ch.gain + dK[i, j], dead_time=L))
        rows.append(tuple(new))
    return TransferMatrixModel(tuple(rows))


def delay_samples(model, sample_period):
    """Dead times in whole samples; rejects dead times off the sampling grid."""
    if not sample_period > 0:
        raise ValueError(f"sample_period must be positive, got {sample_period}")
    L = model.dead_times()
    n = np.rint(L / sample_period)
    bad = np.abs(n * sample_period - L) > COMMENSURATE_TOL
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise ValueError(
            f"dead time {L[i, j]:g} of channel ({i + 1},{j + 1}) is not a multiple "
            f"of the sample period {sample_period:g}")
    return n.astype(int)


class PlantSimulator:
    """Exact zero-order-hold simulation of a FOPDT transfer matrix.

    Each channel keeps a first-order state and a delay line of past inputs.
    The output at sample k is the row sum of channel states; ``advance``
    applies ``u_k`` over [k dt, (k+1) dt) and returns ``y_{k+1}``.
    """

    def __init__(self, model, sample_period):
        self.model = model
        self.sample_period = float(sample_period)
        self.delays = delay_samples(model, sample_period)
        self.decay = np.exp(-self.sample_period / model.time_constants())
        self.input_gain = model.gains() * (1.0 - self.decay)
        self.state = np.zeros((model.p, model.m))
        # ring buffer of past inputs, newest at _head
        self._hist_len = int(self.delays.max()) + 1
        self._hist = np.zeros((self._hist_len, model.m))
        self._head = 0
        self.index = 0
        self._cols = np.arange(model.m)[None, :]

    def copy(self):
        other = object.__new__(PlantSimulator)
        other.__dict__.update(self.__dict__)
        other.state = self.state.copy()
        other._hist = self._hist.copy()
        return other

    def output(self):
        return self.state.sum(axis=1)

    def advance(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.model.m,):
            raise ValueError(f"input must have {self.model.m} entries, got shape {u.shape}")
        self._head = (self._head + 1) % self._hist_len
        self._hist[self._head] = u
        delayed = self._hist[(self._head - self.delays) % self._hist_len, self._cols]
        self.state = self.decay * self.state + self.input_gain * delayed
        self.index += 1
        return self.output()

    def simulate(self, inputs):
        """Run a whole ``(n, m)`` input sequence; returns outputs y_0..y_n."""
        inputs = np.asarray(inputs, dtype=float)
        out = np.empty((inputs.shape[0] + 1, self.model.p))
        out[0] = self.output()
        for k, u in enumerate(inputs):
            out[k + 1] = self.advance(u)
        return out


def make_simulator(model, sample_period):
    return PlantSimulator(model, sample_period)


def analytic_step_response(channel, t):
    """Continuous unit-step response of one FOPDT channel at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    s = np.where(t >= channel.dead_time,
                 channel.gain * -np.expm1(-(t - channel.dead_time) / channel.time_constant),
                 0.0)
    return float(s) if s.ndim == 0 else s


def analytic_impulse_response(channel, t):
    """Continuous impulse response K/T exp(-(t-L)/T) for t >= L."""
    t = np.asarray(t, dtype=float)
    s = np.where(t >= channel.dead_time,
                 channel.gain / channel.time_constant
                 * np.exp(-(t - channel.dead_time) / channel.time_constant),
                 0.0)
    return float(s) if s.ndim == 0 else s
