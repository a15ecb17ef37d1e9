"""Scenario configuration, closed-loop simulation and record files."""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .arx import ConversionConfig
from .mpc import MpcConfig, MpcController
from .plant import (MismatchSpec, PlantSimulator, TransferMatrixModel, apply_mismatch,
                    wood_berry_nominal)

RECORD_COLUMNS = ["t_min", "u1", "u2", "y1", "y2", "y1_clean", "y2_clean", "r1", "r2"]


class ScenarioError(ValueError):
    """Configuration problem; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def log_grid(n_log=61, low=1e-6, high=1e-2):
    """{0} plus ``n_log`` log-spaced values, ascending."""
    return np.concatenate([[0.0], np.logspace(np.log10(low), np.log10(high), n_log)])


def arithmetic_grid(step=1e-6, high=1e-2):
    """The dense grid 0, step, 2*step, ..., high."""
    n = int(round(high / step))
    return np.arange(n + 1) * step


STANDARD_SCHEDULES = (
    # first run: r = (U(t - t_r), 0); second: r = (1, U(t - t_r))
    ((( 500.0, 1.0),), ()),
    (((0.0, 1.0),), ((500.0, 1.0),)),
)


@dataclass(frozen=True)
class MleSettings:
    t_r: float = 500.0
    half_width: float = 200.0
    grid: str = "log"
    grid_points: int = 61
    grid_low: float = 1e-6
    grid_high: float = 1e-2
    include_penalty: bool = False
    standardize: bool = True

    def lambda_grid(self):
        if self.grid == "log":
            return log_grid(self.grid_points, self.grid_low, self.grid_high)
        if self.grid == "arithmetic":
            return arithmetic_grid(self.grid_low, self.grid_high)
        raise ValueError(f"unknown grid kind {self.grid!r}")


@dataclass(frozen=True)
class Scenario:
    scenario_id: str = "gain"
    nominal: TransferMatrixModel = field(default_factory=wood_berry_nominal)
    mismatch: MismatchSpec = field(default_factory=MismatchSpec.zeros)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    sample_period: float = 0.2
    horizon: float = 1000.0
    schedules: tuple = STANDARD_SCHEDULES
    noise_variance: float = 0.001
    seed: int = 42
    mle: MleSettings = field(default_factory=MleSettings)
    conversion: ConversionConfig = field(default_factory=ConversionConfig)
    benchmark_horizon: float = 100.0

    @property
    def truth(self):
        return apply_mismatch(self.nominal, self.mismatch)

    @property
    def n_samples(self):
        return int(round(self.horizon / self.sample_period)) + 1

    def replace(self, **changes):
        out = copy.copy(self)
        for k, v in changes.items():
            object.__setattr__(out, k, v)
        return out


@dataclass
class SimulationRecord:
    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_clean: np.ndarray
    r: np.ndarray
    seed: int = 0

    @property
    def sample_period(self):
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def __len__(self):
        return len(self.t)

    def write_csv(self, path):
        table = np.column_stack([self.t, self.u, self.y, self.y_clean, self.r])
        with open(path, "w", newline="") as f:
            f.write(",".join(RECORD_COLUMNS) + "\n")
            for row in table:
                f.write(",".join(_fmt(v) for v in row) + "\n")

    @classmethod
    def read_csv(cls, path, seed=0):
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != RECORD_COLUMNS:
                raise ValueError(f"{path}:1: expected header {','.join(RECORD_COLUMNS)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(RECORD_COLUMNS):
                    raise ValueError(f"{path}:{lineno}: expected {len(RECORD_COLUMNS)} fields, "
                                     f"got {len(row)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as err:
                    raise ValueError(f"{path}:{lineno}: {err}") from None
        a = np.array(rows)
        if a.shape[0] < 2:
            raise ValueError(f"{path}: record needs at least two samples")
        return cls(a[:, 0], a[:, 1:3], a[:, 3:5], a[:, 5:7], a[:, 7:9], seed)


def _fmt(v):
    return repr(float(v))


def reference_signal(schedule, n_samples, sample_period):
    """Piecewise-constant references from per-output (time, level) events."""
    r = np.zeros((n_samples, len(schedule)))
    for i, events in enumerate(schedule):
        for time, level in sorted(events):
            k = int(round(time / sample_period))
            r[max(k, 0):, i] = level
    return r


def run_closed_loop(scenario, schedule_index=0):
    """Simulate the MPC loop on the true plant with measurement noise.

    The plant advances every sample; at each control instant the controller
    reads the noisy output and the scheduled reference.  Output noise is
    i.i.d. Gaussian per channel and sample, drawn from a substream keyed by
    the scenario seed and the schedule index.
    """
    dt = scenario.sample_period
    n = scenario.n_samples
    truth = scenario.truth
    plant_sim = PlantSimulator(truth, dt)
    ctrl = MpcController(scenario.nominal, scenario.mpc, dt)
    schedule = scenario.schedules[schedule_index]
    if len(schedule) != truth.p:
        raise ScenarioError(f"schedules[{schedule_index}]",
                            f"need one event list per output ({truth.p})")
    r = reference_signal(schedule, n, dt)
    rng = _rng.stream(scenario.seed, "noise", schedule_index)
    noise = rng.normal(0.0, np.sqrt(scenario.noise_variance), size=(n, truth.p))
    u = np.zeros((n, truth.m))
    y_clean = np.zeros((n, truth.p))
    applied = np.zeros(truth.m)
    for k in range(n):
        y_clean[k] = plant_sim.output()
        if k % ctrl.substeps == 0:
            previous = ctrl.u.copy()
            new = ctrl.control_step(y_clean[k] + noise[k], r[k])
            applied = ctrl.held_input(new, previous)
        u[k] = applied
        if k < n - 1:
            plant_sim.advance(applied)
    t = np.arange(n) * dt
    return SimulationRecord(t, u, y_clean + noise, y_clean, r, scenario.seed)


# -- scenario JSON ---------------------------------------------------------

def _grid(value, path, shape):
    a = np.asarray(value, dtype=float)
    if a.shape != shape:
        raise ScenarioError(path, f"expected a {shape[0]}x{shape[1]} grid")
    return a


def _get(d, key, path, default=None, kind=None):
    if key not in d:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "missing")
        return default
    v = d[key]
    if kind is not None:
        try:
            v = kind(v)
        except (TypeError, ValueError):
            raise ScenarioError(f"{path}.{key}", f"expected {kind.__name__}") from None
    return v


KNOWN_KEYS = {"id", "plant", "mpc", "sample_period", "horizon", "reference_schedules",
              "noise", "mle", "conversion", "benchmark_horizon"}


def scenario_from_dict(d):
    if not isinstance(d, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    unknown = set(d) - KNOWN_KEYS
    if unknown:
        raise ScenarioError(f"$.{sorted(unknown)[0]}", "unknown field")
    base = Scenario()
    plant_d = d.get("plant", {})
    nominal = base.nominal
    if "nominal" in plant_d and plant_d["nominal"] != "wood_berry":
        try:
            nominal = TransferMatrixModel.from_dict(plant_d["nominal"])
        except (KeyError, TypeError, ValueError) as err:
            raise ScenarioError("$.plant.nominal", str(err)) from None
    shape = (nominal.p, nominal.m)
    mm = plant_d.get("mismatch", {})
    mismatch = MismatchSpec(
        _grid(mm.get("gain_deltas", np.zeros(shape)), "$.plant.mismatch.gain_deltas", shape),
        _grid(mm.get("delay_deltas", np.zeros(shape)), "$.plant.mismatch.delay_deltas", shape))
    try:
        apply_mismatch(nominal, mismatch)
    except ValueError as err:
        raise ScenarioError("$.plant.mismatch.delay_deltas", str(err)) from None

    mpc_d = d.get("mpc", {})
    try:
        mpc = MpcConfig(
            prediction_horizon=_get(mpc_d, "prediction_horizon", "$.mpc", 30, int),
            control_horizon=_get(mpc_d, "control_horizon", "$.mpc", 5, int),
            output_weight=np.asarray(mpc_d.get("output_weight", base.mpc.output_weight), float),
            input_rate_weight=np.asarray(mpc_d.get("input_rate_weight",
                                                   base.mpc.input_rate_weight), float),
            control_period=_get(mpc_d, "control_period", "$.mpc", 1.0, float),
            disturbance_gain=_get(mpc_d, "disturbance_gain", "$.mpc",
                                  base.mpc.disturbance_gain, float),
            input_timing=_get(mpc_d, "input_timing", "$.mpc", base.mpc.input_timing, str))
    except ValueError as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError("$.mpc", str(err)) from None

    dt = _get(d, "sample_period", "$", 0.2, float)
    if not dt > 0:
        raise ScenarioError("$.sample_period", "must be positive")
    horizon = _get(d, "horizon", "$", 1000.0, float)

    schedules = base.schedules
    if "reference_schedules" in d:
        raw = d["reference_schedules"]
        if not isinstance(raw, list) or len(raw) != 2:
            raise ScenarioError("$.reference_schedules", "expected a list of two schedules")
        schedules = []
        for a, sched in enumerate(raw):
            if not isinstance(sched, list) or len(sched) != nominal.p:
                raise ScenarioError(f"$.reference_schedules[{a}]",
                                    f"expected {nominal.p} per-output event lists")
            out = []
            for i, events in enumerate(sched):
                try:
                    out.append(tuple((float(t), float(v)) for t, v in events))
                except (TypeError, ValueError):
                    raise ScenarioError(f"$.reference_schedules[{a}][{i}]",
                                        "events must be [time, level] pairs") from None
            schedules.append(tuple(out))
        schedules = tuple(schedules)

    noise_d = d.get("noise", {})
    variance = _get(noise_d, "variance", "$.noise", 0.001, float)
    if variance < 0:
        raise ScenarioError("$.noise.variance", "must be nonnegative")
    seed = _get(noise_d, "seed", "$.noise", 42, int)

    mle_d = d.get("mle", {})
    try:
        mle = MleSettings(
            t_r=_get(mle_d, "t_r", "$.mle", 500.0, float),
            half_width=_get(mle_d, "half_width", "$.mle", 200.0, float),
            grid=_get(mle_d, "grid", "$.mle", "log", str),
            grid_points=_get(mle_d, "grid_points", "$.mle", 61, int),
            grid_low=_get(mle_d, "grid_low", "$.mle", 1e-6, float),
            grid_high=_get(mle_d, "grid_high", "$.mle", 1e-2, float),
            include_penalty=bool(mle_d.get("include_penalty", False)),
            standardize=bool(mle_d.get("standardize", True)))
        mle.lambda_grid()
    except ValueError as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError("$.mle.grid", str(err)) from None
    if horizon < mle.t_r + mle.half_width:
        raise ScenarioError("$.horizon", "must cover t_r + half_width")

    conv_d = d.get("conversion", {})
    try:
        conversion = ConversionConfig(
            excitation_length=_get(conv_d, "excitation_length", "$.conversion", 50_000, int),
            lam0=_get(conv_d, "lam0", "$.conversion", 1e-6, float),
            order=_get(conv_d, "order", "$.conversion", 150, int),
            sample_period=dt,
            seed=_get(conv_d, "seed", "$.conversion", seed, int),
            standardize=bool(conv_d.get("standardize", True)))
    except ValueError as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError("$.conversion", str(err)) from None

    return Scenario(
        scenario_id=str(d.get("id", "custom")), nominal=nominal, mismatch=mismatch, mpc=mpc,
        sample_period=dt, horizon=horizon, schedules=schedules, noise_variance=variance,
        seed=seed, mle=mle, conversion=conversion,
        benchmark_horizon=_get(d, "benchmark_horizon", "$", 100.0, float))


def scenario_to_dict(s):
    return {
        "id": s.scenario_id,
        "plant": {
            "nominal": s.nominal.to_dict(),
            "mismatch": {"gain_deltas": np.asarray(s.mismatch.gain_deltas).tolist(),
                         "delay_deltas": np.asarray(s.mismatch.delay_deltas).tolist()},
        },
        "mpc": {
            "prediction_horizon": s.mpc.prediction_horizon,
            "control_horizon": s.mpc.control_horizon,
            "output_weight": s.mpc.output_weight.tolist(),
            "input_rate_weight": s.mpc.input_rate_weight.tolist(),
            "control_period": s.mpc.control_period,
            "disturbance_gain": s.mpc.disturbance_gain,
            "input_timing": s.mpc.input_timing,
        },
        "sample_period": s.sample_period,
        "horizon": s.horizon,
        "reference_schedules": [[[list(e) for e in events] for events in sched]
                                for sched in s.schedules],
        "noise": {"variance": s.noise_variance, "seed": s.seed},
        "mle": {
            "t_r": s.mle.t_r, "half_width": s.mle.half_width, "grid": s.mle.grid,
            "grid_points": s.mle.grid_points, "grid_low": s.mle.grid_low,
            "grid_high": s.mle.grid_high, "include_penalty": s.mle.include_penalty,
            "standardize": s.mle.standardize,
        },
        "conversion": {
            "excitation_length": s.conversion.excitation_length,
            "lam0": s.conversion.lam0, "order": s.conversion.order,
            "seed": s.conversion.seed, "standardize": s.conversion.standardize,
        },
        "benchmark_horizon": s.benchmark_horizon,
    }


def load_scenario(path):
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as err:
            raise ScenarioError(f"{path}:{err.lineno}:{err.colno}", err.msg) from None
    return scenario_from_dict(d)


def standard_scenario(kind="gain", seed=42):
    """The two aged-column experiments, or ``"null"`` for an unaged plant."""
    from .plant import delay_mismatch, gain_mismatch
    specs = {"gain": gain_mismatch, "delay": delay_mismatch, "null": MismatchSpec.zeros}
    if kind not in specs:
        raise ValueError(f"unknown scenario {kind!r}")
    return Scenario(scenario_id=kind, mismatch=specs[kind](), seed=seed,
                    conversion=ConversionConfig(seed=seed))
