"""End-to-end reproduction: aged-column runs, mismatch estimation, reports.

Everything is computed first and written afterwards by one writer, so the
files depend only on the seed and the settings, never on timing or thread
scheduling.  Wall-clock time is left out of the JSON documents unless asked
for, which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import arx, bench, mle
from .scenario import standard_scenario, run_closed_loop

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage, err):
        super().__init__(f"{stage}: {err}")
        self.stage = stage


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("%s ...", self.name)

    def __exit__(self, kind, err, tb):
        if err is not None and not isinstance(err, StageError):
            raise StageError(self.name, err) from err
        log.info("%s done in %.1f s", self.name, time.perf_counter() - self.t0)


@dataclass
class ScenarioOutcome:
    scenario: object
    records: list
    report: mle.CvReport
    sweep: list
    models: dict
    summary: dict


def convert_nominal(scn):
    with _stage("conversion"):
        return arx.convert_from_plant(scn.nominal, scn.conversion)


def _channel_key(i, j):
    return f"{i}{j}"


def summarize(scn, models, report, r_hat_zero_E, seed):
    truth = scn.truth
    horizon, dt = scn.benchmark_horizon, scn.sample_period
    star = models["r_hat_star"]
    steps = bench.response_grid(star, horizon, dt, "step")
    impulses = bench.response_grid(star, horizon, dt, "impulse")
    g0_impulses = bench.response_grid(scn.nominal, horizon, dt, "impulse")
    gains, delays = {}, {}
    for i in range(truth.p):
        for j in range(truth.m):
            key = _channel_key(i + 1, j + 1)
            est = bench.final_gain(steps[:, i, j])
            true_gain = truth.channel(i + 1, j + 1).gain
            gains[key] = {"estimated": est, "truth": true_gain, "error": abs(est - true_gain)}
            delays[key] = {
                "estimated_min": bench.peak_delay(impulses[:, i, j], dt),
                "truth_min": truth.channel(i + 1, j + 1).dead_time,
                "initial_min": bench.peak_delay(g0_impulses[:, i, j], dt),
            }
    return {
        "scenario_id": scn.scenario_id,
        "seed": seed,
        "lambda_star": report.lambda_star,
        "E": {
            "g0": bench.step_benchmark(truth, scn.nominal, horizon, dt).E,
            "r_hat_star": bench.step_benchmark(truth, star, horizon, dt).E,
            "r_hat_zero": r_hat_zero_E,
        },
        "gains": gains,
        "delays": delays,
        "delta_r_l1_norm": float(np.abs(report.final_estimate.delta_R).sum()),
        "runtime_sec": None,
    }


def run_scenario(scn, base):
    """Both closed-loop runs, cross-validation, the lambda sweep and readouts."""
    sid = scn.scenario_id
    t0 = time.perf_counter()
    with _stage(f"{sid}: closed-loop runs"):
        records = [run_closed_loop(scn, a) for a in range(len(scn.schedules))]
    cfg = scn.mle
    with _stage(f"{sid}: datasets"):
        d1, d2 = (mle.build_dataset(r, mle.extract_window(r, cfg.t_r, cfg.half_width,
                                                          base.order), base.order)
                  for r in records[:2])
    grid = cfg.lambda_grid()
    with _stage(f"{sid}: cross-validation"):
        report = mle.cross_validate(d1, d2, base, grid, cfg.standardize, cfg.include_penalty)
    sweep_grid = grid if 0.0 in grid else np.concatenate([[0.0], grid])
    with _stage(f"{sid}: lambda sweep"):
        sweep = bench.sweep_models(scn.truth, d1, d2, base, sweep_grid, cfg.standardize,
                                   scn.benchmark_horizon)
    zero = next(item for item in sweep if item[0] == 0.0)
    models = {
        "g0": scn.nominal,
        "truth": scn.truth,
        "r_hat_star": report.final_estimate.corrected,
        "r_hat_zero": zero[1],
    }
    summary = summarize(scn, models, report, zero[2], scn.seed)
    summary["runtime_sec"] = time.perf_counter() - t0
    return ScenarioOutcome(scn, records, report, [(lam, E) for lam, _, E in sweep],
                           models, summary)


# -- writing -----------------------------------------------------------------

def _write_json(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def _write_table(path, header, rows):
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def write_curves(directory, models, horizon, dt):
    os.makedirs(directory, exist_ok=True)
    for kind in ("step", "impulse"):
        for label, model in models.items():
            grid = bench.response_grid(model, horizon, dt, kind)
            t = np.arange(grid.shape[0]) * dt
            for i in range(grid.shape[1]):
                for j in range(grid.shape[2]):
                    name = f"{kind}_{label}_{i + 1}{j + 1}.csv"
                    _write_table(os.path.join(directory, name), ("t_min", "value"),
                                 zip(t, grid[:, i, j]))


def write_sweep(path, outcome):
    rep = outcome.report
    cv = {float(lam): k for k, lam in enumerate(rep.lambda_grid)}
    other = rep.other_loss_sum()
    rows = []
    for lam, E in outcome.sweep:
        k = cv.get(lam)
        if k is None:
            rows.append((lam, E, np.nan, np.nan, np.nan, np.nan))
        else:
            rows.append((lam, E, rep.loss_fold1[k], rep.loss_fold2[k], rep.loss_sum[k],
                         other[k]))
    _write_table(path, ("lambda", "E", "cv_loss_fold1", "cv_loss_fold2", "cv_loss_sum",
                        "cv_loss_sum_other"), rows)


def write_outcome(directory, outcome, record_runtime):
    os.makedirs(directory, exist_ok=True)
    for a, rec in enumerate(outcome.records, start=1):
        rec.write_csv(os.path.join(directory, f"record_{a}.csv"))
    outcome.models["r_hat_star"].save(os.path.join(directory, "r_hat_star.json"))
    _write_json(os.path.join(directory, "cv_report.json"),
                outcome.report.to_dict("r_hat_star.json"))
    write_sweep(os.path.join(directory, "sweep.csv"), outcome)
    scn = outcome.scenario
    write_curves(os.path.join(directory, "curves"), outcome.models, scn.benchmark_horizon,
                 scn.sample_period)
    summary = dict(outcome.summary)
    if not record_runtime:
        summary["runtime_sec"] = None
    _write_json(os.path.join(directory, "summary.json"), summary)


def standard_scenarios(seed, null=False):
    if null:
        return [standard_scenario("null", seed).replace(noise_variance=0.0)]
    return [standard_scenario("gain", seed), standard_scenario("delay", seed)]


def reproduce(output_dir, seed=42, null=False, record_runtime=False, threads=1,
              scenarios=None, base=None):
    """Run every scenario and write the report tree under ``output_dir``.

    Returns ``{"summary": top-level summary, "outcomes": [ScenarioOutcome]}``.
    """
    t0 = time.perf_counter()
    scenarios = scenarios or standard_scenarios(seed, null)
    base_kind = "given"
    if base is None and null:
        # the control run isolates the estimator: a base that realizes the
        # unaged plant exactly leaves no genuine mismatch to find
        first = scenarios[0]
        base = arx.exact_from_fopdt(first.nominal, first.sample_period, first.conversion.order)
        base_kind = "exact"
    elif base is None:
        base = convert_nominal(scenarios[0])
        base_kind = "converted"
    conversion_E = bench.step_benchmark(scenarios[0].nominal, base,
                                        scenarios[0].benchmark_horizon,
                                        scenarios[0].sample_period).E
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(lambda s: run_scenario(s, base), scenarios))

    os.makedirs(output_dir, exist_ok=True)
    with _stage("writing"):
        base.save(os.path.join(output_dir, "base_model.json"))
        for outcome in outcomes:
            write_outcome(os.path.join(output_dir, outcome.scenario.scenario_id), outcome,
                          record_runtime)
        top = {
            "seed": seed,
            "conversion": {
                "base": base_kind,
                "E": conversion_E,
                "nonzero_fraction": float(np.count_nonzero(base.coefficients)
                                          / base.coefficients.size),
                "lam0": scenarios[0].conversion.lam0,
                "order": base.order,
            },
            "scenarios": {o.scenario.scenario_id: {k: o.summary[k] for k in
                                                   ("lambda_star", "E", "delta_r_l1_norm")}
                          for o in outcomes},
            "runtime_sec": (time.perf_counter() - t0) if record_runtime else None,
        }
        _write_json(os.path.join(output_dir, "summary.json"), top)
    log.info("reproduction finished in %.1f s", time.perf_counter() - t0)
    return {"summary": top, "outcomes": outcomes}
