"""Command-line entry point: ``modellife <subcommand> ...``.

Failures exit nonzero with a one-line JSON object on stderr:
``{"error": <kind>, "message": <text>, "stage": <where>}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import arx, bench, mle
from .plant import TransferMatrixModel
from .scenario import ScenarioError, SimulationRecord, load_scenario, run_closed_loop

log = logging.getLogger("modellife")


class CliError(Exception):
    def __init__(self, message, kind="usage", stage=None):
        super().__init__(message)
        self.kind = kind
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _scenario(args):
    s = load_scenario(args.scenario)
    if args.seed is not None:
        s = s.replace(seed=args.seed)
    return s


def _load_model(path):
    """An ARX model document or a transfer-matrix document.

    A scenario file is accepted too and stands for its true (aged) plant.
    """
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as err:
        raise CliError(f"{path}:{err.lineno}:{err.colno}: {err.msg}", "format") from None
    if not isinstance(doc, dict):
        raise CliError(f"{path}: expected a JSON object", "format")
    if "coefficients" in doc:
        return arx.ArxModel.from_dict(doc)
    if "gain" in doc:
        return TransferMatrixModel.from_dict(doc)
    return load_scenario(path).truth


def _base_model(args, scn):
    if getattr(args, "model", None):
        model = arx.ArxModel.load(args.model)
    else:
        log.info("no --model given; converting the nominal plant")
        model = arx.convert_from_plant(scn.nominal, scn.conversion)
    return model


def _datasets(args, scn, base):
    records = [SimulationRecord.read_csv(p) for p in args.records]
    cfg = scn.mle
    return [mle.build_dataset(r, mle.extract_window(r, cfg.t_r, cfg.half_width, base.order),
                              base.order) for r in records]


def cmd_simulate(args):
    scn = _scenario(args)
    os.makedirs(args.output, exist_ok=True)
    written = []
    for a in range(len(scn.schedules)):
        path = os.path.join(args.output, f"record_{a + 1}.csv")
        run_closed_loop(scn, a).write_csv(path)
        written.append(path)
    return {"records": written}


def cmd_convert(args):
    scn = _scenario(args)
    model = arx.convert_from_plant(scn.nominal, scn.conversion)
    model.save(args.output)
    return {"model": args.output, "coefficients": int(model.coefficients.size),
            "E": bench.step_benchmark(scn.nominal, model, scn.benchmark_horizon,
                                      scn.sample_period).E}


def cmd_estimate(args):
    scn = _scenario(args)
    base = _base_model(args, scn)
    d1, d2 = _datasets(args, scn, base)
    rep = mle.cross_validate(d1, d2, base, scn.mle.lambda_grid(), scn.mle.standardize,
                             scn.mle.include_penalty)
    stem, _ = os.path.splitext(args.output)
    model_path = stem + ".corrected.json"
    rep.final_estimate.corrected.save(model_path)
    with open(args.output, "w") as f:
        json.dump(rep.to_dict(os.path.basename(model_path)), f, indent=2)
        f.write("\n")
    return {"report": args.output, "lambda_star": rep.lambda_star}


def cmd_cv_sweep(args):
    scn = _scenario(args)
    base = _base_model(args, scn)
    d1, d2 = _datasets(args, scn, base)
    grid = scn.mle.lambda_grid()
    rep = mle.cross_validate(d1, d2, base, grid, scn.mle.standardize, scn.mle.include_penalty)
    sweep = bench.lambda_sweep(scn.truth, d1, d2, base, grid, scn.mle.standardize,
                               scn.benchmark_horizon)
    with open(args.output, "w", newline="") as f:
        f.write("lambda,E,cv_loss_fold1,cv_loss_fold2,cv_loss_sum\n")
        for k, (lam, E) in enumerate(sweep):
            row = (lam, E, rep.loss_fold1[k], rep.loss_fold2[k], rep.loss_sum[k])
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    return {"sweep": args.output, "lambda_star": rep.lambda_star}


def cmd_bench(args):
    truth = _load_model(args.truth)
    if not isinstance(truth, TransferMatrixModel):
        raise CliError("--truth must be a transfer-matrix model or a scenario", "format")
    model = _load_model(args.model)
    res = bench.step_benchmark(truth, model, args.horizon, args.sample_period)
    return {"E": res.E, "per_channel": res.per_channel.tolist(), "horizon": res.horizon}


def cmd_reproduce(args):
    from .reproduce import reproduce
    out = reproduce(args.output, seed=42 if args.seed is None else args.seed, null=args.null,
                    record_runtime=args.record_runtime, threads=args.threads)
    return out["summary"]


def _global_flags(defaults):
    # subcommands repeat the flags with suppressed defaults so a value given
    # before the subcommand is not overwritten
    g = _Parser(add_help=False)
    pick = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    g.add_argument("--seed", type=int, default=pick(None), help="override the scenario seed")
    g.add_argument("--threads", type=int, default=pick(1),
                   help="worker threads for independent scenario runs")
    g.add_argument("--log-level", default=pick("WARNING"),
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return g


def build_parser():
    common = _global_flags(False)
    p = _Parser(prog="modellife", description=__doc__.splitlines()[0],
                parents=[_global_flags(True)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="closed-loop records as CSV")
    s.add_argument("scenario")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("convert", parents=[common], help="fit the sparse ARX base model")
    s.add_argument("scenario")
    s.add_argument("-o", "--output", required=True, help="model JSON path")
    s.set_defaults(func=cmd_convert)

    for name, func, what, blurb in (
            ("estimate", cmd_estimate, "report JSON path", "cross-validated mismatch estimate"),
            ("cv-sweep", cmd_cv_sweep, "sweep CSV path", "validation loss and E over the grid")):
        s = sub.add_parser(name, parents=[common], help=blurb)
        s.add_argument("scenario")
        s.add_argument("--records", nargs=2, required=True, metavar=("A.csv", "B.csv"))
        s.add_argument("--model", help="base ARX model JSON (converted if omitted)")
        s.add_argument("-o", "--output", required=True, help=what)
        s.set_defaults(func=func)

    s = sub.add_parser("bench", parents=[common], help="step-response benchmark")
    s.add_argument("--truth", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--horizon", type=float, default=100.0)
    s.add_argument("--sample-period", type=float, default=0.2)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("reproduce", parents=[common], help="full experiment report")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--null", action="store_true", help="unaged, noise-free control run")
    s.add_argument("--record-runtime", action="store_true",
                   help="store wall-clock time in the summaries (breaks byte equality)")
    s.set_defaults(func=cmd_reproduce)
    return p


def _fail(kind, message, stage=None, code=1):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "stage": stage}) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except CliError as err:
        return _fail("usage", str(err), code=2)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    if args.threads < 1:
        return _fail("usage", "--threads must be at least 1", code=2)
    try:
        result = args.func(args)
    except CliError as err:
        return _fail(err.kind, str(err), err.stage, code=2)
    except ScenarioError as err:
        return _fail("scenario", str(err), err.path)
    except (OSError, ValueError, np.linalg.LinAlgError, RuntimeError) as err:
        return _fail(type(err).__name__, str(err), getattr(err, "stage", args.command))
    sys.stdout.write(json.dumps(result) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
