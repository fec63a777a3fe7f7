"""Command-line workbench: ``mobgp {simulate,fit,predict,evaluate,bench}``.

Exit codes are stable: 0 success, 2 usage or configuration error, 3 bad or
degenerate data, 4 model/scheme mismatch.

Every run writes ``manifest.json`` into the output directory. Wall-clock
timings go to the manifest and to files whose names contain ``timings``.
All other CSV and JSON outputs depend only on the inputs and the seed, so
they are byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
from threadpoolctl import threadpool_limits

from . import __version__, io, plotting
from .bench import COLUMNS as BENCH_COLUMNS
from .bench import OPERATIONS, run_bench
from .constraints import (ConstraintConfig, build_constraint_points, evaluate_constraints,
                          fit_constrained)
from .exceptions import DegenerateData, EmptyInput, MobGPError, ModelMismatch
from .gp.model import FitConfig, MultiTaskGP, fit
from .gp.params import NOISE_MODES, TrainingSet
from .markov import TimeBinScheme, estimate_empirical
from .report import TASKS
from .synth import SimulationConfig, TransitionFunctionSpec, simulate_chain

log = logging.getLogger("mobgp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MISMATCH = 0, 2, 3, 4
FLOAT_FORMAT = "%.17g"
SWEEP_LEVELS = (1, 2, 4)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _out_dir(args):
    path = Path(args.out_dir or os.environ.get("MOBGP_OUT") or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(df, path):
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_constraints(text):
    """``off`` -> None, ``bins`` -> training bins, ``uniform:N`` -> N even points."""
    if text == "off":
        return None
    if text == "bins":
        return "training_bins"
    if text.startswith("uniform:"):
        try:
            m = int(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad constraint spec {text!r}") from None
        if m <= 0:
            raise UsageError("uniform constraint count must be positive")
        return ("uniform", m)
    raise UsageError(f"--constraints must be off, bins or uniform:N, got {text!r}")


def _load_spec(path):
    try:
        return TransitionFunctionSpec.from_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read spec {path}: {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(f"malformed spec {path}: {exc}") from exc


def _load_model(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc
    try:
        return MultiTaskGP.from_json(text)
    except ModelMismatch:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed model {path}: {exc}") from exc


def _load_dataset(path, bins_per_hour):
    """A transition dataset from a state CSV or a dataset CSV.

    State CSVs are binned at ``bins_per_hour`` (hourly when unset). A
    dataset CSV carries its own scheme, which must agree with the flag.
    """
    try:
        header = pd.read_csv(path, nrows=0).columns.tolist()
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        if "state" in header:
            scheme = TimeBinScheme(bins_per_hour or 1)
            seqs = io.read_sequences(path)
            return estimate_empirical(io.count_transitions(seqs, scheme))
        ds = io.read_dataset(path)
    except (MobGPError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    if bins_per_hour and ds.scheme.bins_per_hour != bins_per_hour:
        raise ModelMismatch(f"{path} has {ds.scheme.bins_per_hour} bins per hour, "
                            f"--bins-per-hour asked for {bins_per_hour}")
    return ds


def _fit_config(args):
    try:
        return FitConfig(n_iter=args.n_iter, solver=args.solver or "auto",
                         noise_mode=args.noise_mode, seed=args.seed,
                         learning_rate=args.learning_rate)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fit_dataset(ds, args):
    """Fit with or without constraints; returns ``(model, report, loss_df)``."""
    data = TrainingSet.from_dataset(ds)
    rule = _parse_constraints(args.constraints)
    cfg = _fit_config(args)
    bph = ds.scheme.bins_per_hour
    if rule is None:
        model = fit(data, cfg, bins_per_hour=bph)
        trace, stages, weights = model.loss_trace, [0] * len(model.loss_trace), [0.0]
        points = build_constraint_points(ds.scheme, "training_bins")
        report = evaluate_constraints(model, points)
    else:
        points = build_constraint_points(ds.scheme, rule)
        try:
            ccfg = ConstraintConfig(penalty_weight=args.penalty_weight)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        res = fit_constrained(data, points, ccfg, cfg, bins_per_hour=bph)
        model, report, trace = res
        stages = np.searchsorted(res.stage_starts, np.arange(len(trace)), side="right") - 1
        weights = res.stage_weights
    loss = pd.DataFrame({
        "iteration": np.arange(len(trace)),
        "stage": np.asarray(stages, dtype=int),
        "penalty_weight": [weights[s] for s in stages],
        "objective": np.asarray(trace, dtype=float),
    })
    return model, report, loss


def _metrics(model, queries, reference, mask=None):
    """Per-task RMSE and MAE of the posterior mean against ``reference``."""
    mu = model.posterior_mean(queries)
    mask = np.isfinite(reference) if mask is None else mask
    out = {}
    for k, name in enumerate(model.task_names):
        err = mu[mask[:, k], k] - reference[mask[:, k], k]
        out[name] = {"rmse": float(np.sqrt(np.mean(err ** 2))) if err.size else None,
                     "mae": float(np.mean(np.abs(err))) if err.size else None,
                     "n": int(err.size)}
    return out


def _prediction_frame(pred, truth=None):
    df = pd.DataFrame({"hour": pred.queries})
    for k, name in enumerate(pred.task_names):
        df[f"mean_{name}"] = pred.mean[:, k]
        df[f"var_{name}"] = pred.variance[:, k]
        if truth is not None:
            df[f"ref_{name}"] = truth[:, k]
    return df


# ---------------------------------------------------------------- commands

def cmd_simulate(args, out):
    if args.weeks is None or args.weeks < 1:
        raise UsageError("--weeks must be a positive integer")
    if args.spec:
        spec = _load_spec(args.spec)
    elif args.preset == "constant":
        spec = TransitionFunctionSpec.constant(args.a_pm, args.a_mp)
    else:
        spec = TransitionFunctionSpec.sinusoid(0.5, 0.3, cycles_per_week=7)
    try:
        sim = SimulationConfig(weeks=args.weeks, steps_per_hour=args.steps_per_hour,
                               seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seq = simulate_chain(spec, sim)
    scheme = TimeBinScheme(args.bins_per_hour or 1)
    ds = estimate_empirical(io.count_transitions([seq], scheme))
    io.write_sequences(seq, out / "states.csv")
    io.write_dataset(ds, out / "dataset.csv")
    (out / "spec.json").write_text(spec.to_json() + "\n")
    truth = pd.DataFrame({"hour": scheme.centers()})
    rows = spec.rows(scheme.centers())
    for k, name in enumerate(TASKS):
        truth[f"a_{name}"] = rows[:, k]
    _write_csv(truth, out / "truth.csv")
    print(f"simulated {len(seq)} states over {args.weeks} weeks")
    return ["states.csv", "dataset.csv", "spec.json", "truth.csv"], {}


def cmd_fit(args, out):
    ds = _load_dataset(args.data, args.bins_per_hour)
    t0 = time.perf_counter()
    try:
        model, report, loss = _fit_dataset(ds, args)
    except (DegenerateData, EmptyInput) as exc:
        raise DataError(str(exc)) from exc
    elapsed = time.perf_counter() - t0
    (out / "model.json").write_text(model.to_json() + "\n")
    _write_csv(loss, out / "loss.csv")
    (out / "constraints.json").write_text(report.to_json(include_timing=False) + "\n")
    _write_csv(pd.DataFrame({"stage": ["fit", "constraint_evaluation"],
                             "seconds": [elapsed, (report.wall_time_ms or 0.0) / 1e3]}),
               out / "fit_timings.csv")
    print(f"training rows: {len(ds)}; final objective {loss['objective'].iloc[-1]:.6f}; "
          f"mean stochasticity violation {report.stochasticity_mean:.3e}")
    return (["model.json", "loss.csv", "constraints.json", "fit_timings.csv"],
            {"fit_seconds": elapsed})


def _query_grid(model, args):
    bph = args.bins_per_hour or model.bins_per_hour or 1
    return TimeBinScheme(bph).centers()


def cmd_predict(args, out):
    model = _load_model(args.model)
    if args.queries:
        try:
            q = pd.read_csv(args.queries, float_precision="round_trip")["hour"].to_numpy(float)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read queries {args.queries}: {exc}") from exc
    else:
        q = _query_grid(model, args)
    pred = model.predict(q, include_noise=args.include_noise)
    _write_csv(_prediction_frame(pred), out / "predictions.csv")
    print(f"predicted {q.size} query points")
    return ["predictions.csv"], {}


def _check_scheme(model, bins_per_hour):
    if bins_per_hour and model.bins_per_hour and bins_per_hour != model.bins_per_hour:
        raise ModelMismatch(f"model was fitted with {model.bins_per_hour} bins per hour, "
                            f"not {bins_per_hour}")


def cmd_evaluate(args, out):
    if args.sweep:
        return _evaluate_sweep(args, out)
    if not args.model:
        raise UsageError("evaluate needs --model (or --sweep with --data)")
    model = _load_model(args.model)
    _check_scheme(model, args.bins_per_hour)
    scheme = TimeBinScheme(model.bins_per_hour or args.bins_per_hour or 1)
    q = scheme.centers()
    t0 = time.perf_counter()
    if args.truth:
        ref = _load_spec(args.truth).rows(q)
        mask, source = np.ones_like(ref, dtype=bool), "truth"
    elif args.heldout:
        ds = _load_dataset(args.heldout, None)
        if ds.scheme != scheme:
            raise ModelMismatch(f"held-out data has {ds.scheme.bins_per_hour} bins per hour, "
                                f"model has {scheme.bins_per_hour}")
        ref, mask, source = ds.rows, ds.mask, "heldout"
    else:
        raise UsageError("evaluate needs --truth or --heldout")
    pred = model.predict(q)
    report = evaluate_constraints(model, build_constraint_points(scheme, "training_bins"))
    metrics = {
        "reference": source,
        "bins_per_hour": scheme.bins_per_hour,
        "tasks": _metrics(model, q, ref, mask),
        "final_nll": model.nll(),
        "constraints": report.to_dict(include_timing=False),
    }
    elapsed = time.perf_counter() - t0
    _write_json(metrics, out / "metrics.json")
    _write_csv(_prediction_frame(pred, np.where(mask, ref, np.nan)), out / "predictions.csv")
    plotting.plot_posterior(pred, model.training, out / "posterior.svg",
                            truth=ref if source == "truth" else None)
    summary = pd.DataFrame({"bins_per_hour": [scheme.bins_per_hour],
                            "mean_violation": [report.stochasticity_mean],
                            "max_violation": [report.stochasticity_max]})
    _write_csv(summary, out / "constraint_summary.csv")
    plotting.plot_sweep(summary["bins_per_hour"], summary["mean_violation"], [elapsed],
                        out / "constraint_summary.svg")
    _write_csv(pd.DataFrame({"stage": ["evaluate"], "seconds": [elapsed]}),
               out / "evaluate_timings.csv")
    for name, m in metrics["tasks"].items():
        print(f"{name}: rmse {m['rmse']:.4f} mae {m['mae']:.4f}")
    return (["metrics.json", "predictions.csv", "posterior.svg", "constraint_summary.csv",
             "constraint_summary.svg", "evaluate_timings.csv"], {"evaluate_seconds": elapsed})


def _evaluate_sweep(args, out):
    """Fit the same sequence at 1, 2 and 4 bins per hour and compare."""
    if not args.data:
        raise UsageError("--sweep needs --data with a state CSV")
    truth = _load_spec(args.truth) if args.truth else None
    rows, timing_rows, losses, curves = [], [], [], {}
    for bph in SWEEP_LEVELS:
        try:
            header = pd.read_csv(args.data, nrows=0).columns.tolist()
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise DataError(f"cannot read {args.data}: {exc}") from exc
        if "state" not in header:
            raise DataError("--sweep needs a state CSV so it can be re-binned")
        ds = _load_dataset(args.data, bph)
        t0 = time.perf_counter()
        try:
            model, report, loss = _fit_dataset(ds, args)
        except (DegenerateData, EmptyInput) as exc:
            raise DataError(str(exc)) from exc
        elapsed = time.perf_counter() - t0
        q = ds.scheme.centers()
        row = {"bins_per_hour": bph, "n_training_rows": len(ds),
               "n_constraint_points": report.n_points,
               "mean_violation": report.stochasticity_mean,
               "max_violation": report.stochasticity_max,
               "min_posterior_mean": report.families["nonnegativity"].min_value,
               "initial_objective": float(loss["objective"].iloc[0]),
               "final_objective": float(loss["objective"].iloc[-1])}
        if truth is not None:
            for name, m in _metrics(model, q, truth.rows(q)).items():
                row[f"rmse_{name}"] = m["rmse"]
        rows.append(row)
        timing_rows.append({"bins_per_hour": bph, "fit_seconds": elapsed})
        losses.append(loss.assign(bins_per_hour=bph))
        curves[f"{bph} per hour"] = loss["objective"].to_numpy()
        log.info("sweep level %d done in %.1fs", bph, elapsed)
    table = pd.DataFrame(rows)
    timings = pd.DataFrame(timing_rows)
    _write_csv(table, out / "sweep.csv")
    _write_csv(timings, out / "sweep_timings.csv")
    loss_all = pd.concat(losses, ignore_index=True)
    _write_csv(loss_all[["bins_per_hour", "iteration", "stage", "penalty_weight", "objective"]],
               out / "loss_sweep.csv")
    plotting.plot_sweep(table["bins_per_hour"], table["mean_violation"],
                        timings["fit_seconds"], out / "sweep.svg")
    plotting.plot_loss(curves, out / "loss_sweep.svg")
    print(table.to_string(index=False))
    return (["sweep.csv", "sweep_timings.csv", "loss_sweep.csv", "sweep.svg", "loss_sweep.svg"],
            {"fit_seconds": timings["fit_seconds"].tolist()})


def cmd_bench(args, out):
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
        ops = [s.strip() for s in args.operations.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --sizes: {exc}") from exc
    if not sizes or any(n < 64 for n in sizes):
        raise UsageError("--sizes must be integers >= 64")
    if args.repetitions < 5:
        raise UsageError("--repetitions must be at least 5")
    try:
        rows = run_bench(sizes, args.repetitions, ops, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    df = pd.DataFrame([r.as_tuple() for r in rows], columns=list(BENCH_COLUMNS))
    _write_csv(df, out / "bench_timings.csv")
    print(df.to_string(index=False))
    return ["bench_timings.csv"], {}


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "bench": cmd_bench}


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins-per-hour", type=int, choices=(1, 2, 4), default=None,
                   help="temporal bins per hour (default: from data or model, else 1)")
    p.add_argument("--solver", choices=("auto", "dense", "structured"), default="auto")
    p.add_argument("--constraints", default="bins", help="off, bins or uniform:N")
    p.add_argument("--penalty-weight", type=float, default=100.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=None, help="defaults to $MOBGP_OUT or .")
    p.add_argument("-v", "--verbose", action="store_true")


def _fit_options(p):
    p.add_argument("--n-iter", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--noise-mode", choices=NOISE_MODES, default="per_task")


def build_parser():
    parser = argparse.ArgumentParser(prog="mobgp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mobgp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a move/pause sequence")
    _common(p)
    p.add_argument("--spec", help="transition function spec JSON")
    p.add_argument("--preset", choices=("sinusoid", "constant"), default="sinusoid")
    p.add_argument("--a-pm", type=float, default=0.2)
    p.add_argument("--a-mp", type=float, default=0.4)
    p.add_argument("--weeks", type=int, required=True)
    p.add_argument("--steps-per-hour", type=int, default=4)

    p = sub.add_parser("fit", help="fit a (constrained) multi-task GP")
    _common(p)
    _fit_options(p)
    p.add_argument("--data", required=True, help="state CSV or transition dataset CSV")

    p = sub.add_parser("predict", help="posterior mean and variance at query hours")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--queries", help="CSV with an 'hour' column (default: bin centres)")
    p.add_argument("--include-noise", action="store_true")

    p = sub.add_parser("evaluate", help="metrics and plots against truth or held-out data")
    _common(p)
    _fit_options(p)
    p.add_argument("--model")
    p.add_argument("--truth", help="transition function spec JSON")
    p.add_argument("--heldout", help="transition dataset CSV")
    p.add_argument("--sweep", action="store_true",
                   help="fit --data at 1, 2 and 4 bins per hour and compare")
    p.add_argument("--data", help="state CSV for --sweep")

    p = sub.add_parser("bench", help="time structured against dense algebra")
    _common(p)
    p.add_argument("--sizes", default="1024,2048,4096")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--operations", default=",".join(OPERATIONS))
    return parser


def _config_digest(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out_dir", "verbose")}
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def _manifest(args, outputs, timings, started, status, error=None):
    return {
        "command": args.command,
        "arguments": {k: v for k, v in sorted(vars(args).items())},
        "config_digest": _config_digest(args),
        "seed": args.seed,
        "versions": {"mobgp": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "pandas": pd.__version__},
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": list(outputs),
        "timings": timings,
        "status": status,
        "error": error,
    }


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        out = _out_dir(args)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, outputs, timings, error = EXIT_OK, [], {}, None
    try:
        with threadpool_limits(limits=args.threads):
            outputs, timings = COMMANDS[args.command](args, out)
    except UsageError as exc:
        code, error = EXIT_USAGE, str(exc)
    except ModelMismatch as exc:
        code, error = EXIT_MISMATCH, str(exc)
    except (DataError, DegenerateData, EmptyInput) as exc:
        code, error = EXIT_DATA, str(exc)
    if error:
        print(f"error: {error}", file=sys.stderr)
    timings = dict(timings, total_seconds=time.perf_counter() - t0)
    _write_json(_manifest(args, outputs, timings, started,
                          "ok" if code == EXIT_OK else "error", error),
                out / "manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
