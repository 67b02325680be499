"""Command-line interface: train, estimate, sweep, report.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical or solver
error, 4 I/O or checkpoint-format error.  Outputs are deterministic by
default; pass --no-deterministic to keep real wall-clock timings in
metrics.json and unsalted SVG metadata.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .errormap import build_report
from .exceptions import (CheckpointError, ConfigError, ErrmapError,
                         SolverError, TrainingError)
from .fdm import SpaceTimeField, field_shape, field_to_csv, grid_for, read_csv_columns
from .network import load_checkpoint, save_checkpoint
from .problems import ConstrainedModel, get_problem
from .train import TrainConfig, loss_history_to_csv, train

DEFAULT_SWEEP_GRIDS = (9, 17, 33, 65, 129)

_TRAIN_KEYS = ("n_collocation", "iterations", "learning_rate", "adam_beta1",
               "adam_beta2", "adam_eps", "seed", "resample_each_iter",
               "divergence_limit", "problem_params")


def _load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _train_config(doc, seed_override=None):
    if "problem" not in doc:
        raise ConfigError("config is missing the 'problem' field")
    kwargs = {k: doc[k] for k in _TRAIN_KEYS if k in doc}
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return TrainConfig(problem=doc["problem"], **kwargs).validate()


def _write_json(doc, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(args):
    doc = _load_config(args.config)
    cfg = _train_config(doc, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    params, history = train(cfg, progress_every=args.progress_every)
    elapsed = time.perf_counter() - t0

    meta = {
        "problem": cfg.problem,
        "iterations": str(cfg.iterations),
        "n_collocation": str(cfg.n_collocation),
        "learning_rate": repr(cfg.learning_rate),
        "seed": str(cfg.seed),
    }
    if cfg.problem_params:
        meta["problem_params"] = json.dumps(cfg.problem_params, sort_keys=True)
    stem = Path(args.config).stem
    ckpt_path = out / f"{stem}.ckpt.json"
    save_checkpoint(params, meta, ckpt_path)
    loss_history_to_csv(history, out / "loss.csv")

    final = history.losses[-1] if history.losses else float("nan")
    print(f"checkpoint: {ckpt_path}")
    print(f"final loss: {final:.6e}  wall time: {elapsed:.1f}s")
    return 0


def _estimators(text):
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    if not names:
        raise ConfigError("--estimators must name at least one of res,fdm,bound")
    return names


def _field_csv_name(tag):
    return f"{tag}.csv"


def _export_report(report, out, config_doc, seed, deterministic):
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for tag, f in (("residual", report.residual), ("e_true", report.e_true),
                   ("e_res", report.e_res), ("e_fdm", report.e_fdm)):
        if f is not None:
            field_to_csv(f, out / _field_csv_name(tag))
            written.append(_field_csv_name(tag))

    runtimes = {k: 0.0 for k in report.runtime_seconds} if deterministic \
        else report.runtime_seconds
    doc = {
        "problem": report.problem.id,
        "grid": {"k": report.grid.k, "n_t": report.grid.n_t},
        "seed": seed,
        "config": config_doc,
        "runtime_seconds": runtimes,
        "bound_steps": report.bound_steps if not deterministic else 0,
    }
    doc.update(report.metrics)
    _write_json(doc, out / "metrics.json")
    written.append("metrics.json")
    return written


def _render_figures(report, out, deterministic):
    from . import plots

    written = []
    plots.plot_error_slices(report, out / "slices.svg", deterministic)
    written.append("slices.svg")
    if plots.plot_l2_over_time(report, out / "l2_over_time.svg", deterministic):
        written.append("l2_over_time.svg")
    return written


def cmd_estimate(args):
    params, meta = load_checkpoint(args.checkpoint)
    problem_id = meta.get("problem")
    if not problem_id:
        raise CheckpointError(f"{args.checkpoint}: meta lacks a 'problem' entry")
    overrides = json.loads(meta["problem_params"]) if "problem_params" in meta else {}
    problem = get_problem(problem_id, **overrides)
    estimators = _estimators(args.estimators)

    model = ConstrainedModel(problem, params)
    grid = grid_for(problem, args.grid)
    report = build_report(model, problem, grid, estimators=estimators)

    out = Path(args.out)
    seed = int(meta.get("seed", params.seed))
    written = _export_report(report, out, {"checkpoint": Path(args.checkpoint).name,
                                           "grid": args.grid,
                                           "estimators": list(estimators)},
                             seed, args.deterministic)
    if args.plots:
        written += _render_figures(report, out, args.deterministic)

    for key in ("l2_true_res", "l2_true_fdm"):
        if key in report.metrics:
            print(f"{key}: {report.metrics[key]:.6e}")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


def cmd_sweep(args):
    doc = _load_config(args.config)
    grids = [int(k) for k in doc.get("grids", DEFAULT_SWEEP_GRIDS)]
    seeds = [int(s) for s in doc.get("seeds", [0])]
    if len(grids) < 2:
        raise ConfigError("sweep needs at least two grid sizes")
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    estimators = tuple(doc.get("estimators", ("res", "fdm")))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    problem = get_problem(doc.get("problem", ""), **doc.get("problem_params", {}))
    rows = []
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("problem,seed,k,method,l2_accuracy\n")
        fh.flush()
        for seed in seeds:
            ckpt_path = out / f"seed{seed}.ckpt.json"
            if ckpt_path.exists():
                params, _ = load_checkpoint(ckpt_path)
            else:
                cfg = _train_config(doc, seed)
                params, history = train(cfg)
                save_checkpoint(params, {"problem": cfg.problem,
                                         "seed": str(seed)}, ckpt_path)
            model = ConstrainedModel(problem, params)
            for k in grids:
                grid = grid_for(problem, k)
                report = build_report(model, problem, grid, estimators=estimators)
                for method, key in (("res", "l2_true_res"), ("fdm", "l2_true_fdm")):
                    if key in report.metrics:
                        value = report.metrics[key]
                        rows.append({"problem": problem.id, "seed": seed, "k": k,
                                     "method": method, "l2_accuracy": value})
                        fh.write(f"{problem.id},{seed},{k},{method},"
                                 f"{format(value, '.17g')}\n")
                        fh.flush()
                print(f"seed {seed}  k {k}: done")

    if args.plots and rows:
        from . import plots
        plots.plot_sweep(rows, out / "sweep.svg", args.deterministic)
        print(f"wrote sweep.csv, sweep.svg to {out}")
    else:
        print(f"wrote sweep.csv to {out}")
    return 0


def _field_from_csv(path, grid):
    cols = read_csv_columns(path)
    return SpaceTimeField(grid=grid, values=cols["value"].reshape(field_shape(grid)))


def cmd_report(args):
    """Re-render figures and print a summary from a previous estimate directory."""
    out = Path(args.dir)
    metrics_path = out / "metrics.json"
    if not metrics_path.exists():
        raise ConfigError(f"{out}: no metrics.json found (run 'estimate' first)")
    with open(metrics_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)

    problem = get_problem(doc["problem"])
    grid = grid_for(problem, int(doc["grid"]["k"]),
                    n_t=int(doc["grid"]["n_t"]) or None)

    from .errormap import ErrorReport
    report = ErrorReport(
        problem=problem, grid=grid,
        residual=_field_from_csv(out / "residual.csv", grid),
        e_true=_field_from_csv(out / "e_true.csv", grid))
    if (out / "e_res.csv").exists():
        report.e_res = _field_from_csv(out / "e_res.csv", grid)
    if (out / "e_fdm.csv").exists():
        report.e_fdm = _field_from_csv(out / "e_fdm.csv", grid)
    report.bound_curve = [tuple(pt) for pt in doc["bound_curve"]] \
        if "bound_curve" in doc else None
    report.metrics = {k: doc[k] for k in ("l2_true_res", "l2_true_fdm", "l2_curves")
                      if k in doc}

    written = _render_figures(report, out, args.deterministic)
    print(f"{doc['problem']} on a {grid.k} x {grid.n_t or grid.k} grid")
    for key in ("l2_true_res", "l2_true_fdm"):
        if key in doc:
            print(f"  {key}: {doc[key]:.6e}")
    print(f"re-rendered {', '.join(written)} in {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="errmap",
        description="Pointwise error maps for hard-constrained PINNs via "
                    "finite-difference integration of the defect equation.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                        default=True,
                        help="byte-stable outputs (zeroed timings, salted SVG ids)")

    p_train = sub.add_parser("train", parents=[common],
                             help="train a network from a JSON config")
    p_train.add_argument("--config", required=True, help="training config JSON")
    p_train.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
    p_train.add_argument("--progress-every", type=int, default=0,
                         help="print the loss every N iterations")
    p_train.set_defaults(func=cmd_train)

    p_est = sub.add_parser("estimate", parents=[common],
                           help="compute error fields and metrics for a checkpoint")
    p_est.add_argument("--checkpoint", required=True)
    p_est.add_argument("--grid", type=int, default=64,
                       help="nodes per grid axis (default 64)")
    p_est.add_argument("--estimators", default="res,fdm",
                       help="comma list from res,fdm,bound")
    p_est.add_argument("--plots", action=argparse.BooleanOptionalAction,
                       default=True, help="render SVG figures")
    p_est.set_defaults(func=cmd_estimate)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="accuracy vs grid size over seeds")
    p_sweep.add_argument("--config", required=True,
                         help="config JSON with problem/grids/seeds")
    p_sweep.add_argument("--plots", action=argparse.BooleanOptionalAction,
                         default=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", parents=[common],
                           help="re-render figures from an estimate directory")
    p_rep.add_argument("dir", help="directory holding estimate outputs")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ErrmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
