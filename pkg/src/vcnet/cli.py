"""Command line front end.

Subcommands: ``train``, ``eval``, ``gen``, ``gradcheck``. Machine-readable
results (one JSON object) go to stdout; progress and diagnostics go to
stderr. Exit codes: 0 success, 1 configuration or usage error, 2 data or
checkpoint error, 3 numeric failure.

Every option can also come from a JSON file passed as ``--config``; keys
match the long option names with dashes replaced by underscores, and
explicit flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data as dataio
from . import metrics as met
from . import report
from . import training
from .errors import CheckpointError, ConfigError, DataError, NumericError, VcnetError
from .gradcheck import gradient_check
from .model import load_checkpoint, save_checkpoint
from .training import TrainConfig, build_model, train, write_history_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(obj) -> None:
    """The single machine-readable result object, canonical form."""
    print(json.dumps(obj, sort_keys=True, indent=1))


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve that
    for data problems, so usage errors are remapped to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# Defaults live here, not in argparse, so that a --config file can sit
# between the built-in default and an explicit flag.
TRAIN_DEFAULTS = {
    "val": None,
    "test": None,
    "split": "0.8,0.1,0.1",
    "readout": "virtual",
    "steps": 11,
    "dh": 8,
    "dv": 8,
    "head_hidden": 0,
    "activation": "relu",
    "dropout": 0.0,
    "no_virtual": False,
    "no_virtual_gate": False,
    "reset_gate": False,
    "lr": 0.001,
    "optimizer": "adam",
    "batch": 100,
    "epochs": 500,
    "patience": 5,
    "halvings": 4,
    "seed": 0,
    "threads": 1,
    "out": "run",
}

EVAL_DEFAULTS = {
    "scores": None,
    "threshold": 0.5,
    "threads": 1,
}

GEN_DEFAULTS = {
    "n": 1000,
    "seed": 0,
    "min_nodes": 8,
    "max_nodes": 12,
}

GRADCHECK_DEFAULTS = {
    "seed": 0,
    "graphs": 20,
    "tol": 1e-4,
    "steps": 3,
}


def _merged(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    fromfile = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
            fromfile = json.loads(text)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        if not isinstance(fromfile, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(fromfile) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, built_in in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in fromfile:
            out[key] = fromfile[key]
        else:
            out[key] = built_in
    return out


def _parse_split(text: str) -> tuple[float, ...]:
    try:
        parts = tuple(float(p) for p in str(text).split(","))
    except ValueError as e:
        raise ConfigError(f"bad --split value {text!r}") from e
    if len(parts) != 3:
        raise ConfigError("--split needs three comma-separated fractions")
    return parts


def _load_records(path: str, what: str) -> list:
    records = dataio.load_dataset(path)
    if not records:
        raise DataError(f"{what} dataset {path} is empty")
    return records


def _score_report(model, records, threshold: float, threads: int) -> tuple[list, dict]:
    graphs = dataio.graphs_of(records)
    labels = dataio.labels_of(records)
    scores = model.score_many(graphs, threads=threads)
    return scores, met.metrics_report(scores, labels, threshold=threshold)


def cmd_train(args: argparse.Namespace) -> int:
    opt = _merged(args, TRAIN_DEFAULTS)
    if args.data is None:
        raise ConfigError("--data is required")

    records = _load_records(args.data, "training")
    if opt["val"]:
        train_recs = records
        val_recs = _load_records(opt["val"], "validation")
        test_recs = _load_records(opt["test"], "test") if opt["test"] else []
    else:
        fractions = _parse_split(opt["split"])
        labels = dataio.labels_of(records)
        tr_idx, va_idx, te_idx = met.split(
            list(range(len(records))), fractions, seed=int(opt["seed"]), labels=labels
        )
        train_recs = [records[i] for i in tr_idx]
        val_recs = [records[i] for i in va_idx]
        test_recs = [records[i] for i in te_idx]
        if not val_recs:
            # tiny datasets: validate on the training rows rather than fail
            train_recs, val_recs, test_recs = records, records, []

    cfg = TrainConfig(
        d_h=int(opt["dh"]),
        d_v=int(opt["dv"]),
        steps=int(opt["steps"]),
        readout=str(opt["readout"]),
        virtual=not bool(opt["no_virtual"]),
        virtual_gate=not bool(opt["no_virtual_gate"]),
        reset_gate=bool(opt["reset_gate"]),
        activation=str(opt["activation"]),
        head_hidden=int(opt["head_hidden"]),
        dropout=float(opt["dropout"]),
        lr=float(opt["lr"]),
        optimizer=str(opt["optimizer"]),
        batch_size=int(opt["batch"]),
        max_epochs=int(opt["epochs"]),
        max_halvings=int(opt["halvings"]),
        patience=int(opt["patience"]),
        seed=int(opt["seed"]),
    )

    train_graphs = dataio.graphs_of(train_recs)
    val_graphs = dataio.graphs_of(val_recs)
    rng = np.random.default_rng(cfg.seed)
    model = build_model(cfg, train_graphs, rng)
    _log(f"training on {len(train_graphs)} graphs, validating on {len(val_graphs)}, "
         f"{model.n_parameters()} parameters")
    result = train(model, train_graphs, val_graphs, cfg, log=_log)

    out_dir = Path(opt["out"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"cannot create output directory {out_dir}: {e}") from e

    save_checkpoint(out_dir / "checkpoint.json", model)
    write_history_csv(result.history, out_dir / "history.csv")

    threads = int(opt["threads"])
    _, val_report = _score_report(model, val_recs, 0.5, threads)
    summary = {
        "best_epoch": result.best_epoch,
        "best_val_auc": result.best_metric,
        "epochs_run": len(result.history),
        "halvings": result.halvings,
        "stopped": result.stopped,
        "val": val_report,
    }
    if test_recs:
        _, test_report = _score_report(model, test_recs, 0.5, threads)
        summary["test"] = test_report
    metrics_text = json.dumps(summary, sort_keys=True, indent=1) + "\n"
    (out_dir / "metrics.json").write_text(metrics_text, encoding="utf-8")

    manifest = {
        "command": "train",
        "task": args.task,
        "config": asdict(cfg),
        "data": {
            "train_path": str(args.data),
            "val_path": str(opt["val"]) if opt["val"] else None,
            "test_path": str(opt["test"]) if opt["test"] else None,
            "split": None if opt["val"] else opt["split"],
            "n_train": len(train_recs),
            "n_val": len(val_recs),
            "n_test": len(test_recs),
        },
        "outputs": ["checkpoint.json", "curves.png", "history.csv", "metrics.json"],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    report.save_training_curves(result.history, out_dir / "curves.png")

    _log(f"artifacts written to {out_dir}")
    _emit(summary)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    opt = _merged(args, EVAL_DEFAULTS)
    if args.data is None:
        raise ConfigError("--data is required")
    if args.checkpoint is None:
        raise ConfigError("--checkpoint is required")

    model = load_checkpoint(args.checkpoint)
    records = _load_records(args.data, "evaluation")
    threshold = float(opt["threshold"])
    scores, rep = _score_report(model, records, threshold, int(opt["threads"]))

    if opt["scores"]:
        scores_path = Path(opt["scores"])
        if scores_path.parent != Path(""):
            scores_path.parent.mkdir(parents=True, exist_ok=True)
        with open(scores_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "score", "label"])
            for rec, s in zip(records, scores):
                writer.writerow([rec.id, repr(float(s)), rec.graph.label])
        labels = dataio.labels_of(records)
        report.save_roc_curve(scores, labels, scores_path.with_suffix(".png"),
                              auc_value=rep["auc"])
        _log(f"scores written to {scores_path}, curve to {scores_path.with_suffix('.png')}")

    _emit(rep)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    opt = _merged(args, GEN_DEFAULTS)
    if args.task is None:
        raise ConfigError("--task is required")
    if args.out is None:
        raise ConfigError("--out is required")
    spec = dataio.SyntheticSpec(
        task=args.task,
        n_graphs=int(opt["n"]),
        min_nodes=int(opt["min_nodes"]),
        max_nodes=int(opt["max_nodes"]),
        seed=int(opt["seed"]),
    )
    records = dataio.generate(spec)
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    dataio.save_dataset(records, out_path)
    n_pos = sum(dataio.labels_of(records))
    _emit({"task": spec.task, "n": len(records), "n_pos": n_pos,
           "path": str(out_path), "seed": spec.seed})
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    opt = _merged(args, GRADCHECK_DEFAULTS)
    rep = gradient_check(
        seed=int(opt["seed"]),
        n_graphs=int(opt["graphs"]),
        tol=float(opt["tol"]),
        steps=int(opt["steps"]),
    )
    _emit({"max_rel_err": rep.max_rel_err, "n_graphs": rep.n_graphs,
           "passed": rep.passed, "tol": rep.tol})
    if not rep.passed:
        _log(f"worst mismatch: {rep.worst}")
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="vcnet", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write run artifacts")
    p_train.add_argument("--data", help="training dataset (JSON lines)")
    p_train.add_argument("--val", help="validation dataset; omit to split --data")
    p_train.add_argument("--test", help="held-out dataset scored after training")
    p_train.add_argument("--split", help="train,val,test fractions when no --val")
    p_train.add_argument("--task", help="label recorded for bookkeeping only")
    p_train.add_argument("--readout", choices=["virtual", "mean"])
    p_train.add_argument("--steps", type=int, help="recurrence depth T")
    p_train.add_argument("--dh", type=int, help="node state width")
    p_train.add_argument("--dv", type=int, help="virtual state width")
    p_train.add_argument("--head-hidden", type=int, dest="head_hidden")
    p_train.add_argument("--activation", choices=["relu", "tanh"])
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--no-virtual", action="store_true", default=None,
                         dest="no_virtual", help="plain column network baseline")
    p_train.add_argument("--no-virtual-gate", action="store_true", default=None,
                         dest="no_virtual_gate")
    p_train.add_argument("--reset-gate", action="store_true", default=None,
                         dest="reset_gate")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--optimizer", choices=list(training.OPTIMIZERS))
    p_train.add_argument("--batch", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--patience", type=int)
    p_train.add_argument("--halvings", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--threads", type=int)
    p_train.add_argument("--out", help="output directory for run artifacts")
    p_train.add_argument("--config", help="JSON file of option defaults")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="score a dataset with a checkpoint")
    p_eval.add_argument("--data")
    p_eval.add_argument("--checkpoint")
    p_eval.add_argument("--scores", help="write per-graph scores CSV (plus ROC figure)")
    p_eval.add_argument("--threshold", type=float)
    p_eval.add_argument("--threads", type=int)
    p_eval.add_argument("--config", help="JSON file of option defaults")
    p_eval.set_defaults(fn=cmd_eval)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--task", help=f"one of {', '.join(dataio.TASKS)}")
    p_gen.add_argument("--n", type=int)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--min-nodes", type=int, dest="min_nodes")
    p_gen.add_argument("--max-nodes", type=int, dest="max_nodes")
    p_gen.add_argument("--out", help="output JSONL path")
    p_gen.add_argument("--config", help="JSON file of option defaults")
    p_gen.set_defaults(fn=cmd_gen)

    p_gc = sub.add_parser("gradcheck", help="compare gradients to finite differences")
    p_gc.add_argument("--seed", type=int)
    p_gc.add_argument("--graphs", type=int)
    p_gc.add_argument("--tol", type=float)
    p_gc.add_argument("--steps", type=int)
    p_gc.add_argument("--config", help="JSON file of option defaults")
    p_gc.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except ConfigError as e:
        _log(f"configuration error: {e}")
        return EXIT_CONFIG
    except (DataError, CheckpointError) as e:
        _log(f"data error: {e}")
        return EXIT_DATA
    except NumericError as e:
        _log(f"numeric failure: {e}")
        return EXIT_NUMERIC
    except VcnetError as e:
        _log(f"error: {e}")
        return EXIT_CONFIG
    except OSError as e:
        _log(f"i/o error: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
