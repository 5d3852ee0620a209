"""Command-line front end: ``msr-surrogate <command> [options]``.

Commands: gen-data, train, search, predict, eval, sweep. Options may also
come from a JSON file given with ``--config``; explicit flags win.

Exit codes: 0 success, 2 usage, 3 data or schema problem, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from msr_surrogate import __version__
from msr_surrogate import dataset as ds
from msr_surrogate import hpo, metrics, neural
from msr_surrogate.equilibrium import SHIFT_RESIDUAL_MODES
from msr_surrogate.errors import DataError, NumericalError, SurrogateError
from msr_surrogate.state import DRY_SPECIES, INPUT_NAMES, OperatingPoint

log = logging.getLogger("msr_surrogate")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

# Kinetic-regime conditions used when a sweep leaves a parameter unset.
DEFAULT_POINT = OperatingPoint(T=898.15, m_cat=1.48, SC=3.0, NC=3.0, f_CH4=3.38e-5)


class UsageError(Exception):
    pass


# -- argument parsing ------------------------------------------------------------


def _hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("layer sizes must be positive")
    return sizes


def _assignment(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name}: {value!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="root seed for every random stage (default 42)")
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("-v", "--verbose", action="count", default=0)

    splitting = argparse.ArgumentParser(add_help=False)
    splitting.add_argument("--split-before-augment", action="store_true",
                           help="split distinct records first so duplicates never cross folds")

    parser = argparse.ArgumentParser(prog="msr-surrogate", description="Methane steam reforming surrogate toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("gen-data", parents=[common], help="generate the training dataset CSV")
    p.add_argument("--out", help="dataset CSV to write")
    p.add_argument("--experimental", help="experimental CSV to ingest, or 'bundled' for the synthetic set")
    p.add_argument("--no-interpolate", action="store_true", help="skip spline interpolation of experimental series")
    p.add_argument("--empty-grid", action="store_true", help="emit no theoretical records")
    p.add_argument("--shift-residual", choices=SHIFT_RESIDUAL_MODES, default="mass-action")
    p.set_defaults(grid=None)

    p = sub.add_parser("train", parents=[common, splitting], help="train a network")
    p.add_argument("--data")
    p.add_argument("--model", help="model file to write")
    p.add_argument("--out", help="training-history CSV")
    p.add_argument("--hidden", type=_hidden, default=(6, 8, 6))
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--epochs", type=int, default=20000)
    p.add_argument("--restarts", type=int, default=8, help="seeded initializations screened (default 8)")
    p.add_argument("--screen-epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=None, help="stop after N validation increases (default off)")

    p = sub.add_parser("search", parents=[common, splitting], help="hyperparameter search")
    p.add_argument("--data", help="dataset CSV (not needed with --benchmark)")
    p.add_argument("--strategy", choices=("random", "bayes"), default="bayes")
    p.add_argument("--trials", type=int, default=20, help="random-search trials")
    p.add_argument("--max-evals", type=int, default=500, help="Bayesian-optimization budget incl. warm-up")
    p.add_argument("--out", help="trial log CSV")
    p.add_argument("--model", help="write the best model here")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--benchmark", action="store_true", help="use the analytic benchmark objective")

    p = sub.add_parser("predict", parents=[common], help="predict dry-gas compositions")
    p.add_argument("--model")
    p.add_argument("--data", help="CSV with columns " + ",".join(INPUT_NAMES))
    p.add_argument("--fixed", type=_assignment, action="append", default=[], metavar="NAME=VALUE",
                   help="single operating point (unset inputs use the default point)")
    p.add_argument("--out", help="output CSV (default stdout)")

    p = sub.add_parser("eval", parents=[common, splitting], help="evaluate a model on a dataset")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--part", choices=("all", "train", "val", "test"), default="all",
                   help="fold of the seeded split to score (default: every record as given)")
    p.add_argument("--out", help="metrics CSV")

    p = sub.add_parser("sweep", parents=[common], help="one-parameter sweep against the reference models")
    p.add_argument("--model")
    p.add_argument("--vary")
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--log", action="store_true", help="geometric grid")
    p.add_argument("--fixed", type=_assignment, action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--no-reference", action="store_true")
    p.add_argument("--shift-residual", choices=SHIFT_RESIDUAL_MODES, default="mass-action")
    p.add_argument("--out", help="sweep CSV (default stdout)")
    return parser


REQUIRED = {
    "gen-data": ("out",),
    "train": ("data", "model"),
    "search": ("out",),
    "predict": ("model",),
    "eval": ("model", "data"),
    "sweep": ("model", "vary", "start", "stop"),
}


def _check_required(parser, args):
    missing = [d for d in REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + {"start": "from", "stop": "to"}.get(d, d) for d in missing)
        parser.error(f"{args.command}: missing required option(s) {flags}")
    return args


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return _check_required(parser, args)
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    subparser = parser.commands[args.command]
    known = {a.dest for a in subparser._actions} | {"grid"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        parser.error(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    if "hidden" in cfg and not isinstance(cfg["hidden"], str):
        cfg["hidden"] = ",".join(str(h) for h in cfg["hidden"])
    if isinstance(cfg.get("fixed"), dict):
        cfg["fixed"] = [(k, float(v)) for k, v in cfg["fixed"].items()]
    for action in subparser._actions:
        if action.dest in cfg and action.type is not None and isinstance(cfg[action.dest], str):
            cfg[action.dest] = action.type(cfg[action.dest])
    subparser.set_defaults(**cfg)
    return _check_required(parser, parser.parse_args(argv))


# -- helpers -----------------------------------------------------------------------


def _require_file(path, what):
    if not path or not Path(path).is_file():
        raise DataError(f"{what} not found: {path}")


def _require_writable(path):
    if path and not Path(path).parent.resolve().is_dir():
        raise DataError(f"output directory does not exist: {Path(path).parent}")


def _write(path, text):
    if path:
        Path(path).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _fixed_point(assignments) -> OperatingPoint:
    op = DEFAULT_POINT
    for name, value in assignments:
        if name not in INPUT_NAMES + ("P", "CC"):
            raise UsageError(f"unknown parameter {name!r}; choose from {', '.join(INPUT_NAMES + ('P', 'CC'))}")
        op = op.with_value(name, value)
    return op


def _corpus(args, records):
    return ds.prepare_corpus(records, ds.SplitSpec(seed=args.seed), args.split_before_augment)


def _counts(records) -> str:
    c = Counter((r.source, r.regime) for r in records)
    return ", ".join(f"{s}/{g}: {n}" for (s, g), n in sorted(c.items())) or "none"


# -- commands -----------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    _require_writable(args.out)
    if args.experimental and args.experimental != "bundled":
        _require_file(args.experimental, "experimental data")
    grid = ds.GridSpec.empty() if args.empty_grid else ds.GridSpec.from_dict(args.grid or {})
    stats: dict = {}
    records = ds.generate_theoretical(grid, shift_residual=args.shift_residual, stats=stats)
    if args.experimental:
        exp = ds.load_bundled_experimental() if args.experimental == "bundled" else ds.ingest_experimental(args.experimental)
        records += exp
        if not args.no_interpolate:
            records += ds.interpolate_experimental(exp)
    ds.write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    print(f"grid points: {grid.size()}  kinetic {stats['kinetic']}  equilibrium {stats['equilibrium']}  "
          f"transition (skipped) {stats['transition']}  solver failures {stats['failed']}")
    print(f"by source/regime: {_counts(records)}")
    return EXIT_OK


def cmd_train(args) -> int:
    _require_file(args.data, "dataset")
    _require_writable(args.model)
    _require_writable(args.out)
    records = ds.read_records(args.data)
    corpus = _corpus(args, records)
    config = neural.NetworkConfig(args.hidden, args.lr, args.epochs, args.seed, args.patience)
    net, report = neural.train_restarts(config, corpus.arrays("train"), corpus.arrays("val"), corpus.scaler,
                                        restarts=args.restarts, screen_epochs=args.screen_epochs)
    neural.save_model(net, args.model)
    if args.out:
        _write(args.out, report.history_csv())
    test = metrics.evaluate(net, corpus.test) if len(corpus.test) >= 3 else None
    print(f"trained {'-'.join(map(str, config.hidden_sizes))} for {report.epochs} epochs "
          f"({report.stop_reason}, {report.wall_time:.1f} s); train MSE {report.train_loss[-1]:.4e}"
          + (f", val MSE {report.val_loss[-1]:.4e}" if report.val_loss else ""))
    if test:
        print("test: " + test.summary())
    print(f"model written to {args.model}")
    return EXIT_OK


def cmd_search(args) -> int:
    _require_writable(args.out)
    _require_writable(args.model)
    space = hpo.SearchSpace()
    if args.benchmark:
        objective = hpo.benchmark_objective
    else:
        _require_file(args.data, "dataset")
        objective = hpo.TrainingObjective(_corpus(args, ds.read_records(args.data)), restarts=args.restarts)

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(hpo.TRIAL_LOG_COLUMNS) + "\n")

        def on_trial(t):
            fh.write(hpo.trial_log_row(t) + "\n")
            fh.flush()
            log.info("trial %d: %s", t.index, t.status)

        if args.strategy == "random":
            result = hpo.random_search(space, args.trials, args.seed, objective, on_trial)
        else:
            result = hpo.bayes_search(space, args.max_evals, args.seed, objective, on_trial=on_trial)
    print(hpo.leaderboard_text(result.trials))
    for note in result.notes:
        print(note)
    if args.model and not args.benchmark:
        neural.save_model(objective.models[result.best.config.seed], args.model)
        print(f"best model (trial {result.best.index}) written to {args.model}")
    return EXIT_OK


def _read_inputs(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in INPUT_NAMES if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing input columns {missing}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append([float(row[c]) for c in INPUT_NAMES])
            except (TypeError, ValueError):
                raise DataError(f"{path}: line {lineno}: non-numeric input") from None
    return np.array(rows).reshape(-1, len(INPUT_NAMES))


def cmd_predict(args) -> int:
    _require_file(args.model, "model file")
    net = neural.load_model(args.model)
    if args.data:
        _require_file(args.data, "input CSV")
        X = _read_inputs(args.data)
    else:
        X = _fixed_point(args.fixed).inputs()[None, :]
    Y = net.predict(X) if len(X) else np.empty((0, len(DRY_SPECIES)))
    lines = [",".join([*INPUT_NAMES, *(f"y_{s}" for s in DRY_SPECIES)])]
    lines += [",".join(repr(float(v)) for v in (*x, *y)) for x, y in zip(X, Y)]
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require_file(args.model, "model file")
    _require_file(args.data, "dataset")
    _require_writable(args.out)
    net = neural.load_model(args.model)
    records = ds.read_records(args.data)
    if not records:
        raise DataError(f"{args.data}: no records to evaluate")
    if args.part != "all":
        records = getattr(_corpus(args, records), args.part)
    report = metrics.evaluate(net, records)
    print(report.summary())
    if args.out:
        _write(args.out, report.to_csv())
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require_file(args.model, "model file")
    _require_writable(args.out)
    if args.vary not in INPUT_NAMES:
        raise UsageError(f"unknown parameter {args.vary!r}; choose from {', '.join(INPUT_NAMES)}")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    net = neural.load_model(args.model)
    fixed = _fixed_point(args.fixed)
    space = np.geomspace if args.log else np.linspace
    grid = space(args.start, args.stop, args.points)
    table = metrics.sweep(net, args.vary, grid, fixed, not args.no_reference, shift_residual=args.shift_residual)
    _write(args.out, table.to_csv())
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "search": cmd_search,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"msr-surrogate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"msr-surrogate: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"msr-surrogate: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SurrogateError, ValueError) as exc:
        print(f"msr-surrogate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"msr-surrogate: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
