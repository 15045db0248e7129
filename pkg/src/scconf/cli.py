"""Command-line interface.

Subcommands: generate, fit-ratio, train, evaluate, experiment, report.
Exit codes: 0 success; 1 usage or configuration error; 2 IO error;
3 every trial of an experiment diverged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .estimators import ESTIMATOR_NAMES, build_kind
from .experiments import (
    ExperimentConfig,
    aggregate,
    format_table,
    load_trials,
    run_experiment,
    write_results_csv,
    write_trials_csv,
)
from .net import DivergenceError
from .ratio import RatioConfig, empirical_bregman, fit_ratio
from .synthetic import (
    ConfidenceDataset,
    build_confidence_dataset,
    one_hot_corrupt,
    sample_joint,
    true_density_ratio,
    true_posterior,
)
from .training import TrainConfig, evaluate_accuracy, precompute_weights, train_weighted
from .validation import as_label_tuple
from .weights import Supervised, needs_ratio, one_hot_weights


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_labels(text: str) -> tuple[int, ...]:
    try:
        return as_label_tuple([int(tok) for tok in str(text).split(",") if tok != ""])
    except ValueError as exc:
        raise ValueError(f"bad conditioning {text!r}: {exc}") from exc


def _parse_seeds(text: str) -> tuple[int, ...]:
    """"0,1,4" or an inclusive range "0..9"."""
    text = str(text)
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(tok) for tok in text.split(",") if tok != "")


def _read_instances(path):
    """Feature rows from any of the three CSV layouts."""
    header, _ = io._read_csv(path)
    if header[-1] == "y":
        return io.read_labeled_csv(path)[0]
    if header[-1].startswith("r"):
        return io.read_confidence_csv(path)[0]
    return io.read_unlabeled_csv(path)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = io.load_spec(args.spec)
    cond = _parse_labels(args.conditioning)
    as_label_tuple(cond, spec.n_classes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_unlabeled = args.n_unlabeled or args.n
    n_test = args.n_test or args.n

    ds = build_confidence_dataset(
        spec, cond, args.n, args.noise, np.random.SeedSequence((args.seed, 0))
    )
    x_u, _ = sample_joint(spec, n_unlabeled, np.random.SeedSequence((args.seed, 1)))
    x_t, y_t = sample_joint(spec, n_test, np.random.SeedSequence((args.seed, 2)))

    io.write_confidence_csv(out / "confidence.csv", ds.instances, ds.confidences)
    io.write_unlabeled_csv(out / "unlabeled.csv", x_u)
    io.write_labeled_csv(out / "test.csv", x_t, y_t)
    print(f"wrote {out}/confidence.csv ({args.n} rows), unlabeled.csv ({n_unlabeled}), test.csv ({n_test})")
    return 0


def cmd_fit_ratio(args) -> int:
    x_class = _read_instances(args.class_data)
    x_unlabeled = _read_instances(args.unlabeled)
    config = RatioConfig(
        n_centers=args.centers,
        ridge=args.ridge,
        ridge_grid=tuple(float(t) for t in args.ridge_grid.split(",")) if args.ridge_grid else None,
    )
    model = fit_ratio(x_class, x_unlabeled, config, seed=args.seed)
    io.save_ratio(model, args.out)
    score = empirical_bregman(model, x_class, x_unlabeled)
    print(f"wrote {args.out} (centers={model.centers.shape[0]}, sigma={model.sigma:.6g}, objective={score:.6g})")
    return 0


def _train_config_from_args(args, kind) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        seed=args.seed,
        estimator=kind,
        floor=args.floor,
        hidden_dims=tuple(int(h) for h in args.hidden_dims.split(",")),
    )


def cmd_train(args) -> int:
    spec = io.load_spec(args.spec) if args.spec else None
    cond = _parse_labels(args.conditioning) if args.conditioning else None
    kind = build_kind(args.estimator, cond)

    if isinstance(kind, Supervised):
        n_classes = spec.n_classes if spec else None
        x, y = io.read_labeled_csv(args.data, n_classes=n_classes)
        k = n_classes or int(y.max())
        w = one_hot_weights(y - 1, k)
    else:
        x, r = io.read_confidence_csv(args.data)
        if args.analytic_confidence:
            if spec is None:
                raise ValueError("--analytic-confidence requires --spec")
            r = true_posterior(spec, x)
            if args.noise == "onehot":
                r = one_hot_corrupt(r)
        ratio = None
        if needs_ratio(kind):
            if args.analytic_ratio:
                if spec is None:
                    raise ValueError("--analytic-ratio requires --spec")
                ratio = lambda q: true_density_ratio(spec, q, cond)
            elif args.ratio:
                ratio = io.load_ratio(args.ratio)
            else:
                raise ValueError(f"estimator {args.estimator!r} needs --ratio or --analytic-ratio")
        ds = ConfidenceDataset(x, r, cond or (1,), args.noise)
        w = precompute_weights(ds, kind, ratio, args.floor)

    n = x.shape[0]
    n_val = max(1, int(round(args.val_fraction * n)))
    if n_val >= n:
        raise ValueError("not enough rows for a train/validation split")
    perm = np.random.default_rng(np.random.SeedSequence((args.seed, 3))).permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]

    config = _train_config_from_args(args, kind)
    config.batch_size = min(config.batch_size, tr_idx.shape[0])
    model, report = train_weighted(
        np.random.SeedSequence((args.seed, 4)),
        x[tr_idx],
        w[tr_idx],
        x[val_idx],
        w[val_idx],
        config,
    )
    io.save_model(model, args.out)
    if args.out_report:
        io.dump_json(report.to_dict(), args.out_report)
    print(
        f"wrote {args.out} (selected epoch {report.selected_epoch}, "
        f"val risk {min(report.val_risks):.6g})"
    )
    return 0


def cmd_evaluate(args) -> int:
    model = io.load_model(args.model)
    x, y = io.read_labeled_csv(args.test, n_classes=model.layer_dims[-1])
    acc = evaluate_accuracy(model, x, y)
    print(f"accuracy {acc!r} ({x.shape[0]} rows)")
    return 0


def _set_override(cfg_dict: dict, item: str) -> None:
    if "=" not in item:
        raise ValueError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    cfg_dict[key] = value


def cmd_experiment(args) -> int:
    cfg_dict = {}
    if args.config:
        loaded = io.load_json(args.config)
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        cfg_dict.update(loaded)
    if args.spec:
        cfg_dict["spec"] = args.spec
    if args.noise:
        cfg_dict["noise"] = args.noise
    if args.estimator:
        cfg_dict["estimators"] = tuple(args.estimator)
    if args.conditioning:
        cfg_dict["conditionings"] = tuple(_parse_labels(c) for c in args.conditioning)
    if args.n:
        cfg_dict["n_ladder"] = tuple(args.n)
    if args.seeds:
        cfg_dict["seeds"] = _parse_seeds(args.seeds)
    if args.out:
        cfg_dict["out_dir"] = args.out
    if args.jobs is not None:
        cfg_dict["jobs"] = args.jobs
    if args.floor is not None:
        cfg_dict["floor"] = args.floor
    if args.analytic_ratio:
        cfg_dict["analytic_ratio"] = True
    if args.analytic_confidence:
        cfg_dict["analytic_confidence"] = True
    if args.match_n is not None:
        cfg_dict["match_n"] = args.match_n
    for item in args.set or []:
        _set_override(cfg_dict, item)

    cfg = ExperimentConfig.from_dict(cfg_dict)
    rows, n_diverged, n_trials = run_experiment(cfg, log=lambda m: print(m, file=sys.stderr))
    print(format_table(rows))
    print(f"\n{n_trials - n_diverged}/{n_trials} trials converged; results in {cfg.out_dir}/")
    if n_trials > 0 and n_diverged == n_trials:
        return 3
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise OSError(f"{run_dir} is not a directory")
    trials, skipped = load_trials(run_dir, log=lambda m: print(m, file=sys.stderr))
    if not trials:
        raise OSError(f"{run_dir} contains no readable trial files")
    bayes = None
    manifest = run_dir / "manifest.json"
    if manifest.exists():
        try:
            bayes = io.load_json(manifest).get("bayes_accuracy")
        except (OSError, ValueError):
            print(f"warning: unreadable manifest {manifest}", file=sys.stderr)
    rows = aggregate(trials)
    write_results_csv(rows, run_dir / "results.csv")
    write_trials_csv(trials, run_dir / "trials_long.csv", bayes=bayes)
    print(format_table(rows))
    print(f"\nwrote {run_dir}/results.csv and {run_dir}/trials_long.csv")
    return 2 if skipped else 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="scconf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample confidence/unlabeled/test CSVs from a mixture spec")
    p.add_argument("--spec", required=True, help="spec JSON path, or 'default' for the built-in benchmark")
    p.add_argument("--conditioning", required=True, help="1-based class label(s), e.g. '1' or '1,2'")
    p.add_argument("--n", type=int, required=True, help="confidence rows to draw")
    p.add_argument("--noise", choices=("clean", "onehot"), default="clean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-unlabeled", type=int, default=None, help="unlabeled rows (default: --n)")
    p.add_argument("--n-test", type=int, default=None, help="labeled test rows (default: --n)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit-ratio", help="fit the density-ratio model from two samples")
    p.add_argument("--class-data", required=True, help="CSV with the class-conditional sample")
    p.add_argument("--unlabeled", required=True, help="CSV with the marginal sample")
    p.add_argument("--out", required=True, help="ratio model JSON path")
    p.add_argument("--centers", type=int, default=100)
    p.add_argument("--ridge", type=float, default=1e-3)
    p.add_argument("--ridge-grid", default=None, help="comma list; selects the ridge by CV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit_ratio)

    p = sub.add_parser("train", help="train a classifier from a dataset CSV")
    p.add_argument("--data", required=True, help="confidence CSV (labeled CSV for --estimator supervised)")
    p.add_argument("--estimator", choices=ESTIMATOR_NAMES, default="sc-conf")
    p.add_argument("--conditioning", default=None, help="1-based class label(s) the data was drawn from")
    p.add_argument("--noise", choices=("clean", "onehot"), default="clean")
    p.add_argument("--floor", type=float, default=1e-2)
    p.add_argument("--ratio", default=None, help="fitted ratio model JSON (norsc estimators)")
    p.add_argument("--analytic-ratio", action="store_true", help="use the spec's exact ratio (needs --spec)")
    p.add_argument("--analytic-confidence", action="store_true", help="replace confidences with the spec's exact posteriors (needs --spec)")
    p.add_argument("--spec", default=None)
    p.add_argument("--val-fraction", type=float, default=0.2, dest="val_fraction")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--hidden-dims", default="64,64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--out-report", default=None, help="training report JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy of a saved model on a labeled CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run an estimator grid from a JSON config")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (JSON value)")
    p.add_argument("--spec", default=None)
    p.add_argument("--noise", choices=("clean", "onehot"), default=None)
    p.add_argument("--estimator", action="append", help="repeatable")
    p.add_argument("--conditioning", action="append", help="repeatable; e.g. '1' or '1,2'")
    p.add_argument("--n", action="append", type=int, help="repeatable sample-size ladder entry")
    p.add_argument("--seeds", default=None, help="'0,1,2' or '0..9'")
    p.add_argument("--out", default=None, help="run directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel trial workers")
    p.add_argument("--floor", type=float, default=None)
    p.add_argument("--analytic-ratio", action="store_true")
    p.add_argument("--analytic-confidence", action="store_true")
    p.add_argument("--match-n", action=argparse.BooleanOptionalAction, default=None,
                   help="supervised baseline uses exactly n labeled pairs")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="aggregate a run directory into tables")
    p.add_argument("--run", required=True, help="experiment output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(f"IO error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
