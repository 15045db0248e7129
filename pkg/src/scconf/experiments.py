"""Experiment grid runner and result aggregation.

A run is a grid over estimators x conditionings x sample sizes x seeds on one
mixture spec. Every trial is a pure function of its coordinates: data, model
init, and shuffling are seeded through SeedSequence tuples derived from the
trial seed, so a rerun with the same config reproduces every artifact byte for
byte. Within a seed, all estimators see the same training draw, test draw, and
initial network, which pairs the accuracy comparisons.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .estimators import ESTIMATOR_NAMES, build_kind
from .io import dump_json, load_spec
from .net import DivergenceError
from .ratio import RatioConfig, fit_ratio
from .synthetic import (
    GaussianMixtureSpec,
    bayes_accuracy,
    build_confidence_dataset,
    sample_joint,
    true_density_ratio,
)
from .training import TrainConfig, train, train_weighted
from .validation import as_label_tuple
from .weights import Supervised, needs_ratio, one_hot_weights

__all__ = [
    "ExperimentConfig",
    "run_experiment",
    "run_trial",
    "aggregate",
    "load_trials",
    "format_table",
    "write_results_csv",
    "write_trials_csv",
    "trial_filename",
]

# SeedSequence purpose tags (last entropy component)
_P_TRAIN, _P_VAL, _P_TEST, _P_UNLABELED, _P_RATIO, _P_SUP, _P_SUPVAL, _P_INIT = range(8)


@dataclass
class ExperimentConfig:
    spec: str = "default"
    estimators: tuple[str, ...] = ("sc-conf",)
    conditionings: tuple[tuple[int, ...], ...] = ((1,),)
    noise: str = "clean"
    n_ladder: tuple[int, ...] = (1000,)
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "run"
    n_test: int = 10_000
    n_unlabeled: int | None = None
    val_fraction: float = 0.2
    floor: float = 1e-2
    analytic_ratio: bool = False
    # grid trials always draw exact posteriors (optionally one-hot corrupted);
    # recorded here so manifests state it, and honored by the train subcommand
    analytic_confidence: bool = True
    match_n: bool = True
    jobs: int = 1
    bayes_mc: int = 200_000
    epochs: int = 100
    batch_size: int = 100
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    hidden_dims: tuple[int, ...] = (64, 64)
    ratio_centers: int = 100
    ratio_ridge: float = 1e-3
    ratio_ridge_grid: tuple[float, ...] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        return cfg.normalized()

    def normalized(self) -> "ExperimentConfig":
        cfg = replace(
            self,
            estimators=tuple(self.estimators),
            conditionings=tuple(as_label_tuple(c) for c in self.conditionings),
            n_ladder=tuple(int(n) for n in self.n_ladder),
            seeds=tuple(int(s) for s in self.seeds),
            hidden_dims=tuple(int(h) for h in self.hidden_dims),
            ratio_ridge_grid=tuple(self.ratio_ridge_grid) if self.ratio_ridge_grid else None,
        )
        if cfg.noise not in ("clean", "onehot"):
            raise ValueError(f"noise must be 'clean' or 'onehot', got {cfg.noise!r}")
        for name in cfg.estimators:
            if name not in ESTIMATOR_NAMES:
                raise ValueError(f"unknown estimator {name!r}")
            for cond in cfg.conditionings:
                build_kind(name, cond)  # fails fast on incompatible pairs
        if not cfg.n_ladder or not cfg.seeds or not cfg.estimators or not cfg.conditionings:
            raise ValueError("estimators, conditionings, n_ladder, seeds must be non-empty")
        if not 0.0 < cfg.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conditionings"] = [list(c) for c in self.conditionings]
        for key in ("estimators", "n_ladder", "seeds", "hidden_dims"):
            d[key] = list(d[key])
        if d["ratio_ridge_grid"] is not None:
            d["ratio_ridge_grid"] = list(d["ratio_ridge_grid"])
        return d

    def train_config(self, seed: int, kind) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=seed,
            estimator=kind,
            floor=self.floor,
            hidden_dims=self.hidden_dims,
        )

    def ratio_config(self) -> RatioConfig:
        return RatioConfig(
            n_centers=self.ratio_centers,
            ridge=self.ratio_ridge,
            ridge_grid=self.ratio_ridge_grid,
        )


def _seq(*entropy) -> np.random.SeedSequence:
    return np.random.SeedSequence(tuple(int(e) for e in entropy))


def _cond_code(cond: tuple[int, ...]) -> int:
    return sum(1 << (c - 1) for c in cond)


def trial_filename(estimator: str, cond, noise: str, n: int, seed: int) -> str:
    cond_str = "-".join(str(c) for c in cond) if cond else "all"
    return f"trial_{estimator}_c{cond_str}_{noise}_n{n}_s{seed}.json"


def run_trial(
    spec: GaussianMixtureSpec,
    cfg: ExperimentConfig,
    estimator: str,
    cond: tuple[int, ...],
    n: int,
    seed: int,
) -> dict:
    """Train one (estimator, conditioning, n, seed) cell and score it on a
    joint test sample. Divergent trials are recorded, not raised."""
    kind = build_kind(estimator, cond)
    code = _cond_code(cond)
    x_test, y_test = sample_joint(spec, cfg.n_test, _seq(seed, _P_TEST))
    n_val = max(1, int(round(cfg.val_fraction * n)))
    result = {
        "estimator": estimator,
        "conditioning": list(cond),
        "noise": cfg.noise,
        "n": n,
        "seed": seed,
        "diverged": False,
    }
    try:
        if isinstance(kind, Supervised):
            k = spec.n_classes
            n_sup = n if cfg.match_n else int(round(n * k / max(1, len(cond))))
            x, y = sample_joint(spec, n_sup, _seq(seed, n_sup, _P_SUP))
            xv, yv = sample_joint(
                spec, max(1, int(round(cfg.val_fraction * n_sup))), _seq(seed, n_sup, _P_SUPVAL)
            )
            config = cfg.train_config(seed, kind)
            config.batch_size = min(config.batch_size, n_sup)
            model, report = train_weighted(
                _seq(seed, _P_INIT),
                x,
                one_hot_weights(y - 1, k),
                xv,
                one_hot_weights(yv - 1, k),
                config,
                test=(x_test, y_test),
            )
            result["n_supervised"] = n_sup
        else:
            train_ds = build_confidence_dataset(
                spec, cond, n, cfg.noise, _seq(seed, n, code, _P_TRAIN)
            )
            val_ds = build_confidence_dataset(
                spec, cond, n_val, cfg.noise, _seq(seed, n, code, _P_VAL)
            )
            ratio = None
            if needs_ratio(kind):
                if cfg.analytic_ratio:
                    ratio = lambda x: true_density_ratio(spec, x, cond)
                else:
                    n_u = cfg.n_unlabeled if cfg.n_unlabeled else n
                    x_u, _ = sample_joint(spec, n_u, _seq(seed, n, _P_UNLABELED))
                    ratio = fit_ratio(
                        train_ds.instances, x_u, cfg.ratio_config(), seed=_seq(seed, n, _P_RATIO)
                    )
            config = cfg.train_config(seed, kind)
            config.batch_size = min(config.batch_size, n)
            model, report = train(
                _seq(seed, _P_INIT), train_ds, val_ds, config, ratio=ratio, test=(x_test, y_test)
            )
    except DivergenceError as exc:
        result["diverged"] = True
        result["error"] = str(exc)
        result["epoch"] = exc.epoch
        return result
    result["accuracy"] = report.test_accuracy
    result["report"] = report.to_dict()
    return result


def _run_task(args):
    spec_dict, cfg, estimator, cond, n, seed = args
    spec = GaussianMixtureSpec.from_dict(spec_dict)
    return run_trial(spec, cfg, estimator, cond, n, seed)


def run_experiment(cfg: ExperimentConfig, log=None):
    """Run the full grid, write manifest/trials/results under cfg.out_dir,
    and return (rows, n_diverged, n_trials)."""
    cfg = cfg.normalized()
    spec = load_spec(cfg.spec)
    for cond in cfg.conditionings:
        as_label_tuple(cond, spec.n_classes)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    bayes = bayes_accuracy(spec, cfg.bayes_mc, seed=0)
    dump_json(
        {
            "config": cfg.to_dict(),
            "spec": spec.to_dict(),
            "bayes_accuracy": bayes.value,
            "bayes_stderr": bayes.stderr,
        },
        out / "manifest.json",
    )

    tasks = [
        (spec.to_dict(), cfg, estimator, cond, n, seed)
        for estimator in cfg.estimators
        for cond in cfg.conditionings
        for n in cfg.n_ladder
        for seed in cfg.seeds
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    n_diverged = 0
    for res in results:
        dump_json(
            res,
            out / trial_filename(res["estimator"], res["conditioning"], res["noise"], res["n"], res["seed"]),
        )
        if res["diverged"]:
            n_diverged += 1
            if log:
                log(f"warning: diverged: {trial_filename(res['estimator'], res['conditioning'], res['noise'], res['n'], res['seed'])}")

    rows = aggregate(results)
    write_results_csv(rows, out / "results.csv")
    return rows, n_diverged, len(results)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _paired_equivalent(best_accs: dict, accs: dict) -> bool:
    """Two-sided paired t-test over shared seeds at the 5% level; True when
    the estimator is statistically indistinguishable from the best."""
    common = sorted(set(best_accs) & set(accs))
    if not common:
        return False
    diffs = np.array([best_accs[s] - accs[s] for s in common])
    if np.all(diffs == 0.0):
        return True
    if len(common) < 2 or np.std(diffs) == 0.0:
        return False
    return bool(stats.ttest_rel([best_accs[s] for s in common], [accs[s] for s in common]).pvalue >= 0.05)


def aggregate(trials) -> list[dict]:
    """Mean/std accuracy per (estimator, conditioning, noise, n) over seeds,
    with an equivalent-best marker per (conditioning, noise, n) group.

    Diverged trials are dropped from their row (the seed count records it).
    The supervised reference is excluded from the best-marker comparison.
    """
    cells: dict[tuple, dict] = {}
    for t in trials:
        key = (t["estimator"], tuple(t["conditioning"]), t["noise"], t["n"])
        cell = cells.setdefault(key, {})
        if not t.get("diverged") and t.get("accuracy") is not None:
            cell[t["seed"]] = t["accuracy"]

    rows = []
    for (estimator, cond, noise, n), accs in cells.items():
        vals = np.array(sorted(accs.values())) if accs else np.array([])
        rows.append(
            {
                "estimator": estimator,
                "conditioning": cond,
                "noise": noise,
                "n": n,
                "seeds": len(accs),
                "mean_accuracy": float(vals.mean()) if vals.size else None,
                "std_accuracy": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                "best": False,
                "_accs": accs,
            }
        )

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["conditioning"], row["noise"], row["n"]), []).append(row)
    for group in groups.values():
        candidates = [r for r in group if r["estimator"] != "supervised" and r["seeds"] > 0]
        if not candidates:
            continue
        best = max(candidates, key=lambda r: r["mean_accuracy"])
        for row in candidates:
            row["best"] = row is best or _paired_equivalent(best["_accs"], row["_accs"])

    rows.sort(key=lambda r: (r["conditioning"], r["noise"], r["n"], r["estimator"]))
    for row in rows:
        row.pop("_accs")
    return rows


def load_trials(run_dir, log=None):
    """Read trial JSONs from a run directory; corrupted files are skipped
    with a warning. Returns (trials, n_skipped)."""
    run_dir = Path(run_dir)
    trials, skipped = [], 0
    for path in sorted(run_dir.glob("trial_*.json")):
        try:
            with open(path) as fh:
                t = json.load(fh)
            for key in ("estimator", "conditioning", "noise", "n", "seed"):
                if key not in t:
                    raise ValueError(f"missing key {key!r}")
            trials.append(t)
        except (ValueError, OSError) as exc:
            skipped += 1
            if log:
                log(f"warning: skipping {path.name}: {exc}")
    return trials, skipped


def _fmt_cond(cond) -> str:
    return "+".join(str(c) for c in cond)


def format_table(rows) -> str:
    """Aligned text table; * marks rows statistically equivalent to the best
    non-supervised row of their (conditioning, noise, n) group."""
    header = ["estimator", "cond", "noise", "n", "seeds", "accuracy"]
    body = []
    for r in rows:
        acc = "-" if r["mean_accuracy"] is None else f"{r['mean_accuracy']:.4f} ({r['std_accuracy']:.4f})"
        if r["best"]:
            acc = "*" + acc
        body.append(
            [r["estimator"], _fmt_cond(r["conditioning"]), r["noise"], str(r["n"]), str(r["seeds"]), acc]
        )
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def write_results_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("estimator,conditioning,noise,n,seeds,mean_accuracy,std_accuracy,best\n")
        for r in rows:
            mean = "" if r["mean_accuracy"] is None else repr(r["mean_accuracy"])
            fh.write(
                f"{r['estimator']},{_fmt_cond(r['conditioning'])},{r['noise']},{r['n']},"
                f"{r['seeds']},{mean},{repr(r['std_accuracy'])},{'*' if r['best'] else ''}\n"
            )


def write_trials_csv(trials, path, bayes: float | None = None) -> None:
    """Long-format per-trial accuracies for plotting, with the excess over the
    Bayes accuracy when known."""
    trials = sorted(
        trials, key=lambda t: (tuple(t["conditioning"]), t["noise"], t["n"], t["estimator"], t["seed"])
    )
    with open(path, "w") as fh:
        fh.write("estimator,conditioning,noise,n,seed,accuracy,excess_vs_bayes\n")
        for t in trials:
            acc = t.get("accuracy")
            acc_str = "" if acc is None else repr(acc)
            exc = "" if (acc is None or bayes is None) else repr(bayes - acc)
            fh.write(
                f"{t['estimator']},{_fmt_cond(t['conditioning'])},{t['noise']},{t['n']},"
                f"{t['seed']},{acc_str},{exc}\n"
            )
