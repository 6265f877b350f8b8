"""Command-line experiments: runs, sweeps, ablations and rank-accuracy traces.

Every subcommand expands its configuration into a list of independent training
runs, executes them (optionally in worker processes) and merges the results in
task order, so the emitted bytes depend only on the configuration and seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dataset import (
    DatasetError,
    SyntheticSpec,
    generate_synthetic,
    load_manifest,
    make_split,
    materialize,
    write_manifest,
)
from .metrics import median_rows, write_medians_csv, write_results_csv
from .ssl import METHODS, TrainConfig, evaluate_model, train

ABLATIONS = (
    ("full", {}),
    ("no-ema", {"use_ema": False}),
    ("no-augmentation", {"use_augmentation": False}),
    ("no-threshold", {"use_threshold": False}),
    ("no-threshold-no-rank", {"use_threshold": False, "use_rank": False}),
)
ABLATION_FLAGS = ("use_ema", "use_augmentation", "use_threshold", "use_rank")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    dataset: str | None = None
    methods: tuple = ("supervised", "LPR")
    labels: tuple = (30, 60, 120)
    seeds: tuple = tuple(range(10))
    train: TrainConfig = field(default_factory=TrainConfig)
    taus: tuple = (0.0, 0.1, 0.2, 0.3)
    fps: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    out: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("method list is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {', '.join(METHODS)}")
        if not self.labels:
            raise ConfigError("label list is empty")
        if any(int(n) < 0 for n in self.labels):
            raise ConfigError("label counts must be nonnegative")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if any(t < 0 for t in self.taus):
            raise ConfigError("tau values must be nonnegative")
        if any(f <= 0 for f in self.fps):
            raise ConfigError("fps values must be positive")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.manifest is not None and not Path(self.manifest).is_file():
            raise ConfigError(f"manifest not found: {self.manifest}")

    @property
    def dataset_name(self) -> str:
        if self.dataset:
            return self.dataset
        if self.manifest:
            return Path(self.manifest).resolve().parent.name or "manifest"
        return "synthetic"

    @property
    def source(self) -> tuple:
        if self.manifest:
            return ("manifest", str(self.manifest))
        return ("synthetic", asdict(self.synthetic))

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "synthetic": asdict(self.synthetic),
            "dataset": self.dataset_name,
            "methods": list(self.methods),
            "labels": list(self.labels),
            "seeds": list(self.seeds),
            "train": self.train.to_dict(),
            "taus": list(self.taus),
            "fps": list(self.fps),
        }


def _known(cls, d: dict, what: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {unknown}")
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(_known(ExperimentConfig, d, "config"))
    if "synthetic" in d:
        d["synthetic"] = SyntheticSpec(**_known(SyntheticSpec, d["synthetic"], "synthetic"))
    if "train" in d:
        try:
            d["train"] = TrainConfig.from_dict(d["train"])
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
    if isinstance(d.get("seeds"), int):
        d["seeds"] = range(d["seeds"])
    for k in ("methods", "labels", "seeds", "taus", "fps"):
        if k in d:
            d[k] = tuple(d[k])
    return ExperimentConfig(**d)


# -- dataset loading ------------------------------------------------------------

_RECORDS: dict = {}


def load_records(source: tuple):
    key = json.dumps(source, sort_keys=True)
    if key not in _RECORDS:
        kind, value = source
        if kind == "manifest":
            _RECORDS[key] = load_manifest(value)
        else:
            _RECORDS[key] = generate_synthetic(**value)
    return _RECORDS[key]


# -- run execution --------------------------------------------------------------


@dataclass(frozen=True)
class RunTask:
    tag: str  # value of the method column
    labels: int
    seed: int
    config: TrainConfig


@dataclass
class RunResult:
    task: RunTask
    row: dict
    report: dict


def execute(task: RunTask, source: tuple, dataset: str) -> RunResult:
    records = load_records(source)
    data = materialize(records, make_split(records, task.labels, task.seed))
    cfg = task.config.with_(seed=task.seed)
    rep = train(data, cfg)
    res = evaluate_model(rep.student, data, cfg)
    row = {"dataset": dataset, "method": task.tag, "labels": task.labels,
           "split_seed": task.seed, "srocc": res.srocc, "plcc": res.plcc}
    report = {**row, **rep.to_dict()}
    return RunResult(task, row, report)


def _execute_star(args):
    return execute(*args)


def run_tasks(tasks, exp: ExperimentConfig):
    """Run tasks in order; returns (results, error) so partial output can be saved."""
    args = [(t, exp.source, exp.dataset_name) for t in tasks]
    results = []
    try:
        if exp.jobs == 1 or len(tasks) <= 1:
            for a in args:
                results.append(_execute_star(a))
        else:
            with ProcessPoolExecutor(max_workers=exp.jobs) as pool:
                for r in pool.map(_execute_star, args):
                    results.append(r)
    except (DatasetError, ValueError, OSError) as e:
        return results, e
    return results, None


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "-", text).strip("-")


def write_outputs(results, out: Path, exp: ExperimentConfig) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    reports = out / "reports"
    reports.mkdir(exist_ok=True)
    rows = [r.row for r in results]
    write_results_csv(rows, out / "results.csv")
    write_medians_csv(rows, out / "medians.csv")
    for r in results:
        name = f"{_slug(r.task.tag)}_L{r.task.labels}_s{r.task.seed}.json"
        (reports / name).write_text(json.dumps(r.report, indent=1) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(exp.to_dict(), indent=1) + "\n", encoding="utf-8")
    return rows


def _grid(exp: ExperimentConfig, variants):
    """variants: (tag, TrainConfig) pairs; label count is the outer loop."""
    return [RunTask(tag, int(n), int(s), cfg)
            for n in exp.labels for tag, cfg in variants for s in exp.seeds]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])


def _medians_by_tag(rows):
    return {(m["method"], m["labels"]): m for m in median_rows(rows)}


# -- subcommands ------------------------------------------------------------------


def cmd_run(exp: ExperimentConfig):
    variants = [(m, exp.train.with_(method=m)) for m in exp.methods]
    return _grid(exp, variants), None


def _sweep(exp, key, values, name, column):
    values = sorted(set(float(v) for v in values))
    variants = [(f"LPR {key}={v!r}", exp.train.with_(method="LPR", **{key: v})) for v in values]

    def summarize(rows, out):
        med = _medians_by_tag(rows)
        table = []
        for v in values:
            for n in exp.labels:
                m = med.get((f"LPR {key}={v!r}", int(n)))
                if m is not None:
                    table.append((v, int(n), m["n_splits"], m["median_srocc"], m["median_plcc"]))
        _write_csv(out / name, (column, "labels", "n_splits", "median_srocc", "median_plcc"), table)

    return _grid(exp, variants), summarize


def cmd_sweep_tau(exp):
    return _sweep(exp, "tau", exp.taus, "sweep_tau.csv", "tau")


def cmd_sweep_fps(exp):
    return _sweep(exp, "strong_fps", exp.fps, "sweep_fps.csv", "strong_fps")


def cmd_ablate(exp):
    base = exp.train.with_(method="LPR", **{k: True for k in ABLATION_FLAGS})
    variants = [(f"LPR {name}", base.with_(**flags)) for name, flags in ABLATIONS]

    def summarize(rows, out):
        med = _medians_by_tag(rows)
        table = []
        for n in exp.labels:
            for (name, _), (tag, cfg) in zip(ABLATIONS, variants):
                m = med.get((tag, int(n)))
                if m is not None:
                    table.append((name, *(getattr(cfg, k) for k in ABLATION_FLAGS), int(n),
                                  m["n_splits"], m["median_srocc"], m["median_plcc"]))
        _write_csv(out / "ablation.csv",
                   ("variant", *ABLATION_FLAGS, "labels", "n_splits", "median_srocc", "median_plcc"),
                   table)

    return _grid(exp, variants), summarize


def cmd_trace_rank_acc(exp):
    missing = [r.id for r in load_records(exp.source) if r.mos is None]
    if missing:
        raise ConfigError(f"rank-accuracy trace needs true mos for every video; missing for {missing[:3]}")
    variants = [("LPR", exp.train.with_(method="LPR"))]

    def summarize(results, out):
        # a refresh without qualifying pairs has no accuracy and is left blank
        table, per_iter = [], {}
        for r in results:
            rep = r.report
            for it, acc in zip(rep["refresh_iters"], rep["rank_accuracy"]):
                table.append((r.task.labels, r.task.seed, it, acc))
                vals = per_iter.setdefault((r.task.labels, it), [])
                if acc is not None:
                    vals.append(acc)
        _write_csv(out / "rank_accuracy.csv", ("labels", "split_seed", "iteration", "accuracy"), table)
        _write_csv(out / "rank_accuracy_median.csv", ("labels", "iteration", "n_splits", "median_accuracy"),
                   [(n, it, len(v), float(np.median(v)) if v else None)
                    for (n, it), v in per_iter.items()])

    return _grid(exp, variants), summarize


COMMANDS = {
    "run": cmd_run,
    "sweep-tau": cmd_sweep_tau,
    "sweep-fps": cmd_sweep_fps,
    "ablate": cmd_ablate,
    "trace-rank-acc": cmd_trace_rank_acc,
}
# sweeps, ablations and traces are defined on the smallest label budget unless told otherwise
SINGLE_BUDGET = {"sweep-tau", "sweep-fps", "ablate", "trace-rank-acc"}


def execute_command(name: str, exp: ExperimentConfig) -> int:
    try:
        tasks, summarize = COMMANDS[name](exp)
    except (ConfigError, DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out = Path(exp.out)
    results, error = run_tasks(tasks, exp)
    write_outputs(results, out, exp)
    if error is not None:
        print(f"error: {error}", file=sys.stderr)
        return 1
    if summarize is not None:
        summarize(results if name == "trace-rank-acc" else [r.row for r in results], out)
    return 0


# -- argument parsing ---------------------------------------------------------------


def _csv_list(text: str, cast):
    try:
        return tuple(cast(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _seeds(text: str):
    # a single number is a count (0 .. n-1); a comma list names the seeds
    if "," in text:
        return _csv_list(text, int)
    try:
        n = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad seed spec {text!r}") from e
    return tuple(range(n))


def _assignment(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="manifest CSV of real feature files; synthetic data when omitted")
    common.add_argument("--config", help="JSON experiment config; flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seeds", type=_seeds, help="split seed count, or comma list of seeds")
    common.add_argument("--labels", type=lambda s: _csv_list(s, int), help="labelled counts, e.g. 30,60,120")
    common.add_argument("--methods", type=lambda s: _csv_list(s, str), help=f"comma list from {', '.join(METHODS)}")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                        metavar="KEY=VALUE", help="training config override (repeatable)")

    p = argparse.ArgumentParser(prog="lprvqa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="train and evaluate every method")
    s = sub.add_parser("sweep-tau", parents=[common], help="LPR over threshold values")
    s.add_argument("--taus", type=lambda t: _csv_list(t, float))
    s = sub.add_parser("sweep-fps", parents=[common], help="LPR over strong-view frame rates")
    s.add_argument("--fps", type=lambda t: _csv_list(t, float))
    sub.add_parser("ablate", parents=[common], help="LPR with components switched off")
    sub.add_parser("trace-rank-acc", parents=[common], help="pseudo-rank accuracy at every refresh")
    s = sub.add_parser("synth-gen", parents=[common], help="write a synthetic dataset as a manifest")
    s.add_argument("--seed", type=int, help="generator seed")
    return p


def resolve_config(args) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    if args.command in SINGLE_BUDGET and "labels" not in base:
        base["labels"] = [30]
    exp = config_from_dict(base)
    changes = {}
    for key in ("manifest", "out", "seeds", "labels", "methods", "jobs"):
        v = getattr(args, key, None)
        if v is not None:
            changes[key] = v
    for key in ("taus", "fps"):
        v = getattr(args, key, None)
        if v is not None:
            changes[key] = v
    if args.overrides:
        try:
            changes["train"] = exp.train.with_(**dict(args.overrides))
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
    if getattr(args, "seed", None) is not None:
        changes["synthetic"] = replace(exp.synthetic, seed=args.seed)
    return replace(exp, **changes) if changes else exp


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = resolve_config(args)
    except (ConfigError, TypeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.command == "synth-gen":
        records = generate_synthetic(**asdict(exp.synthetic))
        path = write_manifest(records, exp.out)
        print(path)
        return 0
    return execute_command(args.command, exp)


if __name__ == "__main__":
    sys.exit(main())
