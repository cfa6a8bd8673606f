"""Experiment harness: config loading, seeded runs, artifact writing.

A run directory holds curves.csv (one row per checkpoint), splits.csv (one
row per split), activations.csv (one row per fringe activation), run.json
(per-tree counters the offline audit needs) and forest.json.gz. CSV bytes
are a pure function of config + master seed.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from orf.core import (RESERVED_CHILD_INDICES, HyperParams,
                      InvariantViolation, RngStream, alpha)
from orf.data import (Dataset, MixtureOfGaussians, ParseError, align_pair,
                      parse_libsvm, stream_schedule)
from orf.evaluation import (ACTIVATIONS_COLUMNS, CURVES_COLUMNS,
                            SPLITS_COLUMNS, Checkpoint, clip_box_from_points,
                            evaluate, probe_stats)
from orf.forest import OnlineForest


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class MogSource:
    spec: str
    test_points: int


@dataclass(frozen=True)
class LibsvmSource:
    train: str
    test: str


@dataclass(frozen=True)
class ExperimentConfig:
    hyperparams: HyperParams
    data: MogSource | LibsvmSource
    checkpoints: tuple[int, ...]
    runs: int
    out_dir: str
    passes: int = 1
    probe_points: int = 256
    clip_sample: int = 1000
    clip_margin: float = 0.1

    def __post_init__(self):
        if not self.checkpoints:
            raise ConfigError("checkpoints must be nonempty")
        if any(c <= 0 for c in self.checkpoints):
            raise ConfigError("checkpoints must be positive")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        if isinstance(self.data, MogSource):
            if self.passes != 1:
                raise ConfigError("passes only applies to libsvm data")
            if self.data.test_points < 1:
                raise ConfigError("test_points must be >= 1")
        if self.probe_points < 1 or self.clip_sample < 1:
            raise ConfigError("probe_points and clip_sample must be >= 1")
        if self.clip_margin < 0:
            raise ConfigError("clip_margin must be >= 0")

    _KEYS = {"hyperparams", "data", "checkpoints", "runs", "out_dir",
             "passes", "probe_points", "clip_sample", "clip_margin"}

    @classmethod
    def from_json(cls, doc: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - cls._KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"hyperparams", "data", "checkpoints", "runs",
                   "out_dir"} - set(doc)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        base = pathlib.Path(base_dir)

        def resolve(p):
            q = pathlib.Path(p)
            return str(q if q.is_absolute() else base / q)

        try:
            params = HyperParams.from_json(doc["hyperparams"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"hyperparams: {exc}") from None
        d = doc["data"]
        kind = d.get("kind") if isinstance(d, dict) else None
        if kind == "mog":
            extra = set(d) - {"kind", "spec", "test_points"}
            if extra:
                raise ConfigError(f"unknown data keys: {sorted(extra)}")
            source = MogSource(resolve(d["spec"]), d.get("test_points", 5000))
        elif kind == "libsvm":
            extra = set(d) - {"kind", "train", "test"}
            if extra:
                raise ConfigError(f"unknown data keys: {sorted(extra)}")
            source = LibsvmSource(resolve(d["train"]), resolve(d["test"]))
        else:
            raise ConfigError("data.kind must be 'mog' or 'libsvm'")
        try:
            return cls(hyperparams=params, data=source,
                       checkpoints=tuple(doc["checkpoints"]),
                       runs=doc["runs"], out_dir=resolve(doc["out_dir"]),
                       passes=doc.get("passes", 1),
                       probe_points=doc.get("probe_points", 256),
                       clip_sample=doc.get("clip_sample", 1000),
                       clip_margin=doc.get("clip_margin", 0.1))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = pathlib.Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_json(doc, base_dir=path.parent)


@dataclass
class DataContext:
    n_features: int
    n_classes: int
    mog: MixtureOfGaussians | None = None
    train: Dataset | None = None
    test: Dataset | None = None


def load_data(config: ExperimentConfig) -> DataContext:
    src = config.data
    if isinstance(src, MogSource):
        try:
            gen = MixtureOfGaussians.load(src.spec)
        except FileNotFoundError:
            raise DataError(f"mixture spec not found: {src.spec}") from None
        except (ValueError, KeyError) as exc:
            raise DataError(f"bad mixture spec {src.spec}: {exc}") from None
        return DataContext(gen.n_features, gen.n_classes, mog=gen)
    try:
        train = parse_libsvm(pathlib.Path(src.train).read_text())
        test = parse_libsvm(pathlib.Path(src.test).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {exc.filename}") from None
    except ParseError as exc:
        raise DataError(str(exc)) from None
    train, test = align_pair(train, test)
    return DataContext(train.n_features, train.n_classes,
                       train=train, test=test)


@dataclass
class RunResult:
    run_dir: pathlib.Path
    seed: int
    checkpoints: list[Checkpoint]
    bayes_accuracy: float | None
    final_tree_accuracies: list[float]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def run_experiment(config: ExperimentConfig, ctx: DataContext,
                   run_index: int, executor=None) -> RunResult:
    t_start = time.monotonic()
    seed = config.hyperparams.master_seed + run_index
    params = dataclasses.replace(config.hyperparams, master_seed=seed)
    root = RngStream(seed)
    data_rng = root.child(RESERVED_CHILD_INDICES)
    probe_rng = root.child(RESERVED_CHILD_INDICES + 1)
    test_rng = root.child(RESERVED_CHILD_INDICES + 2)

    checkpoints = list(config.checkpoints)
    bayes_accuracy = None
    if ctx.mog is not None:
        stream = ctx.mog.sample(data_rng, checkpoints[-1])
        test_points = ctx.mog.sample(test_rng, config.data.test_points)
        probes = [p.x for p in ctx.mog.sample(probe_rng, config.probe_points)]
        pred = ctx.mog.bayes_predict_batch([p.x for p in test_points])
        bayes_accuracy = float(
            sum(int(a) == p.y for a, p in zip(pred, test_points))
            / len(test_points))
    else:
        stream = stream_schedule(ctx.train, config.passes, data_rng)
        if checkpoints[-1] > len(stream):
            raise ConfigError(
                f"final checkpoint {checkpoints[-1]} exceeds stream length "
                f"{len(stream)} ({config.passes} passes x "
                f"{len(ctx.train.points)} points)")
        if checkpoints[-1] < len(stream):
            checkpoints.append(len(stream))
        test_points = ctx.test.points
        n = len(ctx.train.points)
        probes = [ctx.train.points[probe_rng.randint(0, n)].x
                  for _ in range(config.probe_points)]

    clip_box = clip_box_from_points(stream[:config.clip_sample],
                                    config.clip_margin)
    forest = OnlineForest(params, ctx.n_features, ctx.n_classes)

    run_dir = pathlib.Path(config.out_dir) / f"run{run_index:02d}"
    run_dir.mkdir(parents=True, exist_ok=True)
    curve_rows, split_rows, act_rows = [], [], []
    cp_records = []
    summary = []
    pos = 0
    for cp in checkpoints:
        forest.update_stream(stream[pos:cp], executor=executor)
        pos = cp
        per_tree = []
        for i, tree in enumerate(forest.trees):
            splits, acts = tree.drain_events()
            split_rows.extend(
                (r.t, i, r.depth, r.dim, r.threshold, r.gain, r.left_est,
                 r.right_est) for r in splits)
            act_rows.extend(
                (r.t, i, r.leaf_id, r.s_hat, r.p_hat, r.e_hat,
                 r.best_other_s_hat, r.best_other_created_at) for r in acts)
            n_active = len(tree.fringe.active_ids)
            n_inactive = len(tree.fringe.inactive_ids)
            per_tree.append({"splits": tree.split_count,
                             "est_seen": tree.total_est_seen,
                             "active": n_active, "inactive": n_inactive})
            budget = tree.total_est_seen / (2 * alpha(params, 1)) + 1
            if tree.split_count > budget:
                raise InvariantViolation(
                    f"split budget: tree {i} at t={cp} has "
                    f"{tree.split_count} splits > {budget:.2f}")
            if params.fringe_capacity is not None \
                    and n_active > params.fringe_capacity:
                raise InvariantViolation(
                    f"fringe capacity: tree {i} at t={cp} has {n_active} "
                    f"active leaves > {params.fringe_capacity}")
        forest_acc, tree_accs = evaluate(forest, test_points)
        last_tree_accs = tree_accs
        mean_acc = sum(tree_accs) / len(tree_accs)
        std_acc = (sum((a - mean_acc) ** 2 for a in tree_accs)
                   / len(tree_accs)) ** 0.5
        med_diam, min_est, med_est = probe_stats(forest, probes, clip_box)
        record = Checkpoint(
            t=cp, forest_accuracy=forest_acc, mean_tree_accuracy=mean_acc,
            std_tree_accuracy=std_acc, bayes_accuracy=bayes_accuracy,
            split_count=sum(tr["splits"] for tr in per_tree),
            active_leaves=sum(tr["active"] for tr in per_tree),
            inactive_leaves=sum(tr["inactive"] for tr in per_tree),
            median_diameter=med_diam, min_est_count=min_est,
            median_est_count=med_est)
        cp_records.append(record)
        curve_rows.append(tuple(getattr(record, c) for c in CURVES_COLUMNS))
        summary.append({"t": cp, "per_tree": per_tree})

    split_rows.sort(key=lambda r: (r[0], r[1]))
    act_rows.sort(key=lambda r: (r[0], r[1]))
    _write_csv(run_dir / "curves.csv", CURVES_COLUMNS, curve_rows)
    _write_csv(run_dir / "splits.csv", SPLITS_COLUMNS, split_rows)
    _write_csv(run_dir / "activations.csv", ACTIVATIONS_COLUMNS, act_rows)
    forest.save(run_dir / "forest.json.gz")
    run_doc = {
        "run_index": run_index,
        "seed": seed,
        "params": params.to_json(),
        "n_features": ctx.n_features,
        "n_classes": ctx.n_classes,
        "bayes_accuracy": bayes_accuracy,
        "clip_box": [[lo, hi] for lo, hi in clip_box],
        "checkpoints": summary,
        "runtime_sec": round(time.monotonic() - t_start, 3),
    }
    with open(run_dir / "run.json", "w") as fh:
        json.dump(run_doc, fh, indent=1)
        fh.write("\n")
    return RunResult(run_dir=run_dir, seed=seed, checkpoints=cp_records,
                     bayes_accuracy=bayes_accuracy,
                     final_tree_accuracies=last_tree_accs)


def run_all(config: ExperimentConfig, threads: int = 1) -> list[RunResult]:
    ctx = load_data(config)
    results = []
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for r in range(config.runs):
            results.append(run_experiment(config, ctx, r, executor=executor))
    finally:
        if executor is not None:
            executor.shutdown()
    return results
