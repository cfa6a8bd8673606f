"""Holdout evaluation, consistency diagnostics, and offline run audits.

The measurable consequences of the theory are what get checked here: cell
diameters at fixed probe points must trend down, leaf estimation counts up,
and the split count can never outrun the estimation data budget
K <= N^e/(2*alpha(1)) + 1 per tree.
"""

from __future__ import annotations

import csv
import json
import math
import pathlib
import statistics
from dataclasses import dataclass, field

import numpy as np

from orf.core import HyperParams, RngStream, alpha
from orf.forest import OnlineForest


@dataclass(frozen=True)
class Checkpoint:
    t: int
    forest_accuracy: float
    mean_tree_accuracy: float
    std_tree_accuracy: float
    bayes_accuracy: float | None
    split_count: int
    active_leaves: int
    inactive_leaves: int
    median_diameter: float
    min_est_count: int
    median_est_count: float


CURVES_COLUMNS = ["t", "forest_accuracy", "mean_tree_accuracy",
                  "std_tree_accuracy", "bayes_accuracy", "split_count",
                  "active_leaves", "inactive_leaves", "median_diameter",
                  "min_est_count", "median_est_count"]
SPLITS_COLUMNS = ["t", "tree", "depth", "dim", "threshold", "gain",
                  "left_est", "right_est"]
ACTIVATIONS_COLUMNS = ["t", "tree", "leaf", "s_hat", "p_hat", "e_hat",
                       "best_other_s_hat", "best_other_created_at"]


def evaluate(forest: OnlineForest, test_points):
    """Holdout accuracy of the forest vote and of every tree."""
    if not test_points:
        raise ValueError("empty test set")
    n_classes = forest.n_classes
    tree_hits = [0] * len(forest.trees)
    forest_hits = 0
    for p in test_points:
        counts = [0] * n_classes
        for i, tree in enumerate(forest.trees):
            pred = tree.predict_class(p.x)
            counts[pred] += 1
            if pred == p.y:
                tree_hits[i] += 1
        best, best_c = 0, counts[0]
        for k in range(1, n_classes):
            if counts[k] > best_c:
                best, best_c = k, counts[k]
        if best == p.y:
            forest_hits += 1
    n = len(test_points)
    return forest_hits / n, [h / n for h in tree_hits]


def clip_box_from_points(points, margin: float = 0.1):
    """Axis-aligned bounding box of the points, expanded by `margin`."""
    if not points:
        raise ValueError("no points for clip box")
    dim = len(points[0].x)
    lo = [math.inf] * dim
    hi = [-math.inf] * dim
    for p in points:
        for d, v in enumerate(p.x):
            if v < lo[d]:
                lo[d] = v
            if v > hi[d]:
                hi[d] = v
    box = []
    for d in range(dim):
        pad = margin * (hi[d] - lo[d])
        box.append((lo[d] - pad, hi[d] + pad))
    return box


def leaf_diameter(tree, x, clip_box) -> float:
    """Euclidean diameter of the leaf cell at x, clipped to the box."""
    leaf = tree.route(x)
    acc = 0.0
    for (lo, hi), (clo, chi) in zip(leaf.extents, clip_box):
        edge = min(hi, chi) - max(lo, clo)
        if edge > 0:
            acc += edge * edge
    return math.sqrt(acc)


def probe_stats(forest, probes, clip_box):
    """Median clipped diameter and min/median estimation count over all
    (probe point, tree) pairs."""
    diams = []
    est_counts = []
    for x in probes:
        for tree in forest.trees:
            leaf = tree.route(x)
            acc = 0.0
            for (lo, hi), (clo, chi) in zip(leaf.extents, clip_box):
                edge = min(hi, chi) - max(lo, clo)
                if edge > 0:
                    acc += edge * edge
            diams.append(math.sqrt(acc))
            est_counts.append(leaf.est_hist.total)
    return (statistics.median(diams), min(est_counts),
            statistics.median(est_counts))


def shrink_factor_check(m: int, trials: int, rng: RngStream):
    """Monte-Carlo estimate of E[max(max U_i, 1 - min U_i)] over m uniforms.

    Returns (mean, standard error); the exact value is (2m+1)/(2m+2).
    """
    if m < 1 or trials < 1:
        raise ValueError("m and trials must be >= 1")
    u = rng.generator.random((trials, m))
    vstar = np.maximum(u.max(axis=1), 1.0 - u.min(axis=1))
    mean = float(vstar.mean())
    stderr = float(vstar.std(ddof=1) / math.sqrt(trials))
    return mean, stderr


# -- offline audit of a finished run ------------------------------------------


@dataclass
class RunAudit:
    hard_failures: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.hard_failures

    def lines(self):
        out = []
        for msg in self.hard_failures:
            out.append(f"FAIL {msg}")
        out.extend(self.notes)
        out.append("result: " + ("PASS" if self.ok else "FAIL"))
        return out


class MissingArtifacts(FileNotFoundError):
    pass


def _read_csv(path: pathlib.Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def load_run_artifacts(run_dir):
    run_dir = pathlib.Path(run_dir)
    needed = ["run.json", "curves.csv", "splits.csv", "activations.csv"]
    missing = [n for n in needed if not (run_dir / n).exists()]
    if missing:
        raise MissingArtifacts(f"{run_dir}: missing {', '.join(missing)}")
    with open(run_dir / "run.json") as fh:
        run = json.load(fh)
    return {"run": run,
            "curves": _read_csv(run_dir / "curves.csv"),
            "splits": _read_csv(run_dir / "splits.csv"),
            "activations": _read_csv(run_dir / "activations.csv")}


def consistency_report(artifacts: dict) -> RunAudit:
    """Audit one run's artifacts.

    Hard invariants (any failure flips the exit status): the per-split
    validity gate, the fringe capacity bound, and the per-tree split-count
    budget. Trend diagnostics are reported as notes.
    """
    audit = RunAudit()
    run = artifacts["run"]
    params = HyperParams.from_json(run["params"])
    curves = artifacts["curves"]
    if len(curves) < 2:
        audit.notes.append("note: fewer than 2 checkpoints; trends not assessed")

    for row in artifacts["splits"]:
        d = int(row["depth"])
        a = alpha(params, d)
        le, re = int(row["left_est"]), int(row["right_est"])
        if le < a or re < a:
            audit.hard_failures.append(
                f"validity gate: split at t={row['t']} tree={row['tree']} "
                f"depth={d} has child estimation counts ({le}, {re}) < {a}")

    a1 = alpha(params, 1)
    for cp in run["checkpoints"]:
        for i, tr in enumerate(cp["per_tree"]):
            bound = tr["est_seen"] / (2 * a1) + 1
            if tr["splits"] > bound:
                audit.hard_failures.append(
                    f"split budget: tree {i} at t={cp['t']} has "
                    f"{tr['splits']} splits > {bound:.2f}")
            if params.fringe_capacity is not None \
                    and tr["active"] > params.fringe_capacity:
                audit.hard_failures.append(
                    f"fringe capacity: tree {i} at t={cp['t']} has "
                    f"{tr['active']} active leaves > {params.fringe_capacity}")

    ks = [int(r["split_count"]) for r in curves]
    if any(b < a for a, b in zip(ks, ks[1:])):
        audit.hard_failures.append("split count decreased between checkpoints")

    for row in artifacts["activations"]:
        other = row["best_other_s_hat"]
        if other and float(row["s_hat"]) < float(other):
            audit.hard_failures.append(
                f"activation at t={row['t']} tree={row['tree']} chose "
                f"s_hat={row['s_hat']} over larger {other}")

    diams = [float(r["median_diameter"]) for r in curves]
    ests = [float(r["median_est_count"]) for r in curves]
    audit.notes.append(f"note: median probe diameter {diams[0]:.4g} -> "
                       f"{diams[-1]:.4g} over {len(curves)} checkpoints")
    audit.notes.append(f"note: median probe estimation count {ests[0]:.4g} "
                       f"-> {ests[-1]:.4g}")
    audit.notes.append(f"note: split count trajectory {ks}")
    if len(diams) >= 2 and diams[-1] > diams[0]:
        audit.notes.append("note: median diameter did not shrink (small run?)")
    if len(ests) >= 2 and ests[-1] < ests[0]:
        audit.notes.append("note: median estimation count did not grow")
    return audit
