"""Majority-vote ensemble of independent online trees.

Every tree sees every point (no bagging); randomness enters only through
each tree's own stream assignment and candidate sampling, so trees can be
updated in any order or in parallel with bit-identical results.
"""

from __future__ import annotations

import gzip
import io
import json

from orf.core import (HyperParams, LabeledPoint, RngStream, assign_stream)
from orf.tree import SERIALIZATION_VERSION, OnlineTree

FOREST_FORMAT = "orf-forest"


class OnlineForest:
    def __init__(self, params: HyperParams, n_features: int, n_classes: int,
                 _empty: bool = False):
        self.params = params
        self.n_features = n_features
        self.n_classes = n_classes
        self.t = 0
        if _empty:
            self.trees: list[OnlineTree] = []
            return
        root = RngStream(params.master_seed)
        self.trees = [OnlineTree(params, n_features, n_classes, root.child(i))
                      for i in range(params.num_trees)]

    # -- training -----------------------------------------------------------

    def update(self, point: LabeledPoint):
        """Feed one labeled point to every tree; returns per-tree splits."""
        point.validate(self.n_features, self.n_classes)
        self.t += 1
        t = self.t
        return [tree.update(point.x, point.y,
                            assign_stream(tree.rng, self.params), t)
                for tree in self.trees]

    def update_stream(self, points, executor=None) -> None:
        """Feed a pre-validated batch; parallelizes over trees.

        Trees never share state, so any executor schedule produces the same
        forest as the sequential loop.
        """
        base_t = self.t
        params = self.params

        def run(tree):
            t = base_t
            for p in points:
                t += 1
                tree.update(p.x, p.y, assign_stream(tree.rng, params), t)

        if executor is None:
            for tree in self.trees:
                run(tree)
        else:
            list(executor.map(run, self.trees))
        self.t = base_t + len(points)

    # -- prediction -----------------------------------------------------------

    def vote_counts(self, x) -> list[int]:
        counts = [0] * self.n_classes
        for tree in self.trees:
            counts[tree.predict_class(x)] += 1
        return counts

    def predict(self, x) -> int:
        counts = self.vote_counts(x)
        best, best_c = 0, counts[0]
        for k in range(1, len(counts)):
            if counts[k] > best_c:
                best, best_c = k, counts[k]
        return best

    # -- serialization ----------------------------------------------------------

    def to_doc(self) -> dict:
        return {"format": FOREST_FORMAT,
                "version": SERIALIZATION_VERSION,
                "params": self.params.to_json(),
                "n_features": self.n_features,
                "n_classes": self.n_classes,
                "t": self.t,
                "trees": [tree.to_doc() for tree in self.trees]}

    @classmethod
    def from_doc(cls, doc: dict) -> "OnlineForest":
        if doc.get("format") != FOREST_FORMAT:
            raise ValueError("not a forest document")
        params = HyperParams.from_json(doc["params"])
        forest = cls(params, doc["n_features"], doc["n_classes"], _empty=True)
        forest.t = doc["t"]
        forest.trees = [OnlineTree.from_doc(td, params) for td in doc["trees"]]
        return forest

    def to_bytes(self) -> bytes:
        """Canonical gzip-compressed JSON; equal forests give equal bytes."""
        text = json.dumps(self.to_doc(), separators=(",", ":"),
                          allow_nan=False)
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as zf:
            zf.write(text.encode())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "OnlineForest":
        with gzip.GzipFile(fileobj=io.BytesIO(blob), mode="rb") as zf:
            return cls.from_doc(json.loads(zf.read().decode()))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "OnlineForest":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
