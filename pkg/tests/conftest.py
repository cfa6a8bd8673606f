import json
import math
import pathlib

from orf.core import HyperParams, RngStream, StreamAssignment

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

TAGS = {"s": StreamAssignment.STRUCTURE,
        "e": StreamAssignment.ESTIMATION,
        "skip": StreamAssignment.SKIP}


def make_params(**over):
    base = dict(num_trees=1, lam=1.0, m=10, tau=0.001, alpha_base=1.0,
                alpha_growth=1.1, beta_multiplier=1000.0, master_seed=42)
    base.update(over)
    return HyperParams(**base)


def synthetic_stream(seed, n, n_features=2, n_classes=2, p_structure=0.5,
                     p_skip=0.0):
    """Labeled stream with real signal: class = quadrant-ish rule + noise."""
    rng = RngStream(seed)
    out = []
    for _ in range(n):
        x = tuple(rng.uniform() for _ in range(n_features))
        clean = int(x[0] > 0.5) if n_classes == 2 else \
            int(sum(x) / n_features * n_classes) % n_classes
        y = clean if rng.uniform() < 0.85 else rng.randint(0, n_classes)
        u = rng.uniform()
        if u < p_structure:
            tag = StreamAssignment.STRUCTURE
        elif u < p_structure + p_skip:
            tag = StreamAssignment.SKIP
        else:
            tag = StreamAssignment.ESTIMATION
        out.append((x, y, tag))
    return out


def drive(tree, stream, t0=0):
    """Push (x, y, tag) triples through a tree; returns split records."""
    splits = []
    t = t0
    for x, y, tag in stream:
        t += 1
        rec = tree.update(x, y, tag, t)
        if rec is not None:
            splits.append(rec)
    return splits


def load_tiny_fixture():
    doc = json.loads((FIXTURES / "tiny_stream.json").read_text())
    stream = [(  # noqa: E201
        (x,), y, TAGS[tag]) for x, y, tag in doc["stream"]]
    return doc, stream


def tree_skeleton(tree):
    """Structure-only view of a tree: split layout, thresholds, leaf cells."""
    from orf.tree import InternalNode
    out = []
    for node in tree.nodes:
        if type(node) is InternalNode:
            out.append(("split", node.node_id, node.dim, node.threshold,
                        node.left, node.right))
        else:
            out.append(("leaf", node.node_id, node.depth, node.created_at,
                        tuple(map(tuple, node.extents))))
    return out


def leaf_cells_in_order(tree):
    """Leaves sorted spatially (1-D helper for the tiny fixture)."""
    leaves = tree.leaves()
    return sorted(leaves, key=lambda l: l.extents[0][0])


def approx_inf(v):
    return None if v is None or math.isinf(v) else v
