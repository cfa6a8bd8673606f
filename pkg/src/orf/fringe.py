"""Bounded-memory leaf management.

Leaves are either active (collecting candidate-split statistics) or
inactive (carrying only arrival/error counters). When an active leaf
splits it frees a slot and the inactive leaf with the largest
s-hat = p-hat * e-hat estimate takes its place; while the tree is smaller
than the capacity the freed slots let every new leaf activate immediately,
which reproduces the unbounded algorithm.

The tree-wide arrival count backing p-hat is kept once on the tree and
snapshotted per leaf at creation, so scoring a leaf is O(1) instead of
touching every inactive leaf on every estimation point.
"""

from __future__ import annotations

from dataclasses import dataclass

from orf.core import InvariantViolation


@dataclass
class InactiveLeafStats:
    n_est_in_leaf: int = 0
    n_errors: int = 0
    n_est_in_tree_during_lifetime: int = 0
    est_tree_at_creation: int = 0  # snapshot backing the lazy lifetime count


@dataclass(frozen=True)
class ActivationRecord:
    t: int
    leaf_id: int
    s_hat: float
    p_hat: float
    e_hat: float
    # runner-up among the other inactive leaves, for offline argmax audits
    best_other_s_hat: float | None
    best_other_created_at: int | None


def s_hat(stats: InactiveLeafStats) -> float:
    p = stats.n_est_in_leaf / max(1, stats.n_est_in_tree_during_lifetime)
    e = stats.n_errors / max(1, stats.n_est_in_leaf)
    return p * e


def p_hat(stats: InactiveLeafStats) -> float:
    return stats.n_est_in_leaf / max(1, stats.n_est_in_tree_during_lifetime)


def e_hat(stats: InactiveLeafStats) -> float:
    return stats.n_errors / max(1, stats.n_est_in_leaf)


class FringeState:
    """Per-tree active/inactive bookkeeping. capacity=None disables it."""

    __slots__ = ("capacity", "active_ids", "inactive_ids", "retired_count",
                 "activation_hook")

    def __init__(self, capacity: int | None):
        self.capacity = capacity
        self.active_ids: set[int] = set()
        self.inactive_ids: set[int] = set()
        self.retired_count = 0
        # test instrumentation: called as hook(tree) right before each
        # activation choice
        self.activation_hook = None

    @property
    def bounded(self) -> bool:
        return self.capacity is not None

    def register_root(self, root) -> None:
        root.active = True
        self.active_ids.add(root.node_id)

    def record_estimation_arrival(self, leaf, y: int) -> None:
        """Update an inactive leaf's counters for one arriving point.

        Must run before the point enters leaf.est_hist: the error is scored
        prequentially, against the majority class as of the arrival.
        """
        stats = leaf.stats
        stats.n_est_in_leaf += 1
        if y != leaf.est_hist.majority():
            stats.n_errors += 1

    def refresh(self, stats: InactiveLeafStats, tree_total_est: int) -> None:
        stats.n_est_in_tree_during_lifetime = (
            tree_total_est - stats.est_tree_at_creation)

    def on_leaf_split(self, tree, parent, left, right, t: int) -> list[int]:
        """Retire a just-split leaf, enroll its children, refill capacity.

        Returns the node ids activated (possibly both children, while the
        tree is smaller than the capacity; exactly one at steady state).
        """
        self.active_ids.discard(parent.node_id)
        self.retired_count += 1
        if not self.bounded:
            for child in (left, right):
                child.active = True
                self.active_ids.add(child.node_id)
            return []
        for child in (left, right):
            child.stats = InactiveLeafStats(
                est_tree_at_creation=tree.total_est_seen)
            self.inactive_ids.add(child.node_id)
        activated = []
        while len(self.active_ids) < self.capacity and self.inactive_ids:
            if self.activation_hook is not None:
                self.activation_hook(tree)
            activated.append(self._activate_best(tree, t))
        if len(self.active_ids) > self.capacity:
            raise InvariantViolation(
                f"fringe capacity exceeded: {len(self.active_ids)} active "
                f"> {self.capacity}")
        return activated

    def _activate_best(self, tree, t: int) -> int:
        scored = []
        for node_id in self.inactive_ids:
            leaf = tree.nodes[node_id]
            self.refresh(leaf.stats, tree.total_est_seen)
            scored.append((-s_hat(leaf.stats), leaf.created_at, node_id))
        scored.sort()
        neg_s, _, chosen_id = scored[0]
        leaf = tree.nodes[chosen_id]
        record = ActivationRecord(
            t=t, leaf_id=chosen_id, s_hat=-neg_s,
            p_hat=p_hat(leaf.stats), e_hat=e_hat(leaf.stats),
            best_other_s_hat=-scored[1][0] if len(scored) > 1 else None,
            best_other_created_at=scored[1][1] if len(scored) > 1 else None)
        self.inactive_ids.discard(chosen_id)
        self.active_ids.add(chosen_id)
        leaf.active = True
        leaf.stats = None
        tree.pending_activations.append(record)
        return chosen_id
