"""Tree structure shared by every VHT variant, plus the split decision rule."""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .criteria import entropy_range, hoeffding_bound
from .observers import SplitCandidate


class Outcome(enum.Enum):
    SPLIT = "split"
    NO_SPLIT = "no-split"
    PRE_PRUNED = "pre-pruned"


@dataclass
class SplitDecision:
    leaf_id: int
    best: SplitCandidate | None
    second_attribute: int | None  # None stands for the no-split option
    delta_g: float
    epsilon: float
    outcome: Outcome

    @property
    def best_attribute(self) -> int | None:
        return None if self.best is None else self.best.attribute


def decide_split(
    leaf_id: int,
    suggestions: list[tuple[float, int, SplitCandidate | None]],
    n: float,
    n_classes: int,
    delta: float,
    tau: float,
) -> SplitDecision:
    """Apply the Hoeffding test to the merged local results of a leaf.

    ``suggestions`` holds ``(merit, attribute, candidate)`` entries. Only the
    best entry needs a candidate; runner-ups may carry ``None``. The no-split
    option with merit 0 always competes and wins ties.
    """
    ranked = sorted(suggestions, key=lambda s: (-s[0], s[1]))
    eps = hoeffding_bound(entropy_range(n_classes), delta, n)
    if not ranked or ranked[0][0] <= 0.0:
        second = ranked[0][1] if ranked else None
        return SplitDecision(leaf_id, None, second, 0.0, eps, Outcome.PRE_PRUNED)
    merit, _, best = ranked[0]
    second_merit, second_attr = 0.0, None
    if len(ranked) > 1 and ranked[1][0] > 0.0:
        second_merit, second_attr = ranked[1][0], ranked[1][1]
    delta_g = merit - second_merit
    split = delta_g > eps or eps < tau
    return SplitDecision(leaf_id, best, second_attr, delta_g, eps, Outcome.SPLIT if split else Outcome.NO_SPLIT)


@dataclass(eq=False)
class Leaf:
    id: int
    class_dist: np.ndarray
    seen: np.ndarray  # class weights observed since the leaf was created
    n_seen: int = 0
    splitting: bool = False
    frozen: np.ndarray | None = None
    parent: "SplitNode | None" = None
    branch: int = 0

    def prediction(self) -> int:
        dist = self.frozen if self.splitting and self.frozen is not None else self.class_dist
        return int(np.argmax(dist))

    @property
    def weight(self) -> float:
        """Observed weight, including the distribution inherited at creation."""
        return float(self.class_dist.sum())

    def is_pure(self) -> bool:
        return np.count_nonzero(self.class_dist) <= 1


@dataclass(eq=False)
class SplitNode:
    attribute: int
    threshold: float | None
    children: list = field(default_factory=list)
    default_branch: int = 0
    parent: "SplitNode | None" = None
    branch: int = 0


class TreeModel:
    """Decision tree made of split nodes and leaves with unique, never reused ids."""

    def __init__(self, n_classes: int):
        self.n_classes = n_classes
        self.next_id = 0
        self.leaves: dict[int, Leaf] = {}
        self.root: Leaf | SplitNode = self._new_leaf(np.zeros(n_classes))
        self.splits: list[tuple[int, int, float | None]] = []

    def _new_leaf(self, dist: np.ndarray) -> Leaf:
        leaf = Leaf(self.next_id, np.array(dist, dtype=np.float64), np.zeros(self.n_classes))
        self.leaves[leaf.id] = leaf
        self.next_id += 1
        return leaf

    def sort(self, x: np.ndarray) -> Leaf:
        node = self.root
        while type(node) is SplitNode:
            v = x[node.attribute]
            if v != v:
                b = node.default_branch
            elif node.threshold is None:
                b = int(v)
                if b >= len(node.children):
                    b = node.default_branch
            else:
                b = 0 if v <= node.threshold else 1
            node = node.children[b]
        return node

    def split(self, leaf: Leaf, candidate: SplitCandidate) -> list[Leaf]:
        """Replace ``leaf`` by a split node whose children start from the candidate's branch distributions."""
        post = candidate.post
        node = SplitNode(candidate.attribute, candidate.threshold, parent=leaf.parent, branch=leaf.branch)
        node.default_branch = int(np.argmax(post.sum(axis=1)))
        for b in range(post.shape[0]):
            child = self._new_leaf(post[b])
            child.parent, child.branch = node, b
            node.children.append(child)
        if leaf.parent is None:
            self.root = node
        else:
            leaf.parent.children[leaf.branch] = node
        del self.leaves[leaf.id]
        self.splits.append((leaf.id, candidate.attribute, candidate.threshold))
        return node.children

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def depth(self) -> int:
        def walk(node) -> int:
            if type(node) is Leaf:
                return 0
            return 1 + max(walk(c) for c in node.children)

        return walk(self.root)

    def digest(self) -> str:
        """SHA-256 over a pre-order serialisation of structure and leaf statistics."""
        h = hashlib.sha256()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if type(node) is Leaf:
                h.update(struct.pack("<cqq", b"L", node.id, node.n_seen))
                h.update(node.class_dist.tobytes())
            else:
                thr = float("nan") if node.threshold is None else node.threshold
                h.update(struct.pack("<cqdqq", b"S", node.attribute, thr, len(node.children), node.default_branch))
                stack.extend(reversed(node.children))
        return h.hexdigest()
