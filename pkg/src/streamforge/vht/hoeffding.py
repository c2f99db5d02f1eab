"""Configuration and the sequential Hoeffding tree used by local VHT and sharding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..instances import InstanceSchema
from .observers import LeafStatistics
from .tree import Leaf, Outcome, SplitDecision, TreeModel, decide_split


class Buffering:
    WOK = "wok"
    WK = "wk"


@dataclass(frozen=True)
class VhtConfig:
    delta: float = 1e-7
    tau: float = 0.05
    grace_period: int = 200
    criterion: str = "infogain"
    buffering: str = Buffering.WOK
    buffer_size: int | None = None  # z for wk(z); None means unbounded
    parallelism: int = 1
    split_timeout: int | None = None  # MA instance events; default 10 * p * grace_period

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.grace_period < 1:
            raise ValueError("grace period must be at least 1")
        if self.criterion not in ("infogain", "entropy"):
            raise ValueError(f"unknown split criterion {self.criterion!r}")
        if self.buffering not in (Buffering.WOK, Buffering.WK):
            raise ValueError(f"unknown buffering {self.buffering!r}")
        if self.buffer_size is not None and self.buffer_size < 0:
            raise ValueError("buffer size must be non-negative")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")

    @property
    def timeout(self) -> int:
        if self.split_timeout is not None:
            return self.split_timeout
        return 10 * self.parallelism * self.grace_period


@dataclass
class TreeStats:
    decisions: list[SplitDecision] = field(default_factory=list)

    @property
    def splits(self) -> int:
        return sum(d.outcome is Outcome.SPLIT for d in self.decisions)


class HoeffdingTree:
    """Sequential Hoeffding tree with synchronous statistics."""

    def __init__(self, schema: InstanceSchema, config: VhtConfig | None = None):
        if not schema.is_classification:
            raise ValueError("Hoeffding tree needs a nominal class")
        self.schema = schema
        self.config = config or VhtConfig()
        self.n_classes = schema.n_classes
        self.tree = TreeModel(self.n_classes)
        self.stats: dict[int, LeafStatistics] = {}
        self.history = TreeStats()
        self._ids = np.arange(schema.n_attributes)
        self._categorical = schema.categorical_mask
        self._n_values = schema.value_counts

    def predict(self, x: np.ndarray) -> int:
        return self.tree.sort(x).prediction()

    def learn(self, x: np.ndarray, label: int, weight: float = 1.0) -> None:
        leaf = self.tree.sort(x)
        self._update_leaf(leaf, x, label, weight)

    def predict_learn(self, x: np.ndarray, label: int | None, weight: float = 1.0) -> int:
        """Test-then-train on one instance, sorting it only once."""
        leaf = self.tree.sort(x)
        pred = leaf.prediction()
        if label is not None:
            self._update_leaf(leaf, x, label, weight)
        return pred

    def _update_leaf(self, leaf: Leaf, x: np.ndarray, label: int, weight: float) -> None:
        stats = self.stats.get(leaf.id)
        if stats is None:
            stats = self.stats[leaf.id] = LeafStatistics(self._ids, self._categorical, self._n_values, self.n_classes)
        stats.update(x, label, weight)
        leaf.n_seen += 1
        leaf.class_dist[label] += weight
        leaf.seen[label] += weight
        if leaf.n_seen % self.config.grace_period == 0 and not leaf.is_pure():
            self._attempt_split(leaf, stats)

    def _attempt_split(self, leaf: Leaf, stats: LeafStatistics) -> None:
        best, second = stats.top_two()
        suggestions = []
        if best is not None:
            suggestions.append((best.merit, best.attribute, best))
        if second is not None:
            suggestions.append((second[0], second[1], None))
        cfg = self.config
        decision = decide_split(leaf.id, suggestions, leaf.weight, self.n_classes, cfg.delta, cfg.tau)
        self.history.decisions.append(decision)
        if decision.outcome is Outcome.SPLIT:
            self.tree.split(leaf, decision.best)
            del self.stats[leaf.id]

    @property
    def observer_count(self) -> int:
        return sum(len(s) for s in self.stats.values())

    def digest(self) -> str:
        return self.tree.digest()
