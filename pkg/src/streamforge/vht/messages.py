"""Content events exchanged between the model aggregator and local statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observers import SplitCandidate


@dataclass(slots=True)
class AttributeBatch:
    """Attribute events of one instance bound for one statistics instance.

    All members share the leaf and the destination partition, so the batch is
    routed with the composite key of its first member. ``sparse`` batches
    list only non-zero attributes.
    """

    leaf_id: int
    ids: np.ndarray
    values: np.ndarray
    label: int
    weight: float
    sparse: bool = False

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(slots=True)
class Compute:
    leaf_id: int
    class_totals: np.ndarray | None = None  # set for sparse streams to restore implicit zeros


@dataclass(slots=True)
class LocalResult:
    leaf_id: int
    best: SplitCandidate | None
    second: tuple[float, int] | None
    sender: int

    @property
    def empty(self) -> bool:
        return self.best is None


@dataclass(slots=True)
class Drop:
    leaf_id: int
