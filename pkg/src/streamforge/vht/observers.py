"""Per-leaf sufficient statistics for a block of attributes.

A block stores, for every attribute it owns, what the tree needs to score a
split at one leaf:

* numeric attributes: per-class weight, weighted sum, weighted sum of
  squares and observed min/max (a Gaussian summary per class);
* categorical attributes: counters n_ijk per (value j, class k).

Arrays are laid out class-major so that one training example touches one
contiguous row per array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .criteria import info_gain_batch

N_THRESHOLDS = 10


@dataclass
class SplitCandidate:
    attribute: int
    merit: float
    threshold: float | None  # None for a multiway categorical split
    post: np.ndarray  # (branches, classes) class distribution per branch

    @property
    def n_branches(self) -> int:
        return self.post.shape[0]


class NumericBlock:
    def __init__(self, ids: np.ndarray, n_classes: int):
        a = len(ids)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.w = np.zeros((n_classes, a))
        self.s = np.zeros((n_classes, a))
        self.q = np.zeros((n_classes, a))
        self.lo = np.full((n_classes, a), np.inf)
        self.hi = np.full((n_classes, a), -np.inf)

    def __len__(self) -> int:
        return self.ids.shape[0]

    def update(self, x: np.ndarray, cls: int, weight: float) -> None:
        nan = np.isnan(x)
        if nan.any():
            ok = ~nan
            x = x[ok]
            self.w[cls, ok] += weight
            self.s[cls, ok] += weight * x
            self.q[cls, ok] += weight * x * x
            self.lo[cls, ok] = np.minimum(self.lo[cls, ok], x)
            self.hi[cls, ok] = np.maximum(self.hi[cls, ok], x)
            return
        self.w[cls] += weight
        self.s[cls] += weight * x
        self.q[cls] += weight * x * x
        np.minimum(self.lo[cls], x, out=self.lo[cls])
        np.maximum(self.hi[cls], x, out=self.hi[cls])

    def update_at(self, pos: np.ndarray, x: np.ndarray, cls: int, weight: float) -> None:
        self.w[cls, pos] += weight
        self.s[cls, pos] += weight * x
        self.q[cls, pos] += weight * x * x
        self.lo[cls, pos] = np.minimum(self.lo[cls, pos], x)
        self.hi[cls, pos] = np.maximum(self.hi[cls, pos], x)

    def fill_zeros(self, class_totals: np.ndarray) -> None:
        """Account for implicit zeros of sparse instances."""
        gap = class_totals[:, None] - self.w
        hit = gap > 0
        if hit.any():
            self.w += np.where(hit, gap, 0.0)
            self.lo = np.where(hit, np.minimum(self.lo, 0.0), self.lo)
            self.hi = np.where(hit, np.maximum(self.hi, 0.0), self.hi)

    def thresholds(self) -> np.ndarray:
        lo = self.lo.min(axis=0)
        hi = self.hi.max(axis=0)
        step = (hi - lo) / (N_THRESHOLDS + 1)
        return lo[:, None] + step[:, None] * np.arange(1, N_THRESHOLDS + 1)

    def left_weights(self, thresholds: np.ndarray) -> np.ndarray:
        """Estimated weight per class at or below each threshold, shape (attrs, thresholds, classes)."""
        w, s, q = self.w, self.s, self.q
        with np.errstate(divide="ignore", invalid="ignore"):
            mean = s / w
            var = np.where(w > 1, (q - s * s / w) / (w - 1), 0.0)
        sd = np.sqrt(np.maximum(var, 0.0))
        t = thresholds.T[:, None, :]  # (thr, 1, attrs) against (classes, attrs)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (t - mean) / sd
            gauss = w * ndtr(z)
        step = np.where(t >= mean, w, 0.0)
        left = np.where(sd > 0, gauss, step)
        left = np.where(t < self.lo, 0.0, np.where(t >= self.hi, w, left))
        left = np.where(w > 0, left, 0.0)
        return np.transpose(left, (2, 0, 1))

    def best_splits(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Best threshold per attribute: (merits, thresholds, post distributions)."""
        a = len(self)
        k = self.w.shape[0]
        if a == 0:
            return np.empty(0), np.empty(0), np.empty((0, 2, k))
        thr = self.thresholds()
        left = self.left_weights(thr)
        total = self.w.T[:, None, :]
        right = total - left
        post = np.stack([left, right], axis=2)  # (attrs, thr, 2, classes)
        pre = np.broadcast_to(total, left.shape)
        merit = info_gain_batch(pre, post)
        valid = np.isfinite(thr).all(axis=1) & (self.hi.max(axis=0) > self.lo.min(axis=0))
        merit = np.where(valid[:, None], merit, -np.inf)
        best = merit.argmax(axis=1)
        rows = np.arange(a)
        return merit[rows, best], thr[rows, best], post[rows, best]

    def total_weight(self) -> np.ndarray:
        return self.w.sum(axis=0)


class CategoricalBlock:
    def __init__(self, ids: np.ndarray, n_values: np.ndarray, n_classes: int):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.n_values = np.asarray(n_values, dtype=np.int64)
        width = int(self.n_values.max()) if len(self.ids) else 1
        self.counts = np.zeros((len(self.ids), width, n_classes))
        self._rows = np.arange(len(self.ids))

    def __len__(self) -> int:
        return self.ids.shape[0]

    def update(self, x: np.ndarray, cls: int, weight: float) -> None:
        nan = np.isnan(x)
        if nan.any():
            ok = ~nan
            self.counts[self._rows[ok], x[ok].astype(np.int64), cls] += weight
            return
        self.counts[self._rows, x.astype(np.int64), cls] += weight

    def update_at(self, pos: np.ndarray, x: np.ndarray, cls: int, weight: float) -> None:
        self.counts[pos, x.astype(np.int64), cls] += weight

    def fill_zeros(self, class_totals: np.ndarray) -> None:
        gap = class_totals[None, :] - self.counts.sum(axis=1)
        self.counts[:, 0, :] += np.maximum(gap, 0.0)

    def best_splits(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self) == 0:
            return np.empty(0), self.counts
        pre = self.counts.sum(axis=1)
        return info_gain_batch(pre, self.counts), self.counts

    def total_weight(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2))


class LeafStatistics:
    """Statistics held for one leaf over a fixed set of attribute ids."""

    def __init__(self, ids: np.ndarray, categorical: np.ndarray, n_values: np.ndarray, n_classes: int):
        ids = np.asarray(ids, dtype=np.int64)
        cat = np.asarray(categorical, dtype=bool)[ids]
        self.ids = ids
        self.num_pos = np.flatnonzero(~cat)
        self.cat_pos = np.flatnonzero(cat)
        self.numeric = NumericBlock(ids[self.num_pos], n_classes)
        self.categorical = CategoricalBlock(ids[self.cat_pos], np.asarray(n_values)[ids[self.cat_pos]], n_classes)
        self._all_numeric = len(self.cat_pos) == 0
        self.n_classes = n_classes
        self._lookup: np.ndarray | None = None

    def _positions(self) -> np.ndarray:
        # global attribute id -> position inside its block
        if self._lookup is None:
            lookup = np.full(int(self.ids.max()) + 1 if len(self.ids) else 0, -1, dtype=np.int64)
            lookup[self.numeric.ids] = np.arange(len(self.numeric))
            lookup[self.categorical.ids] = np.arange(len(self.categorical))
            self._lookup = lookup
        return self._lookup

    def __len__(self) -> int:
        return len(self.ids)

    def update(self, values: np.ndarray, cls: int, weight: float) -> None:
        """``values`` are aligned with ``self.ids``."""
        if self._all_numeric:
            self.numeric.update(values, cls, weight)
            return
        if len(self.num_pos):
            self.numeric.update(values[self.num_pos], cls, weight)
        self.categorical.update(values[self.cat_pos], cls, weight)

    def update_at(self, ids: np.ndarray, values: np.ndarray, cls: int, weight: float) -> None:
        """Update a subset of the row given by global attribute ids (sparse input)."""
        pos = self._positions()[ids]
        if self._all_numeric:
            self.numeric.update_at(pos, values, cls, weight)
            return
        cat = self.categorical_ids_mask[ids]
        self.numeric.update_at(pos[~cat], values[~cat], cls, weight)
        self.categorical.update_at(pos[cat], values[cat], cls, weight)

    @property
    def categorical_ids_mask(self) -> np.ndarray:
        mask = np.zeros(len(self._positions()), dtype=bool)
        mask[self.categorical.ids] = True
        return mask

    def fill_zeros(self, class_totals: np.ndarray) -> None:
        totals = np.asarray(class_totals, dtype=np.float64)
        if len(self.numeric):
            self.numeric.fill_zeros(totals)
        if len(self.categorical):
            self.categorical.fill_zeros(totals)

    def candidates(self) -> list[tuple[float, int, int]]:
        """(merit, attribute, local position) for every valid candidate."""
        out = []
        if len(self.numeric):
            merits, _, _ = self._num_cache = self.numeric.best_splits()
            out.extend((float(m), int(a), ("n", i)) for i, (m, a) in enumerate(zip(merits, self.numeric.ids)) if m > -np.inf)
        if len(self.categorical):
            merits, _ = self.categorical.best_splits()
            out.extend((float(m), int(a), ("c", i)) for i, (m, a) in enumerate(zip(merits, self.categorical.ids)) if m > -np.inf)
        return out

    def top_two(self) -> tuple[SplitCandidate | None, tuple[float, int] | None]:
        """Best split suggestion and the (merit, attribute) of the runner-up."""
        cands = self.candidates()
        if not cands:
            return None, None
        cands.sort(key=lambda c: (-c[0], c[1]))
        merit, attr, (kind, i) = cands[0]
        if kind == "n":
            _, thr, post = self._num_cache
            best = SplitCandidate(attr, merit, float(thr[i]), post[i].copy())
        else:
            nv = int(self.categorical.n_values[i])
            best = SplitCandidate(attr, merit, None, self.categorical.counts[i, :nv].copy())
        second = (cands[1][0], cands[1][1]) if len(cands) > 1 else None
        return best, second

    def observer_weight(self, attribute: int) -> float:
        pos = np.flatnonzero(self.numeric.ids == attribute)
        if pos.size:
            return float(self.numeric.total_weight()[pos[0]])
        pos = np.flatnonzero(self.categorical.ids == attribute)
        if pos.size:
            return float(self.categorical.total_weight()[pos[0]])
        raise KeyError(attribute)


class LocalStatisticsTable:
    """Table<leaf_id, attribute_id> of observers, created lazily per leaf."""

    def __init__(self, categorical: np.ndarray, n_values: np.ndarray, n_classes: int):
        self.categorical = np.asarray(categorical, dtype=bool)
        self.n_values = np.asarray(n_values, dtype=np.int64)
        self.n_classes = n_classes
        self.rows: dict[int, LeafStatistics] = {}

    def __len__(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def __contains__(self, item: tuple[int, int]) -> bool:
        leaf, attr = item
        row = self.rows.get(leaf)
        return row is not None and bool(np.any(row.ids == attr))

    def update(self, leaf_id: int, ids: np.ndarray, values: np.ndarray, cls: int, weight: float) -> None:
        row = self.rows.get(leaf_id)
        if row is None:
            row = self.rows[leaf_id] = LeafStatistics(ids, self.categorical, self.n_values, self.n_classes)
        row.update(values, cls, weight)

    def update_sparse(self, leaf_id: int, ids: np.ndarray, values: np.ndarray, cls: int, weight: float) -> None:
        row = self.rows.get(leaf_id)
        if row is None:
            everything = np.arange(len(self.categorical))
            row = self.rows[leaf_id] = LeafStatistics(everything, self.categorical, self.n_values, self.n_classes)
        row.update_at(ids, values, cls, weight)

    def leaf(self, leaf_id: int) -> LeafStatistics | None:
        return self.rows.get(leaf_id)

    def observer_weight(self, leaf_id: int, attribute: int) -> float:
        return self.rows[leaf_id].observer_weight(attribute)

    def drop(self, leaf_id: int) -> None:
        self.rows.pop(leaf_id, None)

    def leaves(self) -> list[int]:
        return sorted(self.rows)
