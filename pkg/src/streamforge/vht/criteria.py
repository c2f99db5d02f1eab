"""Hoeffding bound and information-theoretic split merits."""

from __future__ import annotations

import math

import numpy as np

#: A split branch must hold at least this fraction of the weight; a candidate
#: needs two such branches to be valid.
MIN_BRANCH_FRACTION = 0.01


def hoeffding_bound(value_range: float, delta: float, n: float) -> float:
    """sqrt(R^2 ln(1/delta) / (2n))."""
    if n <= 0:
        raise ValueError("Hoeffding bound undefined for n <= 0")
    if value_range <= 0:
        raise ValueError("range must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


def entropy(counts) -> float:
    """Shannon entropy in bits of a (weighted) class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an all-zero distribution is undefined")
    return float(entropy_rows(counts[None, :])[0])


def entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy in bits over the last axis; zero-total rows give 0."""
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / total
        terms = np.where(counts > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=-1)


def entropy_range(n_classes: int) -> float:
    return math.log2(max(n_classes, 2))


def info_gain(pre_split, post_split) -> float:
    """Information gain of splitting ``pre_split`` into the ``post_split`` branches.

    Returns ``-inf`` when fewer than two branches carry at least
    ``MIN_BRANCH_FRACTION`` of the weight.
    """
    post = np.asarray(post_split, dtype=np.float64)
    return float(info_gain_batch(np.asarray(pre_split, dtype=np.float64)[None], post[None])[0])


def info_gain_batch(pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Vectorised information gain.

    ``pre`` has shape (..., classes); ``post`` has shape (..., branches, classes).
    """
    branch_w = post.sum(axis=-1)
    total = branch_w.sum(axis=-1)
    h_pre = entropy_rows(pre)
    h_post = entropy_rows(post)
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = (branch_w / total[..., None] * h_post).sum(axis=-1)
        big = (branch_w >= MIN_BRANCH_FRACTION * total[..., None]).sum(axis=-1)
    gain = h_pre - weighted
    return np.where((big >= 2) & (total > 0), gain, -np.inf)
