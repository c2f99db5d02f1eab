"""Straight-line reference implementations used as test oracles.

Everything here is written with plain Python loops and floats so that it
shares no code path with the vectorised library.
"""

from __future__ import annotations

import math

from scipy.special import ndtr

# -- formulas -------------------------------------------------------------------


def entropy_bits(counts) -> float:
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def info_gain(pre, branches, min_frac=0.01) -> float:
    total = sum(sum(b) for b in branches)
    if total <= 0:
        return -math.inf
    big = sum(1 for b in branches if sum(b) >= min_frac * total)
    if big < 2:
        return -math.inf
    after = 0.0
    for b in branches:
        w = sum(b)
        if w > 0:
            after += w / total * entropy_bits(b)
    return entropy_bits(pre) - after


def population_sd(values) -> float:
    n = len(values)
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / n)


def sdr_raw(parent, sides) -> float:
    """Standard deviation reduction computed from raw target values."""
    n = len(parent)
    return population_sd(parent) - sum(len(s) / n * population_sd(s) for s in sides)


# -- sequential Hoeffding tree ----------------------------------------------------


class _Leaf:
    def __init__(self, dist):
        self.dist = list(dist)
        self.n = 0
        self.stats = None


class _Split:
    def __init__(self, attribute, threshold, children, default):
        self.attribute = attribute
        self.threshold = threshold
        self.children = children
        self.default = default


class OracleHoeffdingTree:
    """Textbook VFDT: Gaussian numeric observers with 10 equally spaced
    thresholds, multiway categorical splits, info gain, no-split candidate."""

    def __init__(self, n_values, n_classes, delta=1e-7, tau=0.05, grace=200):
        self.n_values = list(n_values)  # 0 for numeric attributes
        self.k = n_classes
        self.delta = delta
        self.tau = tau
        self.grace = grace
        self.root = _Leaf([0.0] * n_classes)
        self.splits = []  # (attribute, threshold)
        self._ids = 1

    def _sort(self, x):
        node = self.root
        while isinstance(node, _Split):
            v = x[node.attribute]
            if node.threshold is None:
                b = int(v)
            else:
                b = 0 if v <= node.threshold else 1
            node = node.children[b]
        return node

    def predict(self, x) -> int:
        dist = self._sort(x).dist
        best = 0
        for c in range(1, self.k):
            if dist[c] > dist[best]:
                best = c
        return best

    def learn(self, x, y) -> None:
        leaf = self._sort(x)
        if leaf.stats is None:
            leaf.stats = [self._new_observer(a) for a in range(len(self.n_values))]
        for a, obs in enumerate(leaf.stats):
            v = x[a]
            if self.n_values[a]:
                obs[int(v)][y] += 1.0
            else:
                w, s, q, lo, hi = obs[y]
                obs[y] = [w + 1.0, s + v, q + v * v, min(lo, v), max(hi, v)]
        leaf.n += 1
        leaf.dist[y] += 1.0
        if leaf.n % self.grace == 0 and sum(1 for c in leaf.dist if c > 0) > 1:
            self._attempt(leaf)

    def _new_observer(self, a):
        if self.n_values[a]:
            return [[0.0] * self.k for _ in range(self.n_values[a])]
        return [[0.0, 0.0, 0.0, math.inf, -math.inf] for _ in range(self.k)]

    def _numeric_best(self, obs):
        lo = min(o[3] for o in obs)
        hi = max(o[4] for o in obs)
        if not hi > lo:
            return -math.inf, None, None
        total = [o[0] for o in obs]
        step = (hi - lo) / 11
        best = (-math.inf, None, None)
        for i in range(10):
            t = lo + step * (i + 1)
            left = [self._left(o, t) for o in obs]
            right = [total[c] - left[c] for c in range(self.k)]
            g = info_gain(total, [left, right])
            if g > best[0]:
                best = (g, t, [left, right])
        return best

    @staticmethod
    def _left(o, t):
        w, s, q, lo, hi = o
        if w == 0 or t < lo:
            return 0.0
        if t >= hi:
            return w
        mean = s / w
        var = (q - s * s / w) / (w - 1) if w > 1 else 0.0
        sd = math.sqrt(max(var, 0.0))
        if sd > 0:
            return w * float(ndtr((t - mean) / sd))
        return w if t >= mean else 0.0

    def _attempt(self, leaf):
        cands = []
        for a, obs in enumerate(leaf.stats):
            if self.n_values[a]:
                pre = [sum(obs[v][c] for v in range(len(obs))) for c in range(self.k)]
                g = info_gain(pre, obs)
                cands.append((g, a, None, [list(r) for r in obs]))
            else:
                g, t, post = self._numeric_best(obs)
                cands.append((g, a, t, post))
        cands = [c for c in cands if c[0] > -math.inf]
        cands.sort(key=lambda c: (-c[0], c[1]))
        if not cands or cands[0][0] <= 0.0:
            return
        best = cands[0]
        second = cands[1][0] if len(cands) > 1 and cands[1][0] > 0.0 else 0.0
        n = sum(leaf.dist)
        r = math.log2(max(self.k, 2))
        eps = math.sqrt(r * r * math.log(1.0 / self.delta) / (2.0 * n))
        if best[0] - second > eps or eps < self.tau:
            _, a, t, post = best
            children = [_Leaf(p) for p in post]
            weights = [sum(p) for p in post]
            default = max(range(len(weights)), key=lambda i: (weights[i], -i))
            node = _Split(a, t, children, default)
            self._replace(leaf, node)
            self.splits.append((a, t))

    def _replace(self, leaf, node):
        if self.root is leaf:
            self.root = node
            return
        stack = [self.root]
        while stack:
            n = stack.pop()
            if isinstance(n, _Split):
                for i, c in enumerate(n.children):
                    if c is leaf:
                        n.children[i] = node
                        return
                    stack.append(c)
        raise AssertionError("leaf not in tree")
