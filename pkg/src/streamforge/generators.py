"""Synthetic stream sources: random-tree concept, Zipf tweets, and waveform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import AttributeSpec, ClassTarget, Instance, InstanceSchema, NumericTarget

CHUNK = 4096


class _ChunkedSource:
    """Generates instances in vectorised chunks; restartable from the seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self.restart()

    def restart(self) -> None:
        self.rng = np.random.default_rng([self.seed, 1])
        self._buf: list[Instance] = []
        self._pos = 0
        self.produced = 0

    def _chunk(self, n: int) -> list[Instance]:
        raise NotImplementedError

    def next(self) -> Instance | None:
        if self._pos >= len(self._buf):
            self._buf = self._chunk(CHUNK)
            self._pos = 0
        inst = self._buf[self._pos]
        self._pos += 1
        self.produced += 1
        return inst


# random tree --------------------------------------------------------------------


@dataclass(frozen=True)
class RandomTreeConfig:
    n_categorical: int = 10
    n_numeric: int = 10
    n_values: int = 2
    max_depth: int = 5
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_categorical < 0 or self.n_numeric < 0 or self.n_categorical + self.n_numeric < 1:
            raise ValueError("need at least one attribute")
        if self.n_values < 2:
            raise ValueError("categorical attributes need at least two values")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")


class ConceptTree:
    """Fixed random decision tree stored as flat arrays.

    Internal nodes test one attribute (categorical: one child per value;
    numeric: ``x <= threshold`` goes left). Leaves hold a class.
    """

    def __init__(self, config: RandomTreeConfig):
        rng = np.random.default_rng([config.seed, 0])
        self.config = config
        m = config.n_categorical + config.n_numeric
        self.is_categorical = np.arange(m) < config.n_categorical
        self.attribute: list[int] = []
        self.threshold: list[float] = []
        self.children: list[list[int]] = []
        self.leaf_class: list[int] = []
        self.mass: list[float] = []
        self.parent: list[int] = []
        self._grow(rng, -1, 1.0, 0, np.arange(m))
        self._assign_classes()
        self._balance()
        width = max(config.n_values, 2)
        n = len(self.attribute)
        self.child_table = np.full((n, width), -1, dtype=np.int64)
        for i, ch in enumerate(self.children):
            self.child_table[i, : len(ch)] = ch
        self.attr_arr = np.array(self.attribute, dtype=np.int64)
        self.thr_arr = np.array(self.threshold)
        self.cls_arr = np.array(self.leaf_class, dtype=np.int64)
        self.cat_node = np.array([a >= 0 and bool(self.is_categorical[a]) for a in self.attribute])

    def _node(self, parent: int, mass: float) -> int:
        self.attribute.append(-1)
        self.threshold.append(np.nan)
        self.children.append([])
        self.leaf_class.append(-1)
        self.mass.append(mass)
        self.parent.append(parent)
        return len(self.attribute) - 1

    def _grow(self, rng, parent, mass, depth, free) -> int:
        node = self._node(parent, mass)
        if depth == self.config.max_depth or free.size == 0:
            return node
        attr = int(rng.choice(free))
        rest = free[free != attr]
        self.attribute[node] = attr
        if self.is_categorical[attr]:
            k = self.config.n_values
            masses = [mass / k] * k
        else:
            t = float(rng.uniform(0.2, 0.8))
            self.threshold[node] = t
            masses = [mass * t, mass * (1 - t)]
        for child_mass in masses:
            self.children[node].append(self._grow(rng, node, child_mass, depth + 1, rest))
        return node

    def leaves(self) -> list[int]:
        return [i for i, a in enumerate(self.attribute) if a < 0]

    def _assign_classes(self) -> None:
        # heaviest leaves first, each to the currently lightest class
        totals = np.zeros(self.config.n_classes)
        for leaf in sorted(self.leaves(), key=lambda i: (-self.mass[i], i)):
            c = int(np.argmin(totals))
            self.leaf_class[leaf] = c
            totals[c] += self.mass[leaf]

    def class_mass(self) -> np.ndarray:
        totals = np.zeros(self.config.n_classes)
        for leaf in self.leaves():
            totals[self.leaf_class[leaf]] += self.mass[leaf]
        return totals

    def _balance(self) -> None:
        """Shift one numeric threshold so the two-class masses match exactly."""
        if self.config.n_classes != 2:
            return
        gap = self.class_mass()[0] - 0.5
        best = None
        for node, attr in enumerate(self.attribute):
            if attr < 0 or self.is_categorical[attr]:
                continue
            left, right = self.children[node]
            if self.attribute[left] >= 0 or self.attribute[right] >= 0:
                continue
            if self.leaf_class[left] == self.leaf_class[right]:
                continue
            sign = 1.0 if self.leaf_class[left] == 0 else -1.0
            t = self.threshold[node] - sign * gap / self.mass[node]
            if 0.05 <= t <= 0.95 and (best is None or self.mass[node] > best[1]):
                best = (node, self.mass[node], t)
        if best is None:
            return
        node, mass, t = best
        self.threshold[node] = t
        left, right = self.children[node]
        self.mass[left], self.mass[right] = mass * t, mass * (1 - t)

    def classify(self, x: np.ndarray) -> np.ndarray:
        """Labels for a (n, attributes) matrix."""
        n = x.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for _ in range(self.config.max_depth):
            attr = self.attr_arr[node]
            internal = attr >= 0
            if not internal.any():
                break
            v = x[rows, np.maximum(attr, 0)]
            branch = np.where(self.cat_node[node], v, v > self.thr_arr[node]).astype(np.int64)
            nxt = self.child_table[node, np.where(internal, branch, 0)]
            node = np.where(internal, nxt, node)
        return self.cls_arr[node]

    def depth_one_attribute(self) -> int:
        return self.attribute[0]


class RandomTreeGenerator(_ChunkedSource):
    """Dense instances labelled by a fixed random tree (categorical first, then numeric attributes)."""

    def __init__(self, config: RandomTreeConfig | None = None):
        self.config = config or RandomTreeConfig()
        self.concept = ConceptTree(self.config)
        cfg = self.config
        values = [str(v) for v in range(cfg.n_values)]
        attrs = [AttributeSpec.categorical(f"nom{i}", values) for i in range(cfg.n_categorical)]
        attrs += [AttributeSpec.numeric(f"num{i}") for i in range(cfg.n_numeric)]
        self._schema = InstanceSchema(tuple(attrs), ClassTarget("class", tuple(f"c{k}" for k in range(cfg.n_classes))), "random-tree")
        super().__init__(cfg.seed)

    def schema(self) -> InstanceSchema:
        return self._schema

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        x = np.empty((n, cfg.n_categorical + cfg.n_numeric))
        x[:, : cfg.n_categorical] = self.rng.integers(0, cfg.n_values, size=(n, cfg.n_categorical))
        x[:, cfg.n_categorical :] = self.rng.random((n, cfg.n_numeric))
        return x, self.concept.classify(x)

    def _chunk(self, n: int) -> list[Instance]:
        x, y = self.sample(n)
        return [Instance(row, int(c)) for row, c in zip(x, y)]


# tweets --------------------------------------------------------------------------


@dataclass(frozen=True)
class TweetConfig:
    vocabulary: int = 1000
    mean_words: float = 15.0
    sd_words: float = 1.0
    zipf_skew: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.vocabulary < 1:
            raise ValueError("vocabulary must be >= 1")
        if self.zipf_skew <= 1:
            raise ValueError("zipf skew must exceed 1")


def zipf_pmf(vocabulary: int, skew: float) -> np.ndarray:
    """P(rank r) for r = 1..vocabulary under a Zipf law truncated to the vocabulary."""
    w = np.arange(1, vocabulary + 1, dtype=np.float64) ** -skew
    return w / w.sum()


class RandomTweetGenerator(_ChunkedSource):
    """Sparse binary bag-of-words tweets.

    The class picks the rank-to-word mapping: class 0 maps rank r to word
    r - 1, class 1 reverses the vocabulary (rank r to word D - r).
    """

    def __init__(self, config: TweetConfig | None = None):
        self.config = config or TweetConfig()
        d = self.config.vocabulary
        self._cdf = np.cumsum(zipf_pmf(d, self.config.zipf_skew))
        self._cdf[-1] = 1.0
        attrs = tuple(AttributeSpec.numeric(f"w{i}") for i in range(d))
        self._schema = InstanceSchema(attrs, ClassTarget("class", ("0", "1")), "random-tweet")
        super().__init__(self.config.seed)

    def schema(self) -> InstanceSchema:
        return self._schema

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Raw draws: (labels, word counts per tweet, concatenated ranks)."""
        cfg = self.config
        labels = self.rng.integers(0, 2, size=n)
        lengths = np.maximum(1, np.rint(self.rng.normal(cfg.mean_words, cfg.sd_words, size=n))).astype(np.int64)
        ranks = np.searchsorted(self._cdf, self.rng.random(int(lengths.sum())), side="right") + 1
        return labels, lengths, np.minimum(ranks, cfg.vocabulary)

    def _chunk(self, n: int) -> list[Instance]:
        d = self.config.vocabulary
        labels, lengths, ranks = self.sample(n)
        out = []
        start = 0
        for c, length in zip(labels, lengths):
            r = ranks[start : start + length]
            start += length
            words = np.unique(r - 1 if c == 0 else d - r)
            out.append(Instance(np.ones(words.size), int(c), indices=words, n_attributes=d))
        return out


# waveform ------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveformConfig:
    seed: int = 0
    base_attributes: int = 21
    noise_attributes: int = 19
    regression: bool = False  # numeric target 0..2 instead of a class

    def __post_init__(self):
        if self.base_attributes != 21:
            raise ValueError("the waveform construction has 21 base attributes")
        if self.noise_attributes < 0:
            raise ValueError("noise_attributes must be >= 0")


def waveform_bases() -> np.ndarray:
    """The three triangular base waves over 21 points, shape (3, 21)."""
    i = np.arange(1, 22)
    h1 = np.maximum(6 - np.abs(i - 11), 0)
    h2 = np.maximum(6 - np.abs(i - 15), 0)
    h3 = np.maximum(6 - np.abs(i - 7), 0)
    return np.vstack([h1, h2, h3]).astype(np.float64)


_PAIRS = np.array([[0, 1], [0, 2], [1, 2]])


class WaveformGenerator(_ChunkedSource):
    """Each class mixes two of three base waves; unit Gaussian noise on top, plus pure-noise attributes."""

    def __init__(self, config: WaveformConfig | None = None):
        self.config = config or WaveformConfig()
        cfg = self.config
        self._bases = waveform_bases()
        m = cfg.base_attributes + cfg.noise_attributes
        attrs = tuple(AttributeSpec.numeric(f"att{i + 1}") for i in range(m))
        target = NumericTarget("class", 0.0, 2.0) if cfg.regression else ClassTarget("class", ("0", "1", "2"))
        self._schema = InstanceSchema(attrs, target, "waveform")
        super().__init__(cfg.seed)

    def schema(self) -> InstanceSchema:
        return self._schema

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        labels = self.rng.integers(0, 3, size=n)
        u = self.rng.random(n)[:, None]
        pair = _PAIRS[labels]
        base = u * self._bases[pair[:, 0]] + (1 - u) * self._bases[pair[:, 1]]
        x = np.empty((n, cfg.base_attributes + cfg.noise_attributes))
        x[:, : cfg.base_attributes] = base + self.rng.standard_normal((n, cfg.base_attributes))
        x[:, cfg.base_attributes :] = self.rng.standard_normal((n, cfg.noise_attributes))
        return x, labels

    def _chunk(self, n: int) -> list[Instance]:
        x, y = self.sample(n)
        if self.config.regression:
            return [Instance(row, float(c)) for row, c in zip(x, y)]
        return [Instance(row, int(c)) for row, c in zip(x, y)]
