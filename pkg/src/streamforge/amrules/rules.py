"""Rule model for streaming regression: features, heads, expansion statistics, drift and anomaly checks."""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from ..instances import InstanceSchema
from ..vht.criteria import hoeffding_bound

N_THRESHOLDS = 10
LESS, GEQ, EQ = "<", ">=", "="


@dataclass(frozen=True)
class AmrConfig:
    grace_period: int = 200  # N_m
    delta: float = 1e-7
    tau: float = 0.05
    ph_delta: float = 0.005  # in units of the target range
    ph_lambda: float = 50.0  # in units of the target range
    anomaly_cutoff: float = 1e-4
    anomaly_min: int = 30
    learning_rate: float = 0.01
    fading: float = 0.99
    head_refresh: int = 1000
    ordered: bool = False
    parallelism: int = 1  # learners
    aggregators: int = 1  # model aggregators (hybrid variant)

    def __post_init__(self):
        if self.grace_period < 1:
            raise ValueError("grace period must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        for name in ("tau", "ph_delta", "ph_lambda", "anomaly_cutoff", "learning_rate", "fading"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.parallelism < 1 or self.aggregators < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass(frozen=True)
class Feature:
    attribute: int
    op: str
    value: float

    def __post_init__(self):
        if self.op not in (LESS, GEQ, EQ):
            raise ValueError(f"unknown operator {self.op!r}")
        if not math.isfinite(self.value):
            raise ValueError("feature thresholds must be finite")

    def covers(self, x: np.ndarray) -> bool:
        v = x[self.attribute]
        if self.op == LESS:
            return bool(v < self.value)
        if self.op == GEQ:
            return bool(v >= self.value)
        return bool(v == self.value)

    def __str__(self) -> str:
        return f"x{self.attribute} {self.op} {self.value:g}"


def sd_from(n, s, q):
    """Population standard deviation from count, sum and sum of squares (array friendly)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        var = q / n - (s / n) ** 2
    return np.sqrt(np.maximum(np.nan_to_num(var, nan=0.0), 0.0))


def sdr(parent: tuple[float, float, float], sides: list[tuple[float, float, float]]) -> float:
    """Standard deviation reduction of splitting ``parent`` into ``sides``; each is (count, sum, sum of squares)."""
    n = parent[0]
    if n < 2:
        raise ValueError("SDR needs at least two parent observations")
    if any(side[0] <= 0 for side in sides):
        raise ValueError("every side needs at least one observation")
    out = float(sd_from(*parent))
    for side in sides:
        out -= side[0] / n * float(sd_from(*side))
    return out


class PageHinkley:
    """One-sided Page-Hinkley test on a stream of (normalised) absolute errors."""

    __slots__ = ("delta", "threshold", "n", "mean", "m", "M")

    def __init__(self, delta: float = 0.005, threshold: float = 50.0):
        self.delta = delta
        self.threshold = threshold
        self.reset()

    def reset(self) -> None:
        self.n = 0
        self.mean = 0.0
        self.m = 0.0
        self.M = 0.0

    def update(self, error: float) -> bool:
        """Add one error; True when the rule should be evicted."""
        if error < 0:
            raise ValueError("errors must be non-negative")
        self.n += 1
        self.mean += (error - self.mean) / self.n
        self.m += error - self.mean - self.delta
        if self.m < self.M:
            self.M = self.m
        return self.m - self.M > self.threshold


class Welford:
    """Running mean and variance per attribute (NaN entries skipped)."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self, m: int):
        self.n = np.zeros(m)
        self.mean = np.zeros(m)
        self.m2 = np.zeros(m)

    def update(self, x: np.ndarray) -> None:
        ok = ~np.isnan(x)
        if ok.all():
            self.n += 1
            d = x - self.mean
            self.mean += d / self.n
            self.m2 += d * (x - self.mean)
            return
        n = self.n[ok] + 1
        d = x[ok] - self.mean[ok]
        mean = self.mean[ok] + d / n
        self.m2[ok] += d * (x[ok] - mean)
        self.mean[ok] = mean
        self.n[ok] = n

    def sd(self) -> np.ndarray:
        if self.n.size and self.n.min() > 1:
            return np.sqrt(self.m2 / (self.n - 1))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.n > 1, np.sqrt(self.m2 / (self.n - 1)), 0.0)


class AnomalyStats:
    """Per-attribute summaries used to flag covered-but-unusual instances."""

    def __init__(self, schema: InstanceSchema):
        self.categorical = schema.categorical_mask
        self.num = np.flatnonzero(~self.categorical)
        self.cat = np.flatnonzero(self.categorical)
        self.n = 0
        self.numeric = Welford(len(self.num))
        width = int(schema.value_counts[self.cat].max()) if len(self.cat) else 1
        self.counts = np.zeros((len(self.cat), width))
        self._rows = np.arange(len(self.cat))

    def update(self, x: np.ndarray) -> None:
        self.n += 1
        self.numeric.update(x[self.num])
        if len(self.cat):
            v = x[self.cat]
            ok = ~np.isnan(v)
            self.counts[self._rows[ok], v[ok].astype(np.int64)] += 1

    def score(self, x: np.ndarray) -> float:
        """Mean negative log tail probability over the attributes."""
        logs = []
        if len(self.num):
            v = x[self.num]
            sd = self.numeric.sd()
            ok = ~np.isnan(v) & (sd > 0)
            z = np.abs(v[ok] - self.numeric.mean[ok]) / sd[ok]
            p = erfc(z / math.sqrt(2.0))
            logs.append(-np.log(np.maximum(p, 1e-300)))
        if len(self.cat):
            v = x[self.cat]
            ok = ~np.isnan(v)
            tot = self.counts[ok].sum(axis=1)
            freq = self.counts[self._rows[ok], v[ok].astype(np.int64)] / np.maximum(tot, 1)
            logs.append(-np.log(np.maximum(freq, 1e-300)))
        if not logs:
            return 0.0
        all_logs = np.concatenate(logs)
        return float(all_logs.mean()) if all_logs.size else 0.0

    def is_anomaly(self, x: np.ndarray, cutoff: float, min_instances: int) -> bool:
        if self.n < min_instances:
            return False
        return self.score(x) > -math.log(cutoff)


class Head:
    """Adaptive head: target mean or a normalised LMS model, whichever has the lower faded error."""

    def __init__(self, m: int, learning_rate: float = 0.01, fading: float = 0.99):
        self.lr = learning_rate
        self.fading = fading
        self.n = 0.0
        self.sum = 0.0
        self.w = np.zeros(m)
        self.b = 0.0
        self.x_stats = Welford(m)
        self._inv_sd = np.zeros(m)
        self.y_n = 0
        self.y_mean = 0.0
        self.y_m2 = 0.0
        self.err_mean = 0.0
        self.err_lms = 0.0

    def mean(self) -> float:
        return self.sum / self.n if self.n > 0 else 0.0

    def _z(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.x_stats.mean) * self._inv_sd
        if np.isnan(z).any():
            z[np.isnan(z)] = 0.0
        return z

    def _y_sd(self) -> float:
        return math.sqrt(self.y_m2 / (self.y_n - 1)) if self.y_n > 1 else 0.0

    def lms(self, x: np.ndarray) -> float:
        sd = self._y_sd()
        if sd == 0.0:
            return self.y_mean
        return self.y_mean + sd * (float(self.w @ self._z(x)) + self.b)

    def predict(self, x: np.ndarray) -> float:
        if self.y_n > 1 and self.err_lms < self.err_mean:
            return self.lms(x)
        return self.mean()

    def update(self, x: np.ndarray, y: float) -> None:
        a = self.fading
        self.err_mean = a * self.err_mean + abs(y - self.mean())
        self.err_lms = a * self.err_lms + abs(y - self.lms(x))
        self.x_stats.update(x)
        sd = self.x_stats.sd()
        with np.errstate(divide="ignore"):
            self._inv_sd = np.where(sd > 0, 1.0 / sd, 0.0)
        self.y_n += 1
        d = y - self.y_mean
        self.y_mean += d / self.y_n
        self.y_m2 += d * (y - self.y_mean)
        self.n += 1
        self.sum += y
        sd = self._y_sd()
        if sd > 0:
            z = self._z(x)
            err = (y - self.y_mean) / sd - (float(self.w @ z) + self.b)
            self.w += self.lr * err * z
            self.b += self.lr * err

    def restart_mean(self, count: float, total: float) -> None:
        self.n = count
        self.sum = total

    def snapshot(self) -> "Head":
        return copy.deepcopy(self)


@dataclass
class Expansion:
    feature: Feature
    sdr1: float
    sdr2: float
    epsilon: float
    branch: tuple[float, float, float]  # (count, sum, sum of squares) on the feature side
    complement: tuple[float, float, float]


class ExpansionStats:
    """Target statistics and candidate-split summaries for one rule.

    Numeric thresholds are fixed from the range seen in the first
    ``grace_period`` instances after a reset; those instances are kept and
    replayed into the bins once the thresholds exist.
    """

    def __init__(self, schema: InstanceSchema, grace_period: int):
        cat = schema.categorical_mask
        self.num = np.flatnonzero(~cat)
        self.cat = np.flatnonzero(cat)
        self.grace_period = grace_period
        self.n = 0
        self.sum = 0.0
        self.sumsq = 0.0
        self.warm: list[tuple[np.ndarray, float]] = []
        self.thresholds: np.ndarray | None = None
        self.num_bins = np.zeros((len(self.num), N_THRESHOLDS + 1, 3))
        width = int(schema.value_counts[self.cat].max()) if len(self.cat) else 1
        self.n_values = schema.value_counts[self.cat]
        self.cat_bins = np.zeros((len(self.cat), width, 3))
        self._num_rows = np.arange(len(self.num))
        self._cat_rows = np.arange(len(self.cat))

    def update(self, x: np.ndarray, y: float) -> None:
        self.n += 1
        self.sum += y
        self.sumsq += y * y
        if len(self.cat):
            v = x[self.cat]
            ok = ~np.isnan(v)
            self.cat_bins[self._cat_rows[ok], v[ok].astype(np.int64)] += (1.0, y, y * y)
        if self.thresholds is None:
            self.warm.append((x, y))
            if len(self.warm) >= self.grace_period:
                self._fix_thresholds()
        else:
            self._bin(x, y)

    def _fix_thresholds(self) -> None:
        xs = np.array([w[0][self.num] for w in self.warm]).reshape(len(self.warm), len(self.num))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-missing columns give NaN thresholds
            lo = np.nanmin(xs, axis=0) if xs.size else np.zeros(0)
            hi = np.nanmax(xs, axis=0) if xs.size else np.zeros(0)
        step = (hi - lo) / (N_THRESHOLDS + 1)
        self.thresholds = lo[:, None] + step[:, None] * np.arange(1, N_THRESHOLDS + 1)
        for x, y in self.warm:
            self._bin(x, y)
        self.warm = []

    def _bin(self, x: np.ndarray, y: float) -> None:
        if not len(self.num):
            return
        v = x[self.num]
        b = (v[:, None] >= self.thresholds).sum(axis=1)
        ok = ~np.isnan(v)
        if ok.all():
            self.num_bins[self._num_rows, b] += (1.0, y, y * y)
        else:
            self.num_bins[self._num_rows[ok], b[ok]] += (1.0, y, y * y)

    def candidates(self):
        """Best (sdr, feature, branch, complement) per attribute."""
        out = []
        if self.thresholds is not None and len(self.num):
            bins = self.num_bins
            total = bins.sum(axis=1)
            left = np.cumsum(bins, axis=1)[:, :N_THRESHOLDS]
            right = total[:, None, :] - left
            red = _sdr_grid(total, left, right)
            red = np.where(np.isfinite(self.thresholds) & np.isfinite(red), red, -np.inf)
            for i in range(len(self.num)):
                j = int(np.argmax(red[i]))
                if red[i, j] == -np.inf:
                    continue
                l, r = left[i, j], right[i, j]
                thr = float(self.thresholds[i, j])
                if sd_from(*r) < sd_from(*l):
                    feat, side, other = Feature(int(self.num[i]), GEQ, thr), r, l
                else:
                    feat, side, other = Feature(int(self.num[i]), LESS, thr), l, r
                out.append((float(red[i, j]), feat, tuple(side), tuple(other)))
        if len(self.cat):
            bins = self.cat_bins
            total = bins.sum(axis=1)
            right = total[:, None, :] - bins
            red = _sdr_grid(total, bins, right)
            red = np.where(np.isfinite(red), red, -np.inf)
            for i in range(len(self.cat)):
                nv = int(self.n_values[i])
                j = int(np.argmax(red[i, :nv]))
                if red[i, j] == -np.inf:
                    continue
                feat = Feature(int(self.cat[i]), EQ, float(j))
                out.append((float(red[i, j]), feat, tuple(bins[i, j]), tuple(right[i, j])))
        return out

    def try_expand(self, delta: float, tau: float) -> Expansion | None:
        cands = self.candidates()
        if not cands:
            return None
        cands.sort(key=lambda c: (-c[0], c[1].attribute))
        sdr1 = cands[0][0]
        if sdr1 <= 0:
            return None
        sdr2 = max(cands[1][0], 0.0) if len(cands) > 1 else 0.0
        eps = hoeffding_bound(1.0, delta, self.n)
        if sdr2 / sdr1 + eps < 1 or eps < tau:
            _, feat, side, other = cands[0]
            return Expansion(feat, sdr1, sdr2, eps, side, other)
        return None


def _sdr_grid(total: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """SDR for every candidate; ``total`` is (attrs, 3), sides are (attrs, candidates, 3)."""
    n = total[:, 0][:, None]
    nl, nr = left[..., 0], right[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        red = (
            sd_from(*(total[:, None, k] for k in range(3)))
            - nl / n * sd_from(left[..., 0], left[..., 1], left[..., 2])
            - nr / n * sd_from(right[..., 0], right[..., 1], right[..., 2])
        )
    return np.where((nl > 0) & (nr > 0) & (n >= 2), red, -np.inf)


class RuleBody:
    """Rule identity and body; coverage is a box test over the constrained attributes."""

    def __init__(self, rule_id: int, schema: InstanceSchema):
        self.id = rule_id
        self.schema = schema
        m = schema.n_attributes
        self.features: list[Feature] = []
        self.lo = np.full(m, -np.inf)
        self.hi = np.full(m, np.inf)
        self.eq = np.full(m, np.nan)

    def add_feature(self, feature: Feature) -> None:
        a = feature.attribute
        if feature.op == LESS:
            self.hi[a] = min(self.hi[a], feature.value)
        elif feature.op == GEQ:
            self.lo[a] = max(self.lo[a], feature.value)
        else:
            if not self.schema.attributes[a].is_categorical:
                raise ValueError("'=' features only apply to categorical attributes")
            self.eq[a] = feature.value
        self.features.append(feature)
        self._lo_idx = np.flatnonzero(self.lo > -np.inf)
        self._hi_idx = np.flatnonzero(self.hi < np.inf)
        self._eq_idx = np.flatnonzero(~np.isnan(self.eq))

    def covers(self, x: np.ndarray) -> bool:
        if not self.features:
            return True
        i = self._lo_idx
        if i.size and not np.all(x[i] >= self.lo[i]):
            return False
        i = self._hi_idx
        if i.size and not np.all(x[i] < self.hi[i]):
            return False
        i = self._eq_idx
        return not i.size or bool(np.all(x[i] == self.eq[i]))

    @property
    def body(self) -> tuple[Feature, ...]:
        return tuple(self.features)


class RuleReplica(RuleBody):
    """Body and head only, as held by model aggregators."""

    def __init__(self, rule_id: int, schema: InstanceSchema, features, head: "Head"):
        super().__init__(rule_id, schema)
        for f in features:
            self.add_feature(f)
        self.head = head

    def predict(self, x: np.ndarray) -> float:
        return self.head.predict(x)


class Rule(RuleBody):
    """Body (conjunction of features), head, and the statistics that drive expansion and eviction."""

    def __init__(self, rule_id: int, schema: InstanceSchema, config: AmrConfig, head: Head | None = None):
        super().__init__(rule_id, schema)
        self.config = config
        m = schema.n_attributes
        self.head = head if head is not None else Head(m, config.learning_rate, config.fading)
        self.stats = ExpansionStats(schema, config.grace_period)
        self.anomaly = AnomalyStats(schema)
        self.range = schema.target.range
        self.ph = PageHinkley(config.ph_delta, config.ph_lambda)
        self.updates = 0

    def replica(self) -> RuleReplica:
        return RuleReplica(self.id, self.schema, self.features, self.head.snapshot())

    # learning ----------------------------------------------------------------------
    def predict(self, x: np.ndarray) -> float:
        return self.head.predict(x)

    def is_anomaly(self, x: np.ndarray) -> bool:
        cfg = self.config
        return self.anomaly.is_anomaly(x, cfg.anomaly_cutoff, cfg.anomaly_min)

    def drifted(self, x: np.ndarray, y: float) -> bool:
        """Feed the prequential error to the change detector; True means evict."""
        return self.ph.update(abs(y - self.head.predict(x)) / self.range)

    def train(self, x: np.ndarray, y: float) -> Expansion | None:
        self.head.update(x, y)
        self.stats.update(x, y)
        self.anomaly.update(x)
        self.updates += 1
        if self.updates % self.config.grace_period == 0:
            return self.stats.try_expand(self.config.delta, self.config.tau)
        return None

    def expand(self, expansion: Expansion) -> None:
        self.add_feature(expansion.feature)
        self.reset_statistics()
        self.head.restart_mean(expansion.branch[0], expansion.branch[1])

    def reset_statistics(self) -> None:
        self.stats = ExpansionStats(self.schema, self.config.grace_period)
        self.anomaly = AnomalyStats(self.schema)
        self.ph.reset()
        self.updates = 0


class RuleSet:
    """Ordered normal rules plus the default rule.

    Coverage over all rules is evaluated at once from stacked rule boxes;
    call ``invalidate`` after changing a member's body.
    """

    def __init__(self, default: Rule, ordered: bool = False):
        self.rules: list[Rule] = []
        self.default = default
        self.ordered = ordered
        self._boxes = None

    def __len__(self) -> int:
        return len(self.rules)

    def ids(self) -> list[int]:
        return [r.id for r in self.rules]

    def invalidate(self) -> None:
        self._boxes = None

    def add(self, rule: Rule) -> None:
        self.rules.append(rule)
        self._boxes = None

    def remove(self, rule_id: int) -> Rule | None:
        for i, r in enumerate(self.rules):
            if r.id == rule_id:
                self._boxes = None
                return self.rules.pop(i)
        return None

    def get(self, rule_id: int) -> Rule | None:
        for r in self.rules:
            if r.id == rule_id:
                return r
        return None

    def _stack(self):
        if self._boxes is None:
            lo = np.stack([r.lo for r in self.rules])
            hi = np.stack([r.hi for r in self.rules])
            eq = np.stack([r.eq for r in self.rules])
            has_eq = ~np.isnan(eq)
            self._boxes = (lo, hi, eq, has_eq, bool(has_eq.any()))
        return self._boxes

    def covering(self, x: np.ndarray) -> list[Rule]:
        rules = self.rules
        if not rules:
            return []
        if np.isnan(x).any():
            return [r for r in rules if r.covers(x)]
        lo, hi, eq, has_eq, any_eq = self._stack()
        ok = (x >= lo).all(axis=1) & (x < hi).all(axis=1)
        if any_eq:
            ok &= ((x == eq) | ~has_eq).all(axis=1)
        return [rules[i] for i in np.flatnonzero(ok)]

    def predict(self, x: np.ndarray) -> float:
        cover = self.covering(x)
        if not cover:
            return self.default.predict(x)
        if self.ordered:
            return cover[0].predict(x)
        return float(np.mean([r.predict(x) for r in cover]))


def covers(rule: Rule, x: np.ndarray) -> bool:
    return rule.covers(x)
