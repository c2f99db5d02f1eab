"""Prequential (test-then-train) evaluation, metrics and CSV/figure reports."""

from __future__ import annotations

import dataclasses
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .engine import EngineConfig, RunReport, run
from .events import PredictionEvent, SourceAdapter
from .instances import InstanceSchema, StreamSource
from .topology import ContentEvent, Emitter, Processor, Stream, TopologyBuilder


class ConfigurationError(ValueError):
    """Learner and stream do not fit together, or a task is malformed."""


# metric windows -----------------------------------------------------------------


class ClassificationWindow:
    """Cumulative confusion counts; reports accuracy and Cohen's kappa."""

    metric_names = ("accuracy", "kappa")

    def __init__(self, n_classes: int):
        self.confusion = np.zeros((n_classes, n_classes))
        self.seen = 0
        self.weight = 0.0
        self.correct = 0.0

    def add(self, truth, prediction, weight: float = 1.0) -> None:
        self.seen += 1
        self.weight += weight
        t, p = int(truth), int(prediction)
        self.confusion[t, p] += weight
        if t == p:
            self.correct += weight

    def metrics(self) -> tuple[float, float]:
        if self.seen == 0:
            raise ValueError("no instances evaluated")
        n = self.weight
        acc = self.correct / n
        expected = float(self.confusion.sum(axis=0) @ self.confusion.sum(axis=1)) / (n * n)
        kappa = 0.0 if expected >= 1.0 else (acc - expected) / (1.0 - expected)
        return acc, kappa


class RegressionWindow:
    """Absolute and squared error sums; both metrics are normalized by the target range.

    Predictions are clamped to ``[low, high]`` first, which keeps the
    normalized values in [0, 1].
    """

    metric_names = ("mae", "rmse")

    def __init__(self, low: float, high: float):
        if not high > low:
            raise ValueError("target range must be positive")
        self.low = low
        self.high = high
        self.range = high - low
        self.seen = 0
        self.weight = 0.0
        self.abs_sum = 0.0
        self.sq_sum = 0.0

    def add(self, truth, prediction, weight: float = 1.0) -> None:
        p = min(max(float(prediction), self.low), self.high)
        e = abs(float(truth) - p)
        self.seen += 1
        self.weight += weight
        self.abs_sum += weight * e
        self.sq_sum += weight * e * e

    def metrics(self) -> tuple[float, float]:
        if self.seen == 0:
            raise ValueError("no instances evaluated")
        n = self.weight
        return self.abs_sum / n / self.range, math.sqrt(self.sq_sum / n) / self.range


def make_window(schema: InstanceSchema):
    if schema.is_classification:
        return ClassificationWindow(schema.n_classes)
    t = schema.target
    return RegressionWindow(t.min, t.max)


def error_metrics(errors: Sequence[float], value_range: float) -> tuple[float, float]:
    """Normalized MAE and RMSE of raw errors."""
    e = np.abs(np.asarray(errors, dtype=float))
    if e.size == 0:
        raise ValueError("no errors given")
    return float(e.mean() / value_range), float(np.sqrt((e * e).mean()) / value_range)


# report rows -----------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    instances: int
    metric1: float
    metric2: float
    throughput: float
    seconds: float

    def csv(self) -> str:
        return f"{self.instances},{_fmt(self.metric1)},{_fmt(self.metric2)},{_fmt(self.throughput)},{_fmt(self.seconds)}"


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def csv_header(metric_names: Sequence[str]) -> str:
    return ",".join(["instances", *metric_names, "throughput", "seconds"])


class Evaluator(Processor):
    """Scores predictions as they arrive and records a row every ``frequency`` instances.

    With several prediction streams the final row is written after the last
    of them has terminated.
    """

    def __init__(self, schema: InstanceSchema, frequency: int, n_inputs: int = 1, timing: bool = True):
        if frequency < 1:
            raise ValueError("reporting frequency must be at least 1")
        self.window = make_window(schema)
        self.frequency = frequency
        self.n_inputs = n_inputs
        self.timing = timing
        self.rows: list[ReportRow] = []
        self.unlabeled = 0
        self._terminals = 0
        self._start: float | None = None

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            self._terminals += 1
            if self._terminals == self.n_inputs and self.window.seen and (not self.rows or self.rows[-1].instances != self.window.seen):
                self._record()
            return
        ev: PredictionEvent = event.payload
        if self._start is None:
            self._start = time.perf_counter()
        if ev.truth is None:
            self.unlabeled += 1
            return
        self.window.add(ev.truth, ev.prediction, ev.weight)
        if self.window.seen % self.frequency == 0:
            self._record()

    def _record(self) -> None:
        m1, m2 = self.window.metrics()
        if self.timing:
            seconds = time.perf_counter() - self._start
            throughput = self.window.seen / seconds if seconds > 0 else math.inf
        else:
            seconds = throughput = math.nan
        self.rows.append(ReportRow(self.window.seen, m1, m2, throughput, seconds))


# tasks ---------------------------------------------------------------------------


LearnerBuild = Callable[[TopologyBuilder, Stream, InstanceSchema], list[Stream]]


@dataclass
class Learner:
    """A named topology fragment: consumes instance events, produces prediction streams."""

    name: str
    build: LearnerBuild
    classification: bool
    regression: bool


@dataclass
class PrequentialTask:
    source: StreamSource
    learner: Learner
    frequency: int = 100_000
    max_instances: int | None = None
    timing: bool = True

    def __post_init__(self):
        if self.frequency < 1:
            raise ConfigurationError("reporting frequency must be at least 1")
        schema = self.source.schema()
        if schema.is_classification and not self.learner.classification:
            raise ConfigurationError(f"{self.learner.name} cannot learn a nominal target")
        if not schema.is_classification and not self.learner.regression:
            raise ConfigurationError(f"{self.learner.name} cannot learn a numeric target")


@dataclass
class PrequentialResult:
    rows: list[ReportRow]
    metric_names: tuple[str, str]
    report: RunReport = field(repr=False)

    @property
    def final(self) -> ReportRow:
        return self.rows[-1]

    def csv(self) -> str:
        return "\n".join([csv_header(self.metric_names), *(r.csv() for r in self.rows)]) + "\n"


def build_prequential(task: PrequentialTask) -> tuple:
    schema = task.source.schema()
    b = TopologyBuilder("prequential")
    src = SourceAdapter(task.source, task.max_instances)
    src_h = b.add_processor(src, 1, name="source")
    src.output = b.create_stream(src_h, "instance")
    predictions = task.learner.build(b, src.output, schema)
    evaluator = Evaluator(schema, task.frequency, len(predictions), task.timing)
    ev_h = b.add_processor(evaluator, 1, name="evaluator")
    for s in predictions:
        b.connect_input_shuffle(ev_h, s)
    return b.build(), evaluator.window.metric_names


def run_prequential(task: PrequentialTask, engine: EngineConfig | None = None) -> PrequentialResult:
    topology, names = build_prequential(task)
    report = run(topology, engine or EngineConfig())
    evaluator: Evaluator = report.instance("evaluator")
    if not evaluator.rows:
        raise ConfigurationError("the stream produced no labeled instances")
    return PrequentialResult(evaluator.rows, names, report)


def run_seeds(make_task: Callable[[int], PrequentialTask], seeds: Iterable[int], engine: EngineConfig | None = None) -> list[PrequentialResult]:
    """One run per seed; the seed goes to the task factory and to the engine."""
    engine = engine or EngineConfig()
    out = []
    for s in seeds:
        cfg = dataclasses.replace(engine, seed=s)
        out.append(run_prequential(make_task(s), cfg))
    return out


def mean_final(results: Sequence[PrequentialResult], metric: int = 1) -> float:
    return float(np.mean([getattr(r.final, f"metric{metric}") for r in results]))


# output --------------------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_report(result: PrequentialResult, csv_path: Path, title: str = "") -> Path:
    """Write the CSV and a PNG of the metric curves next to it; returns the PNG path."""
    write_atomic(csv_path, result.csv())
    png = csv_path.with_suffix(".png")
    plot_rows(result.rows, result.metric_names, png, title)
    return png


def plot_rows(rows: Sequence[ReportRow], names: Sequence[str], path: Path, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = [r.instances for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, [r.metric1 for r in rows], marker="o", label=names[0])
    ax.plot(x, [r.metric2 for r in rows], marker="s", label=names[1])
    ax.set_xlabel("instances")
    ax.set_ylabel("cumulative value")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    tmp = path.with_name(f".{path.name}.tmp.png")
    fig.savefig(tmp, dpi=100)
    plt.close(fig)
    os.replace(tmp, path)
