"""Named learners and streams, built from parsed task components."""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable

from .amrules.rules import AmrConfig
from .amrules.topologies import build_hamr, build_local_rules, build_vamr
from .evaluation import ConfigurationError, Learner, PrequentialTask
from .generators import (
    RandomTreeConfig,
    RandomTreeGenerator,
    RandomTweetGenerator,
    TweetConfig,
    WaveformConfig,
    WaveformGenerator,
)
from .instances import ArffFileStream, StreamSource
from .taskspec import ComponentSpec, TaskSpec
from .vht.hoeffding import Buffering, VhtConfig
from .vht.topologies import build_local_tree, build_sharding, build_vht


class UnknownComponent(ConfigurationError):
    pass


@dataclass(frozen=True)
class Entry:
    summary: str
    flags: dict[str, str]
    make: Callable


def _flag_reader(spec: ComponentSpec, entry: Entry):
    unknown = set(spec.flags) - set(entry.flags)
    if unknown:
        raise ConfigurationError(f"{spec.name} does not take {', '.join('-' + f for f in sorted(unknown))}")

    def read(flag: str, cast, default):
        raw = spec.get(flag)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError as e:
            raise ConfigurationError(f"bad value for -{flag} of {spec.name}: {raw!r}") from e

    return read


def _switch(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(text)


# learners ------------------------------------------------------------------------

_TREE_FLAGS = {
    "g": "grace period (instances between split attempts)",
    "d": "split confidence delta",
    "t": "tie threshold tau",
    "s": "split criterion: infogain",
}
_RULE_FLAGS = {
    "Nm": "updates between expansion attempts",
    "delta": "expansion confidence",
    "tau": "tie threshold",
    "ordered": "true: predict with and train only the first accepting rule",
}


def _vht_config(read, **extra) -> VhtConfig:
    return VhtConfig(
        grace_period=read("g", int, 200),
        delta=read("d", float, 1e-7),
        tau=read("t", float, 0.05),
        criterion=read("s", str, "infogain"),
        **extra,
    )


def _buffering(text: str) -> tuple[str, int | None]:
    parts = text.split()
    if parts[0] == Buffering.WOK and len(parts) == 1:
        return Buffering.WOK, None
    if parts[0] == Buffering.WK and len(parts) <= 2:
        return Buffering.WK, int(parts[1]) if len(parts) == 2 else None
    raise ValueError(text)


def _vht(read) -> Learner:
    buffering, size = read("b", _buffering, (Buffering.WOK, None))
    cfg = _vht_config(read, parallelism=read("p", int, 1), buffering=buffering, buffer_size=size, split_timeout=read("timeout", int, None))
    return Learner("VerticalHoeffdingTree", partial(_build, build_vht, cfg), True, False)


def _local_tree(read) -> Learner:
    return Learner("HoeffdingTreeLocal", partial(_build, build_local_tree, _vht_config(read)), True, False)


def _sharding(read) -> Learner:
    cfg = _vht_config(read, parallelism=read("p", int, 2))
    return Learner("Sharding", partial(_build, build_sharding, cfg), True, False)


def _amr_config(read, **extra) -> AmrConfig:
    return AmrConfig(
        grace_period=read("Nm", int, 200),
        delta=read("delta", float, 1e-7),
        tau=read("tau", float, 0.05),
        ordered=read("ordered", _switch, False),
        **extra,
    )


def _local_rules(read) -> Learner:
    return Learner("AMRulesLocal", partial(_build, build_local_rules, _amr_config(read)), False, True)


def _vamr(read) -> Learner:
    cfg = _amr_config(read, parallelism=read("p", int, 1))
    return Learner("VAMR", partial(_build, build_vamr, cfg), False, True)


def _hamr(read) -> Learner:
    cfg = _amr_config(read, parallelism=read("p", int, 1), aggregators=read("r", int, 2))
    return Learner("HAMR", partial(_build, build_hamr, cfg), False, True)


def _build(fn, config, builder, instances, schema):
    return fn(builder, instances, schema, config)


LEARNERS: dict[str, Entry] = {
    "VerticalHoeffdingTree": Entry(
        "vertically parallel Hoeffding tree",
        {**_TREE_FLAGS, "p": "local-statistics parallelism", "b": "buffering: wok | wk [z]", "timeout": "split timeout in instances"},
        _vht,
    ),
    "HoeffdingTreeLocal": Entry("single-processor Hoeffding tree", _TREE_FLAGS, _local_tree),
    "Sharding": Entry("horizontal baseline: p trees on disjoint substreams, majority vote", {**_TREE_FLAGS, "p": "number of shards"}, _sharding),
    "AMRulesLocal": Entry("single-processor adaptive model rules", _RULE_FLAGS, _local_rules),
    "VAMR": Entry("vertical AMRules: one aggregator, p rule learners", {**_RULE_FLAGS, "p": "rule-learner parallelism"}, _vamr),
    "HAMR": Entry(
        "hybrid AMRules: r aggregators, p rule learners, one default-rule learner",
        {**_RULE_FLAGS, "p": "rule-learner parallelism", "r": "model-aggregator parallelism"},
        _hamr,
    ),
}
_LEARNER_ALIASES = {"VHT": "VerticalHoeffdingTree", "LocalHoeffdingTree": "HoeffdingTreeLocal", "AMRules": "AMRulesLocal"}


# streams -------------------------------------------------------------------------


def _random_tree(read, seed: int) -> StreamSource:
    return RandomTreeGenerator(
        RandomTreeConfig(
            n_categorical=read("c", int, 10),
            n_numeric=read("n", int, 10),
            n_values=read("v", int, 2),
            max_depth=read("d", int, 5),
            n_classes=read("k", int, 2),
            seed=read("r", int, seed),
        )
    )


def _tweets(read, seed: int) -> StreamSource:
    return RandomTweetGenerator(
        TweetConfig(
            vocabulary=read("d", int, 1000),
            mean_words=read("l", float, 15.0),
            zipf_skew=read("z", float, 1.5),
            seed=read("r", int, seed),
        )
    )


def _numeric_target(text: str) -> bool:
    if text not in ("class", "numeric"):
        raise ValueError(text)
    return text == "numeric"


def _waveform(read, seed: int) -> StreamSource:
    return WaveformGenerator(
        WaveformConfig(
            seed=read("r", int, seed),
            noise_attributes=read("n", int, 19),
            regression=read("t", _numeric_target, False),
        )
    )


def _arff(read, seed: int) -> StreamSource:
    path = read("f", str, None)
    if path is None:
        raise ConfigurationError("ArffFileStream needs -f <file>")
    try:
        return ArffFileStream(path, target=read("c", str, None))
    except OSError as e:
        raise ConfigurationError(f"cannot open {path}: {e.strerror}") from e


STREAMS: dict[str, Entry] = {
    "RandomTreeGenerator": Entry(
        "labels from a random concept tree",
        {"c": "categorical attributes", "n": "numeric attributes", "v": "values per categorical attribute", "d": "tree depth", "k": "classes", "r": "seed"},
        _random_tree,
    ),
    "RandomTweetGenerator": Entry(
        "sparse bag-of-words tweets, Zipf word ranks",
        {"d": "vocabulary size", "l": "mean words per tweet", "z": "Zipf skew", "r": "seed"},
        _tweets,
    ),
    "WaveformGenerator": Entry(
        "waveform mixtures; -t numeric gives a regression target",
        {"r": "seed", "n": "noise attributes", "t": "target: class | numeric"},
        _waveform,
    ),
    "ArffFileStream": Entry("instances read from an ARFF file", {"f": "path", "c": "target attribute (default: last)"}, _arff),
}


def _lookup(table: dict[str, Entry], aliases: dict[str, str], name: str, kind: str) -> tuple[str, Entry]:
    short = name.rsplit(".", 1)[-1]
    short = aliases.get(short, short)
    if short not in table:
        raise UnknownComponent(f"unknown {kind} {name!r}; valid {kind}s: {', '.join(table)}")
    return short, table[short]


def make_learner(spec: ComponentSpec) -> Learner:
    _, entry = _lookup(LEARNERS, _LEARNER_ALIASES, spec.name, "learner")
    try:
        return entry.make(_flag_reader(spec, entry))
    except ValueError as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"{spec.name}: {e}") from e


def make_stream(spec: ComponentSpec, seed: int = 0) -> StreamSource:
    _, entry = _lookup(STREAMS, {}, spec.name, "stream")
    try:
        return entry.make(_flag_reader(spec, entry), seed)
    except ValueError as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"{spec.name}: {e}") from e


TASK_FLAGS = {
    "l": "learner component",
    "s": "stream component",
    "f": "reporting frequency (instances)",
    "i": "maximum number of instances",
}


def make_task(spec: TaskSpec, seed: int = 0, timing: bool = True) -> PrequentialTask:
    top = spec.as_component()
    unknown = set(top.flags) - set(TASK_FLAGS)
    if unknown:
        raise ConfigurationError(f"{spec.task} does not take {', '.join('-' + f for f in sorted(unknown))}")
    learner_spec = top.component("l")
    stream_spec = top.component("s")
    if learner_spec is None or stream_spec is None:
        raise ConfigurationError(f"{spec.task} needs both -l <learner> and -s <stream>")
    learner = make_learner(learner_spec)
    source = make_stream(stream_spec, seed)
    try:
        freq = int(top.get("f", "100000"))
        limit = top.get("i")
        limit = int(limit) if limit is not None else None
    except ValueError as e:
        raise ConfigurationError(f"bad numeric flag: {e}") from e
    return PrequentialTask(source, learner, freq, limit, timing)
