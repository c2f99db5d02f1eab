"""Distributed rule learning: model aggregators, rule learners and the default-rule learner.

Vertical variant: one aggregator owns rule bodies, heads and the default
rule; learners own the full statistics of the rules assigned to them by key.
Hybrid variant: several aggregators share the input, and the default rule
lives in its own learner, which is the single point where rules are created.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..events import InstanceEvent, PredictionEvent
from ..instances import Instance, InstanceSchema
from ..topology import ContentEvent, Emitter, Processor, Stream, make_key, reply_key
from .rules import AmrConfig, Feature, Head, Rule, RuleReplica, RuleSet
from .sequential import LogEntry, promote_default, rules_digest

log = logging.getLogger(__name__)


# messages -----------------------------------------------------------------------


@dataclass(slots=True)
class Forward:
    seq: int
    rule_id: int
    instance: Instance
    reply: bytes


@dataclass(slots=True)
class Verdict:
    seq: int
    rule_id: int
    accepted: bool


@dataclass(slots=True)
class NewRule:
    rule: Rule


@dataclass(slots=True)
class RuleCreated:
    rule_id: int
    body: tuple
    head: Head


@dataclass(slots=True)
class RuleExpanded:
    rule_id: int
    feature: Feature
    head: Head


@dataclass(slots=True)
class RuleRemoved:
    rule_id: int


@dataclass(slots=True)
class HeadUpdate:
    rule_id: int
    head: Head


@dataclass(slots=True)
class Uncovered:
    seq: int
    instance: Instance
    predict: bool
    train: bool


# aggregator ---------------------------------------------------------------------


@dataclass
class _Pending:
    instance: Instance
    x: np.ndarray
    candidates: list[int]
    remaining: int
    accepted: bool = False
    position: int = 0


class RuleAggregator(Processor):
    """Routes instances to the learners of the covering rules and predicts with replicated heads."""

    def __init__(self, schema: InstanceSchema, config: AmrConfig, owns_default: bool):
        self.schema = schema
        self.config = config
        self.owns_default = owns_default
        default = Rule(-1, schema, config) if owns_default else None
        self.ruleset = RuleSet(default, config.ordered)
        self.next_id = 0
        self.pending: dict[int, _Pending] = {}
        self.log: list[LogEntry] = []
        self.forward_stream: Stream | None = None
        self.new_rule_stream: Stream | None = None
        self.uncovered_stream: Stream | None = None
        self.prediction_stream: Stream | None = None
        self.instances_seen = 0
        self.late_verdicts = 0
        self.unknown_updates = 0

    def on_create(self, instance_id: int, total_instances: int) -> None:
        super().on_create(instance_id, total_instances)
        self.reply = reply_key(instance_id, total_instances)

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        msg = event.payload
        kind = type(msg)
        if kind is InstanceEvent:
            self._on_instance(msg, emitter)
        elif kind is Verdict:
            self._on_verdict(msg, emitter)
        elif kind is RuleExpanded:
            replica = self.ruleset.get(msg.rule_id)
            if replica is None:
                self.unknown_updates += 1
                log.debug("expansion for unknown rule %d", msg.rule_id)
                return
            replica.add_feature(msg.feature)
            replica.head = msg.head
            self.ruleset.invalidate()
            self.log.append(("expand", msg.rule_id, msg.feature))
        elif kind is RuleRemoved:
            if self.ruleset.remove(msg.rule_id) is not None:
                self.log.append(("evict", msg.rule_id))
        elif kind is HeadUpdate:
            replica = self.ruleset.get(msg.rule_id)
            if replica is not None:
                replica.head = msg.head
        elif kind is RuleCreated:
            if self.ruleset.get(msg.rule_id) is None and msg.rule_id >= self.next_id:
                self.ruleset.add(RuleReplica(msg.rule_id, self.schema, msg.body, msg.head))
                self.next_id = msg.rule_id + 1
                self.log.append(("create", msg.rule_id, msg.body))
        else:
            raise TypeError(f"rule aggregator cannot handle {kind.__name__}")

    def _on_instance(self, ev: InstanceEvent, emitter: Emitter) -> None:
        self.instances_seen += 1
        inst = ev.instance
        x = inst.dense()
        y = inst.label
        cover = self.ruleset.covering(x)
        if cover:
            if self.config.ordered:
                pred = cover[0].predict(x)
            else:
                pred = float(np.mean([r.predict(x) for r in cover]))
            emitter.emit(self.prediction_stream, PredictionEvent(ev.seq, y, pred, inst.weight))
        elif self.owns_default:
            emitter.emit(self.prediction_stream, PredictionEvent(ev.seq, y, self.ruleset.default.predict(x), inst.weight))
        if not cover:
            if self.owns_default:
                if y is not None:
                    self._train_default(x, float(y), emitter)
            else:
                emitter.emit(self.uncovered_stream, Uncovered(ev.seq, inst, True, y is not None))
            return
        if y is None:
            return
        ids = [r.id for r in cover]
        if self.config.ordered:
            self.pending[ev.seq] = _Pending(inst, x, ids, 1)
            self._forward(ev.seq, ids[0], inst, emitter)
        else:
            self.pending[ev.seq] = _Pending(inst, x, ids, len(ids))
            for rid in ids:
                self._forward(ev.seq, rid, inst, emitter)

    def _forward(self, seq: int, rule_id: int, inst: Instance, emitter: Emitter) -> None:
        emitter.emit(self.forward_stream, Forward(seq, rule_id, inst, self.reply), make_key(rule_id))

    def _on_verdict(self, verdict: Verdict, emitter: Emitter) -> None:
        p = self.pending.get(verdict.seq)
        if p is None:
            self.late_verdicts += 1
            return
        if verdict.accepted:
            p.accepted = True
        if self.config.ordered:
            if p.accepted:
                del self.pending[verdict.seq]
                return
            p.position += 1
            if p.position < len(p.candidates):
                self._forward(verdict.seq, p.candidates[p.position], p.instance, emitter)
                return
        else:
            p.remaining -= 1
            if p.remaining > 0:
                return
        del self.pending[verdict.seq]
        if not p.accepted:
            if self.owns_default:
                self._train_default(p.x, float(p.instance.label), emitter)
            else:
                emitter.emit(self.uncovered_stream, Uncovered(verdict.seq, p.instance, False, True))

    def _train_default(self, x: np.ndarray, y: float, emitter: Emitter) -> None:
        exp = self.ruleset.default.train(x, y)
        if exp is None:
            return
        rule, fresh = promote_default(self.ruleset.default, exp, self.next_id, self.schema, self.config)
        self.next_id += 1
        self.ruleset.default = fresh
        self.ruleset.add(rule.replica())
        self.log.append(("create", rule.id, rule.body))
        emitter.emit(self.new_rule_stream, NewRule(rule), make_key(rule.id))

    def rule_ids(self) -> list[int]:
        return self.ruleset.ids()

    def digest(self) -> str:
        return rules_digest(self.log)


# learners -----------------------------------------------------------------------


class RuleLearner(Processor):
    """Owns the statistics of the rules keyed to it; expands and evicts them."""

    def __init__(self, config: AmrConfig):
        self.config = config
        self.rules: dict[int, Rule] = {}
        self.verdict_stream: Stream | None = None
        self.update_stream: Stream | None = None
        self.dropped = 0  # forwards for evicted rules or no longer covered instances
        self.anomalies = 0

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        msg = event.payload
        if type(msg) is Forward:
            accepted = self._learn(msg, emitter)
            emitter.emit(self.verdict_stream, Verdict(msg.seq, msg.rule_id, accepted), msg.reply)
        elif type(msg) is NewRule:
            self.rules.setdefault(msg.rule.id, msg.rule)
        else:
            raise TypeError(f"rule learner cannot handle {type(msg).__name__}")

    def _learn(self, fwd: Forward, emitter: Emitter) -> bool:
        rule = self.rules.get(fwd.rule_id)
        x = fwd.instance.dense()
        if rule is None or not rule.covers(x):
            self.dropped += 1
            return False
        if rule.is_anomaly(x):
            self.anomalies += 1
            return False
        y = float(fwd.instance.label)
        if rule.drifted(x, y):
            del self.rules[rule.id]
            emitter.emit(self.update_stream, RuleRemoved(rule.id))
            return True
        exp = rule.train(x, y)
        if exp is not None:
            rule.expand(exp)
            emitter.emit(self.update_stream, RuleExpanded(rule.id, exp.feature, rule.head.snapshot()))
        elif rule.updates % self.config.head_refresh == 0:
            emitter.emit(self.update_stream, HeadUpdate(rule.id, rule.head.snapshot()))
        return True


class DefaultRuleLearner(Processor):
    """Hybrid variant: trains the default rule, predicts uncovered instances, and creates rules."""

    def __init__(self, schema: InstanceSchema, config: AmrConfig):
        self.schema = schema
        self.config = config
        self.default = Rule(-1, schema, config)
        self.next_id = 0
        self.new_rule_stream: Stream | None = None  # to learners, keyed by rule id
        self.announce_stream: Stream | None = None  # to every aggregator
        self.prediction_stream: Stream | None = None
        self.log: list[LogEntry] = []

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        msg = event.payload
        inst = msg.instance
        x = inst.dense()
        if msg.predict:
            emitter.emit(self.prediction_stream, PredictionEvent(msg.seq, inst.label, self.default.predict(x), inst.weight))
        if not msg.train:
            return
        exp = self.default.train(x, float(inst.label))
        if exp is None:
            return
        rule, fresh = promote_default(self.default, exp, self.next_id, self.schema, self.config)
        self.next_id += 1
        self.default = fresh
        self.log.append(("create", rule.id, rule.body))
        emitter.emit(self.announce_stream, RuleCreated(rule.id, rule.body, rule.head.snapshot()))
        emitter.emit(self.new_rule_stream, NewRule(rule), make_key(rule.id))
