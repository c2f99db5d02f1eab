"""Wiring of the rule learners; each builder returns the prediction streams."""

from __future__ import annotations

from ..events import PredictionEvent
from ..instances import InstanceSchema
from ..topology import ContentEvent, Emitter, Processor, Stream, TopologyBuilder
from .processors import DefaultRuleLearner, RuleAggregator, RuleLearner
from .rules import AmrConfig
from .sequential import AMRules


class LocalRulesLearner(Processor):
    def __init__(self, schema: InstanceSchema, config: AmrConfig):
        self.model = AMRules(schema, config)
        self.prediction_stream: Stream | None = None

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        ev = event.payload
        inst = ev.instance
        y = None if inst.label is None else float(inst.label)
        pred = self.model.predict_learn(inst.dense(), y)
        emitter.emit(self.prediction_stream, PredictionEvent(ev.seq, inst.label, pred, inst.weight))

    def digest(self) -> str:
        return self.model.digest()


def build_local_rules(builder: TopologyBuilder, instances: Stream, schema: InstanceSchema, config: AmrConfig) -> list[Stream]:
    learner = LocalRulesLearner(schema, config)
    h = builder.add_processor(learner, 1, name="local-rules")
    learner.prediction_stream = builder.create_stream(h, "prediction")
    builder.connect_input_shuffle(h, instances)
    return [learner.prediction_stream]


def _learners(builder: TopologyBuilder, config: AmrConfig):
    learner = RuleLearner(config)
    h = builder.add_processor(learner, config.parallelism, name="rule-learner")
    learner.verdict_stream = builder.create_stream(h, "verdict")
    learner.update_stream = builder.create_stream(h, "rule-update")
    return learner, h


def build_vamr(builder: TopologyBuilder, instances: Stream, schema: InstanceSchema, config: AmrConfig) -> list[Stream]:
    ma = RuleAggregator(schema, config, owns_default=True)
    ma_h = builder.add_processor(ma, 1, name="model-aggregator")
    learner, l_h = _learners(builder, config)
    ma.forward_stream = builder.create_stream(ma_h, "forward")
    ma.new_rule_stream = builder.create_stream(ma_h, "new-rule")
    ma.prediction_stream = builder.create_stream(ma_h, "prediction")
    builder.connect_input_shuffle(ma_h, instances)
    builder.connect_input_key(l_h, ma.forward_stream)
    builder.connect_input_key(l_h, ma.new_rule_stream)
    builder.connect_input_key(ma_h, learner.verdict_stream)
    builder.connect_input_all(ma_h, learner.update_stream)
    return [ma.prediction_stream]


def build_hamr(builder: TopologyBuilder, instances: Stream, schema: InstanceSchema, config: AmrConfig) -> list[Stream]:
    ma = RuleAggregator(schema, config, owns_default=False)
    ma_h = builder.add_processor(ma, config.aggregators, name="model-aggregator")
    learner, l_h = _learners(builder, config)
    default = DefaultRuleLearner(schema, config)
    d_h = builder.add_processor(default, 1, name="default-rule-learner")
    ma.forward_stream = builder.create_stream(ma_h, "forward")
    ma.uncovered_stream = builder.create_stream(ma_h, "uncovered")
    ma.prediction_stream = builder.create_stream(ma_h, "prediction")
    default.new_rule_stream = builder.create_stream(d_h, "new-rule")
    default.announce_stream = builder.create_stream(d_h, "rule-created")
    default.prediction_stream = builder.create_stream(d_h, "default-prediction")
    builder.connect_input_shuffle(ma_h, instances)
    builder.connect_input_key(l_h, ma.forward_stream)
    builder.connect_input_shuffle(d_h, ma.uncovered_stream)
    builder.connect_input_key(l_h, default.new_rule_stream)
    builder.connect_input_all(ma_h, default.announce_stream)
    builder.connect_input_key(ma_h, learner.verdict_stream)
    builder.connect_input_all(ma_h, learner.update_stream)
    return [ma.prediction_stream, default.prediction_stream]
