"""Wiring of the tree learners into a topology.

Each ``build_*`` function attaches a learner to ``instances`` (a stream of
``InstanceEvent``) and returns the streams carrying ``PredictionEvent``.
"""

from __future__ import annotations

from ..instances import InstanceSchema
from ..topology import Stream, TopologyBuilder
from .hoeffding import VhtConfig
from .processors import LocalStatistics, LocalTreeLearner, ModelAggregator, ShardLearner, VoteCombiner


def build_vht(builder: TopologyBuilder, instances: Stream, schema: InstanceSchema, config: VhtConfig) -> list[Stream]:
    ma = ModelAggregator(schema, config)
    ls = LocalStatistics(schema)
    ma_h = builder.add_processor(ma, 1, name="model-aggregator")
    ls_h = builder.add_processor(ls, config.parallelism, name="local-statistics")
    ma.attribute_stream = builder.create_stream(ma_h, "attribute")
    ma.control_stream = builder.create_stream(ma_h, "control")
    ma.prediction_stream = builder.create_stream(ma_h, "prediction")
    ls.result_stream = builder.create_stream(ls_h, "local-result")
    builder.connect_input_shuffle(ma_h, instances)
    builder.connect_input_key(ls_h, ma.attribute_stream)
    builder.connect_input_all(ls_h, ma.control_stream)
    builder.connect_input_shuffle(ma_h, ls.result_stream)
    return [ma.prediction_stream]


def build_local_tree(builder: TopologyBuilder, instances: Stream, schema: InstanceSchema, config: VhtConfig) -> list[Stream]:
    learner = LocalTreeLearner(schema, config)
    h = builder.add_processor(learner, 1, name="local-tree")
    learner.prediction_stream = builder.create_stream(h, "prediction")
    builder.connect_input_shuffle(h, instances)
    return [learner.prediction_stream]


def build_sharding(builder: TopologyBuilder, instances: Stream, schema: InstanceSchema, config: VhtConfig) -> list[Stream]:
    shard = ShardLearner(schema, config)
    combiner = VoteCombiner(schema.n_classes, config.parallelism)
    shard_h = builder.add_processor(shard, config.parallelism, name="shard")
    comb_h = builder.add_processor(combiner, 1, name="vote-combiner")
    shard.vote_stream = builder.create_stream(shard_h, "vote")
    combiner.prediction_stream = builder.create_stream(comb_h, "prediction")
    builder.connect_input_all(shard_h, instances)
    builder.connect_input_shuffle(comb_h, shard.vote_stream)
    return [combiner.prediction_stream]
