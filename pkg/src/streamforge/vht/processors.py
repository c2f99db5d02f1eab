"""Processors of the distributed tree: model aggregator, local statistics, and the baselines."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..events import InstanceEvent, PredictionEvent
from ..instances import Instance, InstanceSchema
from ..topology import ContentEvent, Emitter, Processor, Stream, key_partition, make_key
from .hoeffding import Buffering, HoeffdingTree, TreeStats, VhtConfig
from .messages import AttributeBatch, Compute, Drop, LocalResult
from .observers import LocalStatisticsTable
from .tree import Leaf, Outcome, TreeModel, decide_split

log = logging.getLogger(__name__)


@dataclass
class _Pending:
    n: float  # leaf weight when the attempt started
    received: int = 0
    suggestions: list = field(default_factory=list)
    elapsed: int = 0
    buffer: list = field(default_factory=list)


class ModelAggregator(Processor):
    """Holds the tree, sorts instances, and drives the split protocol."""

    def __init__(self, schema: InstanceSchema, config: VhtConfig):
        self.schema = schema
        self.config = config
        self.n_classes = schema.n_classes
        self.tree = TreeModel(self.n_classes)
        self.pending: dict[int, _Pending] = {}
        self.history = TreeStats()
        self.attribute_stream: Stream | None = None
        self.control_stream: Stream | None = None
        self.prediction_stream: Stream | None = None
        self._groups: dict[int, list[tuple[bytes, np.ndarray | None]]] = {}
        self._owners: dict[int, np.ndarray] = {}
        self._sparse = False
        self.dropped = 0
        self.replayed = 0
        self.timeouts = 0
        self.late_results = 0
        self.attribute_events = 0

    # routing of attribute events ------------------------------------------------
    def _owner_of(self, leaf_id: int) -> np.ndarray:
        owners = self._owners.get(leaf_id)
        if owners is None:
            p = self.config.parallelism
            owners = np.fromiter(
                (key_partition(make_key(leaf_id, a), p) for a in range(self.schema.n_attributes)),
                dtype=np.int64,
                count=self.schema.n_attributes,
            )
            self._owners[leaf_id] = owners
        return owners

    def _dense_groups(self, leaf_id: int) -> list[tuple[bytes, np.ndarray | None]]:
        groups = self._groups.get(leaf_id)
        if groups is None:
            m = self.schema.n_attributes
            if self.config.parallelism == 1:
                groups = [(make_key(leaf_id, 0), None)]
            else:
                owners = self._owner_of(leaf_id)
                groups = []
                for q in range(self.config.parallelism):
                    idx = np.flatnonzero(owners == q)
                    if idx.size:
                        groups.append((make_key(leaf_id, int(idx[0])), idx))
                self._owners.pop(leaf_id, None)
            if m == 0:
                groups = []
            self._groups[leaf_id] = groups
        return groups

    def _send(self, leaf: Leaf, inst: Instance, x: np.ndarray, emitter: Emitter) -> None:
        label, weight = int(inst.label), inst.weight
        stream = self.attribute_stream
        if inst.indices is None:
            for key, idx in self._dense_groups(leaf.id):
                if idx is None:
                    emitter.emit(stream, AttributeBatch(leaf.id, None, x, label, weight), key)
                    self.attribute_events += len(x)
                else:
                    emitter.emit(stream, AttributeBatch(leaf.id, idx, x[idx], label, weight), key)
                    self.attribute_events += len(idx)
            return
        ids, vals = inst.indices, inst.values
        if ids.size == 0:
            return
        if self.config.parallelism == 1:
            emitter.emit(stream, AttributeBatch(leaf.id, ids, vals, label, weight, True), make_key(leaf.id, int(ids[0])))
        else:
            owners = self._owner_of(leaf.id)[ids]
            for q in np.unique(owners):
                m = owners == q
                sub = ids[m]
                emitter.emit(stream, AttributeBatch(leaf.id, sub, vals[m], label, weight, True), make_key(leaf.id, int(sub[0])))
        self.attribute_events += int(ids.size)

    # event handling -------------------------------------------------------------
    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        payload = event.payload
        if type(payload) is InstanceEvent:
            self._on_instance(payload, emitter)
        elif type(payload) is LocalResult:
            self._on_result(payload, emitter)
        else:
            raise TypeError(f"model aggregator cannot handle {type(payload).__name__}")

    def _on_instance(self, ev: InstanceEvent, emitter: Emitter) -> None:
        inst = ev.instance
        x = inst.dense()
        leaf = self.tree.sort(x)
        emitter.emit(self.prediction_stream, PredictionEvent(ev.seq, inst.label, leaf.prediction(), inst.weight))
        if inst.label is not None:
            self._train(leaf, inst, x, emitter)
        if self.pending:
            self._tick(emitter)

    def _train(self, leaf: Leaf, inst: Instance, x: np.ndarray, emitter: Emitter) -> None:
        state = self.pending.get(leaf.id) if leaf.splitting else None
        if state is not None and self.config.buffering == Buffering.WOK:
            self.dropped += 1
            return
        if inst.indices is not None:
            self._sparse = True
        self._send(leaf, inst, x, emitter)
        label = int(inst.label)
        leaf.n_seen += 1
        leaf.class_dist[label] += inst.weight
        leaf.seen[label] += inst.weight
        if state is not None:
            z = self.config.buffer_size
            if z is None or len(state.buffer) < z:
                state.buffer.append(inst)
            return
        if leaf.n_seen % self.config.grace_period == 0 and not leaf.is_pure():
            leaf.splitting = True
            leaf.frozen = leaf.class_dist.copy()
            self.pending[leaf.id] = _Pending(leaf.weight)
            totals = leaf.seen.copy() if self._sparse else None
            emitter.emit(self.control_stream, Compute(leaf.id, totals))

    def _tick(self, emitter: Emitter) -> None:
        limit = self.config.timeout
        for leaf_id, state in list(self.pending.items()):
            state.elapsed += 1
            if state.elapsed >= limit:
                self.timeouts += 1
                self._resolve(leaf_id, emitter)

    def _on_result(self, result: LocalResult, emitter: Emitter) -> None:
        state = self.pending.get(result.leaf_id)
        if state is None:
            self.late_results += 1
            log.debug("ignoring local result for resolved leaf %d", result.leaf_id)
            return
        state.received += 1
        if result.best is not None:
            state.suggestions.append((result.best.merit, result.best.attribute, result.best))
        if result.second is not None:
            state.suggestions.append((result.second[0], result.second[1], None))
        if state.received >= self.config.parallelism:
            self._resolve(result.leaf_id, emitter)

    def _resolve(self, leaf_id: int, emitter: Emitter) -> None:
        state = self.pending.pop(leaf_id)
        leaf = self.tree.leaves[leaf_id]
        cfg = self.config
        decision = decide_split(leaf_id, state.suggestions, state.n, self.n_classes, cfg.delta, cfg.tau)
        self.history.decisions.append(decision)
        leaf.splitting = False
        leaf.frozen = None
        if decision.outcome is not Outcome.SPLIT:
            return
        self.tree.split(leaf, decision.best)
        self._groups.pop(leaf_id, None)
        self._owners.pop(leaf_id, None)
        emitter.emit(self.control_stream, Drop(leaf_id))
        for inst in state.buffer:
            x = inst.dense()
            self._train(self.tree.sort(x), inst, x, emitter)
        self.replayed += len(state.buffer)

    def digest(self) -> str:
        return self.tree.digest()


class LocalStatistics(Processor):
    """Keeps the observers of its attribute partition and answers compute requests."""

    def __init__(self, schema: InstanceSchema):
        self.schema = schema
        self.table = LocalStatisticsTable(schema.categorical_mask, schema.value_counts, schema.n_classes)
        self.result_stream: Stream | None = None
        self._all_ids = np.arange(schema.n_attributes)

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        msg = event.payload
        kind = type(msg)
        if kind is AttributeBatch:
            if msg.sparse:
                self.table.update_sparse(msg.leaf_id, msg.ids, msg.values, msg.label, msg.weight)
            else:
                ids = self._all_ids if msg.ids is None else msg.ids
                self.table.update(msg.leaf_id, ids, msg.values, msg.label, msg.weight)
        elif kind is Compute:
            row = self.table.leaf(msg.leaf_id)
            best = second = None
            if row is not None:
                if msg.class_totals is not None:
                    row.fill_zeros(msg.class_totals)
                best, second = row.top_two()
            emitter.emit(self.result_stream, LocalResult(msg.leaf_id, best, second, self.instance_id))
        elif kind is Drop:
            self.table.drop(msg.leaf_id)
        else:
            raise TypeError(f"local statistics cannot handle {kind.__name__}")


class LocalTreeLearner(Processor):
    """Sequential tree inside one processor: no feedback delay at all."""

    def __init__(self, schema: InstanceSchema, config: VhtConfig):
        self.model = HoeffdingTree(schema, config)
        self.prediction_stream: Stream | None = None

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        ev = event.payload
        inst = ev.instance
        label = None if inst.label is None else int(inst.label)
        pred = self.model.predict_learn(inst.dense(), label, inst.weight)
        emitter.emit(self.prediction_stream, PredictionEvent(ev.seq, inst.label, pred, inst.weight))

    def digest(self) -> str:
        return self.model.digest()


@dataclass(slots=True)
class Vote:
    seq: int
    truth: int | None
    prediction: int
    weight: float


class ShardLearner(Processor):
    """One tree of the horizontal ensemble; trains on every p-th instance."""

    def __init__(self, schema: InstanceSchema, config: VhtConfig):
        self.model = HoeffdingTree(schema, config)
        self.vote_stream: Stream | None = None

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        ev = event.payload
        inst = ev.instance
        x = inst.dense()
        mine = ev.seq % self.total_instances == self.instance_id
        label = None if inst.label is None or not mine else int(inst.label)
        pred = self.model.predict_learn(x, label, inst.weight)
        emitter.emit(self.vote_stream, Vote(ev.seq, inst.label, pred, inst.weight))


class VoteCombiner(Processor):
    """Majority vote over all shards; ties go to the lowest class index."""

    def __init__(self, n_classes: int, shards: int):
        self.n_classes = n_classes
        self.shards = shards
        self.pending: dict[int, list[int]] = {}
        self.prediction_stream: Stream | None = None

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        if event.terminal:
            return
        vote = event.payload
        votes = self.pending.setdefault(vote.seq, [])
        votes.append(vote.prediction)
        if len(votes) == self.shards:
            del self.pending[vote.seq]
            winner = majority(votes, self.n_classes)
            emitter.emit(self.prediction_stream, PredictionEvent(vote.seq, vote.truth, winner, vote.weight))


def majority(votes: list[int], n_classes: int) -> int:
    return int(np.bincount(votes, minlength=n_classes).argmax())
