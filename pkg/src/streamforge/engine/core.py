from __future__ import annotations

import enum
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

from ..topology import ContentEvent, Grouping, Processor, RoutingError, SourceProcessor, Stream, Topology, TopologyError, key_partition

WORKERS_ENV = "STREAMFORGE_WORKERS"


class EngineError(RuntimeError):
    pass


class EngineDeadlock(EngineError):
    pass


class Mode(enum.Enum):
    DETERMINISTIC = "det"
    PARALLEL = "par"


@dataclass
class EngineConfig:
    mode: Mode = Mode.DETERMINISTIC
    workers: int = 1
    queue_capacity: int = 1024
    seed: int = 0
    trace: bool = False
    max_instances: int | None = None
    stall_timeout: float = 120.0
    # deterministic mode: sources are polled again once at most this many
    # events are queued; 0 drains to quiescence after every source element
    lookahead: int = 0

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")

    @property
    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            n = int(env)
            if n < 1:
                raise ValueError(f"{WORKERS_ENV} must be >= 1")
            return n
        return self.workers


@dataclass
class RunReport:
    events_emitted: dict[str, int]
    events_delivered: dict[str, int]
    wall_clock: float
    source_instances: int
    processors: dict[str, list[Processor]] = field(repr=False, default_factory=dict)
    trace: list[tuple[int, int, int, int]] | None = field(repr=False, default=None)

    @property
    def throughput(self) -> float:
        return self.source_instances / self.wall_clock if self.wall_clock > 0 else float("inf")

    CSV_HEADER = "source_instances,events_delivered,wall_clock,throughput"

    def to_csv_line(self) -> str:
        return f"{self.source_instances},{sum(self.events_delivered.values())},{self.wall_clock:.6f},{self.throughput:.3f}"

    def instances(self, name: str) -> list[Processor]:
        return self.processors[name]

    def instance(self, name: str, i: int = 0) -> Processor:
        return self.processors[name][i]


class Router:
    """Maps an emission to destination instance ids according to the groupings."""

    def __init__(self, topology: Topology, seed: int = 0):
        self.topology = topology
        self.base: list[int] = []
        total = 0
        for p in topology.processors:
            self.base.append(total)
            total += p.parallelism
        self.total = total
        self.owner = [i for i, p in enumerate(topology.processors) for _ in range(p.parallelism)]
        self.routes = [
            [(c.processor, c.grouping, topology.processors[c.processor].parallelism, self.base[c.processor]) for c in conns]
            for conns in topology.connections
        ]
        self.seed = seed
        self._rr: dict[tuple[int, int, int], int] = {}

    def gid(self, processor: int, instance: int) -> int:
        return self.base[processor] + instance

    def local_index(self, gid: int) -> int:
        return gid - self.base[self.owner[gid]]

    def check_emit(self, emitter_gid: int, stream: Stream) -> None:
        if self.topology.streams[stream.id].source != self.owner[emitter_gid]:
            raise TopologyError(f"processor {self.owner[emitter_gid]} cannot emit on stream {stream.name!r}")

    def targets(self, emitter_gid: int, stream_id: int, key: bytes | None) -> list[int]:
        out: list[int] = []
        for proc, grouping, par, base in self.routes[stream_id]:
            if grouping is Grouping.SHUFFLE:
                slot = (emitter_gid, stream_id, proc)
                n = self._rr.get(slot)
                if n is None:
                    n = (self.seed + emitter_gid) % par
                out.append(base + n % par)
                self._rr[slot] = n + 1
            elif grouping is Grouping.KEY:
                if key is None:
                    raise RoutingError(f"key-grouped stream {self.topology.streams[stream_id].name!r} got a keyless event")
                out.append(base + key_partition(key, par))
            else:
                out.extend(range(base, base + par))
        return out

    def fanout(self, stream_id: int) -> int:
        return sum(par if g is Grouping.ALL else 1 for _, g, par, _ in self.routes[stream_id])


def create_instances(topology: Topology, gids: list[int] | None = None, router: Router | None = None) -> dict[int, Processor]:
    router = router or Router(topology)
    out: dict[int, Processor] = {}
    for gid in gids if gids is not None else range(router.total):
        p = router.owner[gid]
        entry = topology.processors[p]
        inst = entry.prototype.clone()
        inst.on_create(router.local_index(gid), entry.parallelism)
        out[gid] = inst
    return out


def group_instances(topology: Topology, router: Router, instances: dict[int, Processor]) -> dict[str, list[Processor]]:
    grouped: dict[str, list[Processor]] = {}
    for i, entry in enumerate(topology.processors):
        grouped[entry.name] = [instances[router.gid(i, k)] for k in range(entry.parallelism)]
    return grouped


def terminal_event(stream_id: int) -> ContentEvent:
    return ContentEvent(None, None, True, stream_id)


def terminal_deliveries(topology: Topology, processor: int) -> list[int]:
    """Stream ids on which a terminal event is delivered to each instance of ``processor``."""
    ids = sorted({s.id for s, _ in topology.inputs_of(processor)})
    if not ids and not isinstance(topology.processors[processor].prototype, SourceProcessor):
        ids = [-1]
    return ids


def count_names(topology: Topology, counts: dict[int, int]) -> dict[str, int]:
    named: dict[str, int] = defaultdict(int)
    for s in topology.streams:
        named[s.name] += counts.get(s.id, 0)
    return dict(named)


def merge_counts(target: dict[Any, int], source: dict[Any, int]) -> None:
    for k, v in source.items():
        target[k] = target.get(k, 0) + v
