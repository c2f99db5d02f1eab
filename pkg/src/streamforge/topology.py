"""Engine-independent programming model: processors, streams, groupings, topologies."""

from __future__ import annotations

import copy
import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol


class TopologyError(Exception):
    pass


class DuplicateProcessor(TopologyError):
    pass


class UnknownProcessor(TopologyError):
    pass


class RoutingError(TopologyError):
    """A key-grouped connection received an event without a key."""


class Grouping(enum.Enum):
    SHUFFLE = "shuffle"
    KEY = "key"
    ALL = "all"


def make_key(*parts: int) -> bytes:
    """Routing key from integers, e.g. ``make_key(leaf_id, attribute_id)``."""
    return struct.pack(f"<{len(parts)}q", *parts)


def stable_hash(key: bytes) -> int:
    """64-bit hash of a routing key, identical across processes and runs."""
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def key_partition(key: bytes, parallelism: int) -> int:
    return stable_hash(key) % parallelism


def reply_key(instance_id: int, parallelism: int) -> bytes:
    """Smallest integer key that key-groups onto ``instance_id``.

    Lets a processor instance hand out a return address usable on a
    key-grouped reply stream.
    """
    k = 0
    while key_partition(make_key(k), parallelism) != instance_id:
        k += 1
    return make_key(k)


@dataclass(slots=True)
class ContentEvent:
    payload: Any
    key: bytes | None = None
    terminal: bool = False
    stream: int = -1


class Emitter(Protocol):
    def emit(self, stream: "Stream", payload: Any, key: bytes | None = None) -> None: ...


class Processor:
    """Container for algorithm code.

    The engine clones the registered prototype once per parallel instance,
    calls ``on_create`` and then ``process`` serially for every event routed to
    that instance.
    """

    instance_id: int = 0
    total_instances: int = 1

    def on_create(self, instance_id: int, total_instances: int) -> None:
        self.instance_id = instance_id
        self.total_instances = total_instances

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        raise NotImplementedError

    def clone(self) -> "Processor":
        return copy.deepcopy(self)


class SourceProcessor(Processor):
    """Entry point of a topology; the engine pulls from it with ``next``."""

    def next(self, emitter: Emitter) -> bool:
        """Emit the next element; return False once exhausted."""
        raise NotImplementedError

    def process(self, event: ContentEvent, emitter: Emitter) -> None:
        pass


@dataclass(frozen=True)
class ProcessorHandle:
    index: int
    name: str


@dataclass(frozen=True)
class Stream:
    id: int
    name: str
    source: int  # processor index


@dataclass(frozen=True)
class Connection:
    processor: int
    grouping: Grouping


@dataclass(frozen=True)
class ProcessorEntry:
    name: str
    prototype: Processor
    parallelism: int


@dataclass(frozen=True)
class Topology:
    name: str
    processors: tuple[ProcessorEntry, ...]
    streams: tuple[Stream, ...]
    connections: tuple[tuple[Connection, ...], ...]  # indexed by stream id

    def processor_index(self, name: str) -> int:
        for i, p in enumerate(self.processors):
            if p.name == name:
                return i
        raise UnknownProcessor(name)

    def sources(self) -> list[int]:
        return [i for i, p in enumerate(self.processors) if isinstance(p.prototype, SourceProcessor)]

    def inputs_of(self, processor: int) -> list[tuple[Stream, Grouping]]:
        return [
            (s, c.grouping)
            for s in self.streams
            for c in self.connections[s.id]
            if c.processor == processor
        ]

    def successors(self, processor: int) -> set[int]:
        return {c.processor for s in self.streams if s.source == processor for c in self.connections[s.id]}

    def canonical(self) -> tuple:
        """Hashable description independent of registration order."""
        procs = sorted((p.name, p.parallelism, type(p.prototype).__qualname__) for p in self.processors)
        name = [p.name for p in self.processors]
        streams = sorted(
            (
                s.name,
                name[s.source],
                tuple(sorted((name[c.processor], c.grouping.value) for c in self.connections[s.id])),
            )
            for s in self.streams
        )
        return (tuple(procs), tuple(streams))

    def terminal_order(self) -> list[int]:
        """Processors in topological order of the strongly connected components.

        Cycles (feedback loops) are collapsed; members of one component keep
        their registration order.
        """
        n = len(self.processors)
        succ = [sorted(self.successors(i)) for i in range(n)]
        index = [0]
        idx = [-1] * n
        low = [0] * n
        on = [False] * n
        stack: list[int] = []
        comps: list[list[int]] = []

        def strong(v: int) -> None:
            idx[v] = low[v] = index[0]
            index[0] += 1
            stack.append(v)
            on[v] = True
            for w in succ[v]:
                if idx[w] < 0:
                    strong(w)
                    low[v] = min(low[v], low[w])
                elif on[w]:
                    low[v] = min(low[v], idx[w])
            if low[v] == idx[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))

        for v in range(n):
            if idx[v] < 0:
                strong(v)
        # Tarjan emits components in reverse topological order.
        return [v for comp in reversed(comps) for v in comp]


class TopologyBuilder:
    """Incrementally assembles a :class:`Topology`."""

    def __init__(self, name: str = "topology"):
        self.name = name
        self._processors: list[ProcessorEntry] = []
        self._streams: list[Stream] = []
        self._connections: list[list[Connection]] = []
        self._built = False

    def _check_open(self):
        if self._built:
            raise TopologyError("topology already built")

    def _check_handle(self, handle: ProcessorHandle) -> int:
        if not isinstance(handle, ProcessorHandle) or not 0 <= handle.index < len(self._processors):
            raise UnknownProcessor(f"unknown processor handle {handle!r}")
        if self._processors[handle.index].name != handle.name:
            raise UnknownProcessor(f"handle {handle!r} belongs to another builder")
        return handle.index

    def add_processor(self, processor: Processor, parallelism: int = 1, name: str | None = None) -> ProcessorHandle:
        self._check_open()
        if parallelism < 1:
            raise TopologyError("parallelism must be >= 1")
        if isinstance(processor, SourceProcessor) and parallelism != 1:
            raise TopologyError("source processors run with parallelism 1")
        if any(p.prototype is processor for p in self._processors):
            raise DuplicateProcessor(f"processor {processor!r} already registered")
        name = name or f"{type(processor).__name__}"
        if any(p.name == name for p in self._processors):
            raise DuplicateProcessor(f"processor name {name!r} already registered")
        self._processors.append(ProcessorEntry(name, processor, parallelism))
        return ProcessorHandle(len(self._processors) - 1, name)

    def create_stream(self, source: ProcessorHandle, name: str | None = None) -> Stream:
        self._check_open()
        idx = self._check_handle(source)
        sid = len(self._streams)
        stream = Stream(sid, name or f"{self._processors[idx].name}#{sid}", idx)
        self._streams.append(stream)
        self._connections.append([])
        return stream

    def connect_input(self, processor: ProcessorHandle, stream: Stream, grouping: Grouping) -> "TopologyBuilder":
        self._check_open()
        idx = self._check_handle(processor)
        if not isinstance(stream, Stream) or not 0 <= stream.id < len(self._streams) or self._streams[stream.id] != stream:
            raise TopologyError(f"unknown stream {stream!r}")
        self._connections[stream.id].append(Connection(idx, Grouping(grouping)))
        return self

    def connect_input_shuffle(self, processor: ProcessorHandle, stream: Stream) -> "TopologyBuilder":
        return self.connect_input(processor, stream, Grouping.SHUFFLE)

    def connect_input_key(self, processor: ProcessorHandle, stream: Stream) -> "TopologyBuilder":
        return self.connect_input(processor, stream, Grouping.KEY)

    def connect_input_all(self, processor: ProcessorHandle, stream: Stream) -> "TopologyBuilder":
        return self.connect_input(processor, stream, Grouping.ALL)

    def build(self) -> Topology:
        self._built = True
        return Topology(
            self.name,
            tuple(self._processors),
            tuple(self._streams),
            tuple(tuple(c) for c in self._connections),
        )


@dataclass
class Task:
    """A named, parameterised topology builder (e.g. prequential evaluation)."""

    name: str
    params: dict[str, Any] = field(default_factory=dict)
    assemble: Callable[..., Topology] | None = None

    def build(self) -> Topology:
        if self.assemble is None:
            raise NotImplementedError
        return self.assemble(**self.params)
