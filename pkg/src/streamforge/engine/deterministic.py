"""Single-threaded engine with one global FIFO queue.

A source emits one element, then the queue is drained to quiescence before
the next source (round-robin) is polled. Every feedback loop therefore
closes before the next instance enters the topology.

With ``lookahead > 0`` the queue is only drained down to that many events
between source polls, which reproducibly models the feedback delay of a
real deployment without giving up determinism.
"""

from __future__ import annotations

import time
from collections import deque

from ..topology import ContentEvent, SourceProcessor, Stream, Topology
from .core import EngineConfig, Router, RunReport, count_names, create_instances, group_instances, terminal_deliveries, terminal_event


class _Emitter:
    __slots__ = ("gid", "engine")

    def __init__(self, gid: int, engine: "DeterministicEngine"):
        self.gid = gid
        self.engine = engine

    def emit(self, stream: Stream, payload, key: bytes | None = None) -> None:
        self.engine.emit(self.gid, stream, payload, key)


class DeterministicEngine:
    def __init__(self, topology: Topology, config: EngineConfig):
        self.topology = topology
        self.config = config
        self.router = Router(topology, config.seed)
        self.queue: deque = deque()
        self.emitted: dict[int, int] = {}
        self.delivered: dict[int, int] = {}
        self.trace: list[tuple[int, int, int, int]] | None = [] if config.trace else None
        self._seq: dict[tuple[int, int, int], int] = {}

    def emit(self, gid: int, stream: Stream, payload, key: bytes | None) -> None:
        router = self.router
        router.check_emit(gid, stream)
        sid = stream.id
        self.emitted[sid] = self.emitted.get(sid, 0) + 1
        event = ContentEvent(payload, key, False, sid)
        tracing = self.trace is not None
        for dest in router.targets(gid, sid, key):
            seq = 0
            if tracing:
                ch = (gid, sid, dest)
                seq = self._seq.get(ch, 0)
                self._seq[ch] = seq + 1
            self.queue.append((dest, event, gid, seq))

    def _drain(self, keep: int = 0) -> None:
        queue = self.queue
        instances = self.instances
        emitters = self.emitters
        delivered = self.delivered
        trace = self.trace
        while len(queue) > keep:
            dest, event, src, seq = queue.popleft()
            sid = event.stream
            delivered[sid] = delivered.get(sid, 0) + 1
            if trace is not None:
                trace.append((src, sid, dest, seq))
            instances[dest].process(event, emitters[dest])

    def run(self) -> RunReport:
        topo = self.topology
        router = self.router
        self.instances = create_instances(topo, router=router)
        self.emitters = {gid: _Emitter(gid, self) for gid in self.instances}
        sources = [router.gid(i, 0) for i in topo.sources()]
        live = list(sources)
        limit = self.config.max_instances
        keep = self.config.lookahead
        pulled = 0
        start = time.perf_counter()
        while live:
            for gid in list(live):
                src = self.instances[gid]
                assert isinstance(src, SourceProcessor)
                if (limit is not None and pulled >= limit) or not src.next(self.emitters[gid]):
                    live.remove(gid)
                else:
                    pulled += 1
                self._drain(keep)
        self._drain()
        for proc in topo.terminal_order():
            for sid in terminal_deliveries(topo, proc):
                for k in range(topo.processors[proc].parallelism):
                    gid = router.gid(proc, k)
                    self.instances[gid].process(terminal_event(sid), self.emitters[gid])
                    self._drain()
        wall = time.perf_counter() - start
        return RunReport(
            count_names(topo, self.emitted),
            count_names(topo, self.delivered),
            wall,
            pulled,
            group_instances(topo, router, self.instances),
            self.trace,
        )
