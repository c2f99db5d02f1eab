"""Multi-process engine.

Processor instances are spread round-robin over worker processes. Events
between workers travel through bounded ``multiprocessing`` queues in small
chunks, so per (emitter, stream, destination) FIFO order holds. Sources are
throttled while their worker has a backlog of ``queue_capacity`` undelivered
events, or while more than ``workers * queue_capacity`` events are in flight
across the engine, which bounds the feedback delay of cyclic topologies; internal emitters park overflow in a local outbox instead of
blocking, which keeps feedback cycles (model <-> statistics) deadlock free.

Completion is detected by quiescence: all sources exhausted, every worker
idle, and the global sent/received counters equal across two polls.
"""

from __future__ import annotations

import multiprocessing as mp
import queue as queue_mod
import time
import traceback
from collections import deque

from ..topology import ContentEvent, SourceProcessor, Stream, Topology
from .core import (
    EngineConfig,
    EngineDeadlock,
    EngineError,
    Router,
    RunReport,
    count_names,
    create_instances,
    group_instances,
    merge_counts,
    terminal_deliveries,
    terminal_event,
)

CHUNK = 64
SOURCE_BURST = 32
# status slots per worker
_EPOCH, _SENT, _RECV, _IDLE, _CTL, _SRC_DONE, _PULLED, _BACKLOG = range(8)
_SLOTS = 8


class _Emitter:
    __slots__ = ("gid", "worker")

    def __init__(self, gid: int, worker: "_Worker"):
        self.gid = gid
        self.worker = worker

    def emit(self, stream: Stream, payload, key: bytes | None = None) -> None:
        self.worker.emit(self.gid, stream, payload, key)


class _Worker:
    def __init__(self, wid, topology, config, placement, inboxes, control, results, status):
        self.wid = wid
        self.topology = topology
        self.config = config
        self.router = Router(topology, config.seed)
        self.placement = placement
        self.inboxes = inboxes
        self.control = control
        self.results = results
        self.status = status
        self.base = wid * _SLOTS
        self.local: deque = deque()
        self.outbox: dict[int, list] = {w: [] for w in range(len(inboxes)) if w != wid}
        self.backlog = 0
        self.emitted: dict[int, int] = {}
        self.delivered: dict[int, int] = {}
        self.trace: list | None = [] if config.trace else None
        self._seq: dict[tuple[int, int, int], int] = {}
        self.sent = 0
        self.recv = 0
        self.epoch = 0

    def emit(self, gid: int, stream: Stream, payload, key) -> None:
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
            w = self.placement[dest]
            item = (dest, event, gid, seq)
            if w == self.wid:
                self.local.append(item)
            else:
                self.outbox[w].append(item)
                self.backlog += 1

    def flush(self, partial: bool = True) -> None:
        for w, items in self.outbox.items():
            while items and (partial or len(items) >= CHUNK):
                chunk = items[:CHUNK]
                try:
                    self.inboxes[w].put_nowait(chunk)
                except queue_mod.Full:
                    break
                del items[: len(chunk)]
                self.sent += len(chunk)
                self.backlog -= len(chunk)

    def receive(self, block: bool) -> bool:
        inbox = self.inboxes[self.wid]
        got = False
        try:
            chunk = inbox.get(timeout=0.002) if block else inbox.get_nowait()
        except queue_mod.Empty:
            return False
        while True:
            self.local.extend(chunk)
            self.recv += len(chunk)
            got = True
            if len(self.local) > self.config.queue_capacity:
                break
            try:
                chunk = inbox.get_nowait()
            except queue_mod.Empty:
                break
        return got

    def in_flight(self) -> int:
        """Events queued anywhere in the engine, as last published by every worker."""
        s = self.status
        total = 0
        for b in range(0, len(s), _SLOTS):
            total += s[b + _BACKLOG] + s[b + _SENT] - s[b + _RECV]
        s_own = self.base
        return total - s[s_own + _BACKLOG] + self.backlog + len(self.local)

    def publish(self, idle: bool, sources_done: bool, pulled: int) -> None:
        s, b = self.status, self.base
        s[b + _SENT] = self.sent
        s[b + _RECV] = self.recv
        s[b + _IDLE] = 1 if idle else 0
        s[b + _SRC_DONE] = 1 if sources_done else 0
        s[b + _PULLED] = pulled
        s[b + _BACKLOG] = self.backlog + len(self.local)
        s[b + _EPOCH] = self.epoch

    def run(self) -> None:
        topo = self.topology
        router = self.router
        mine = [g for g, w in enumerate(self.placement) if w == self.wid]
        instances = create_instances(topo, mine, router)
        emitters = {g: _Emitter(g, self) for g in mine}
        sources = [g for g in mine if isinstance(instances[g], SourceProcessor)]
        limit = self.config.max_instances
        capacity = self.config.queue_capacity
        budget = capacity * len(self.inboxes)
        pulled = 0
        delivered = self.delivered
        trace = self.trace
        local = self.local
        self.publish(False, not sources, 0)
        while True:
            try:
                msg = self.control.get_nowait()
            except queue_mod.Empty:
                msg = None
            if msg is not None:
                kind, seq, arg = msg
                if kind == "terminal":
                    for sid in terminal_deliveries(topo, arg):
                        for k in range(topo.processors[arg].parallelism):
                            g = router.gid(arg, k)
                            if g in instances:
                                local.append((g, terminal_event(sid), -1, 0))
                elif kind == "finish":
                    self.results.put(
                        ("done", self.wid, instances, self.emitted, self.delivered, self.trace)
                    )
                    return
                self.epoch += 1
                self.status[self.base + _CTL] = seq
            self.receive(block=False)
            n = min(len(local), 256)
            for _ in range(n):
                dest, event, src, seq = local.popleft()
                sid = event.stream
                if src >= 0:
                    delivered[sid] = delivered.get(sid, 0) + 1
                    if trace is not None:
                        trace.append((src, sid, dest, seq))
                instances[dest].process(event, emitters[dest])
            if n:
                self.epoch += 1
            if sources and self.backlog < capacity and len(local) < capacity and self.in_flight() < budget:
                for _ in range(SOURCE_BURST):
                    for g in list(sources):
                        if (limit is not None and pulled >= limit) or not instances[g].next(emitters[g]):
                            sources.remove(g)
                        else:
                            pulled += 1
                    if not sources or self.backlog >= capacity or len(local) >= capacity:
                        break
                self.epoch += 1
            self.flush(partial=not local)
            idle = not local and self.backlog == 0 and not sources
            self.publish(idle, not sources, pulled)
            if not local and (self.backlog or not sources):
                self.receive(block=True)


def _worker_main(wid, topology, config, placement, inboxes, control, results, status):
    try:
        _Worker(wid, topology, config, placement, inboxes, control, results, status).run()
    except BaseException:  # noqa: BLE001 - reported to the coordinator
        results.put(("error", wid, traceback.format_exc()))


class ParallelEngine:
    def __init__(self, topology: Topology, config: EngineConfig):
        self.topology = topology
        self.config = config
        self.router = Router(topology, config.seed)

    def placement(self, workers: int) -> list[int]:
        return [g % workers for g in range(self.router.total)]

    def run(self) -> RunReport:
        ctx = mp.get_context("fork")
        topo, config = self.topology, self.config
        workers = max(1, min(config.effective_workers, self.router.total))
        placement = self.placement(workers)
        chunks = max(2, -(-config.queue_capacity // CHUNK))
        inboxes = [ctx.Queue(maxsize=chunks) for _ in range(workers)]
        control = [ctx.Queue() for _ in range(workers)]
        results = ctx.Queue()
        status = ctx.Array("q", workers * _SLOTS, lock=False)
        procs = [
            ctx.Process(
                target=_worker_main,
                args=(w, topo, config, placement, inboxes, control[w], results, status),
                daemon=True,
            )
            for w in range(workers)
        ]
        start = time.perf_counter()
        for p in procs:
            p.start()
        try:
            self._await_quiescence(status, workers, results, procs)
            ctl_seq = 0
            for proc in topo.terminal_order():
                ctl_seq += 1
                for c in control:
                    c.put(("terminal", ctl_seq, proc))
                self._await_quiescence(status, workers, results, procs, ctl_seq)
            wall = time.perf_counter() - start
            for c in control:
                c.put(("finish", ctl_seq + 1, None))
            instances: dict = {}
            emitted: dict[int, int] = {}
            delivered: dict[int, int] = {}
            trace: list | None = [] if config.trace else None
            for _ in range(workers):
                msg = self._get_result(results, procs)
                _, wid, inst, em, dl, tr = msg
                instances.update(inst)
                merge_counts(emitted, em)
                merge_counts(delivered, dl)
                if trace is not None:
                    trace.extend(tr)
            pulled = sum(status[w * _SLOTS + _PULLED] for w in range(workers))
            for p in procs:
                p.join(timeout=10)
        finally:
            for p in procs:
                if p.is_alive():
                    p.terminate()
            for q in inboxes + control + [results]:
                q.cancel_join_thread()
        return RunReport(
            count_names(topo, emitted),
            count_names(topo, delivered),
            wall,
            pulled,
            group_instances(topo, self.router, instances),
            trace,
        )

    def _get_result(self, results, procs):
        deadline = time.monotonic() + self.config.stall_timeout
        while True:
            try:
                msg = results.get(timeout=0.5)
            except queue_mod.Empty:
                if time.monotonic() > deadline:
                    raise EngineError("timed out collecting worker results") from None
                continue
            if msg[0] == "error":
                raise EngineError(f"worker {msg[1]} failed:\n{msg[2]}")
            return msg

    def _check_errors(self, results, procs):
        try:
            msg = results.get_nowait()
        except queue_mod.Empty:
            msg = None
        if msg is not None and msg[0] == "error":
            raise EngineError(f"worker {msg[1]} failed:\n{msg[2]}")
        for p in procs:
            if p.exitcode not in (None, 0):
                raise EngineError(f"worker process exited with code {p.exitcode}")

    def _await_quiescence(self, status, workers, results, procs, ctl_seq: int = 0) -> None:
        def snapshot():
            return [tuple(status[w * _SLOTS : (w + 1) * _SLOTS]) for w in range(workers)]

        def settled(snap):
            return (
                all(s[_IDLE] and s[_SRC_DONE] and s[_CTL] >= ctl_seq for s in snap)
                and sum(s[_SENT] for s in snap) == sum(s[_RECV] for s in snap)
            )

        last_progress = time.monotonic()
        last_epochs = None
        while True:
            self._check_errors(results, procs)
            snap = snapshot()
            epochs = [s[_EPOCH] for s in snap]
            if epochs != last_epochs:
                last_epochs = epochs
                last_progress = time.monotonic()
            if settled(snap):
                time.sleep(0.002)
                again = snapshot()
                if settled(again) and [s[_EPOCH] for s in again] == epochs:
                    return
            elif time.monotonic() - last_progress > self.config.stall_timeout:
                detail = ", ".join(f"worker {w}: backlog {s[_BACKLOG]}" for w, s in enumerate(snap))
                raise EngineDeadlock(f"no progress for {self.config.stall_timeout:.0f}s; queues: {detail}")
            time.sleep(0.005)
