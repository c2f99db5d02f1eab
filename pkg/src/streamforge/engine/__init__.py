"""Local execution engines for topologies."""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

from ..topology import Topology
from .core import EngineConfig, EngineDeadlock, EngineError, Mode, Router, RunReport, WORKERS_ENV
from .deterministic import DeterministicEngine
from .parallel import ParallelEngine

__all__ = [
    "EngineConfig",
    "EngineDeadlock",
    "EngineError",
    "Mode",
    "Router",
    "RunReport",
    "WORKERS_ENV",
    "run",
    "sequence_check",
]


def run(topology: Topology, config: EngineConfig | None = None) -> RunReport:
    config = config or EngineConfig()
    if config.mode is Mode.DETERMINISTIC:
        return DeterministicEngine(topology, config).run()
    return ParallelEngine(topology, config).run()


def sequence_check(trace: Iterable[tuple[int, int, int, int]]) -> list[tuple[tuple[int, int, int], int, int]]:
    """Per-channel ordering violations in a delivery trace.

    ``trace`` holds ``(emitter, stream, destination, sequence)`` tuples in
    delivery order. A violation ``(channel, expected_after, got)`` is reported
    whenever a sequence number does not exceed the last one delivered on its
    channel.
    """
    last: dict[tuple[int, int, int], int] = defaultdict(lambda: -1)
    violations = []
    for emitter, stream, dest, seq in trace:
        ch = (emitter, stream, dest)
        if seq <= last[ch]:
            violations.append((ch, last[ch], seq))
        else:
            last[ch] = seq
    return violations
