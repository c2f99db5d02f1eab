"""Payloads shared by every learner topology: instances in, predictions out."""

from __future__ import annotations

from dataclasses import dataclass

from .instances import Instance, StreamSource
from .topology import Emitter, SourceProcessor, Stream


@dataclass(slots=True)
class InstanceEvent:
    seq: int
    instance: Instance


@dataclass(slots=True)
class PredictionEvent:
    seq: int
    truth: int | float | None
    prediction: int | float
    weight: float = 1.0


class SourceAdapter(SourceProcessor):
    """Feeds a ``StreamSource`` into a topology as numbered instance events."""

    def __init__(self, source: StreamSource, max_instances: int | None = None):
        self.source = source
        self.max_instances = max_instances
        self.output: Stream | None = None
        self.seq = 0

    def next(self, emitter: Emitter) -> bool:
        if self.max_instances is not None and self.seq >= self.max_instances:
            return False
        inst = self.source.next()
        if inst is None:
            return False
        emitter.emit(self.output, InstanceEvent(self.seq, inst))
        self.seq += 1
        return True
