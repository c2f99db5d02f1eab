"""Schemas, instances and stream sources, including ARFF ingestion."""

from __future__ import annotations

import csv
import gzip
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence, runtime_checkable

import numpy as np

#: Marker stored in dense value arrays for a missing ('?') attribute value.
MISSING = math.nan


class SchemaError(ValueError):
    pass


class ArffError(ValueError):
    """Malformed ARFF input; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    values: tuple[str, ...] | None = None  # None for numeric

    def __post_init__(self):
        if self.values is not None:
            if len(self.values) == 0:
                raise SchemaError(f"categorical attribute {self.name!r} has no values")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"categorical attribute {self.name!r} has duplicate values")

    @property
    def is_numeric(self) -> bool:
        return self.values is None

    @property
    def is_categorical(self) -> bool:
        return self.values is not None

    @classmethod
    def numeric(cls, name: str) -> "AttributeSpec":
        return cls(name)

    @classmethod
    def categorical(cls, name: str, values: Iterable[str]) -> "AttributeSpec":
        return cls(name, tuple(values))


@dataclass(frozen=True)
class ClassTarget:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise SchemaError("a class target needs at least two labels")
        if len(set(self.labels)) != len(self.labels):
            raise SchemaError("duplicate class labels")


@dataclass(frozen=True)
class NumericTarget:
    name: str
    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise SchemaError(f"numeric target range must satisfy min < max, got [{self.min}, {self.max}]")

    @property
    def range(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class InstanceSchema:
    attributes: tuple[AttributeSpec, ...]
    target: ClassTarget | NumericTarget
    relation: str = "stream"

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if not self.attributes:
            raise SchemaError("schema needs at least one attribute")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def is_classification(self) -> bool:
        return isinstance(self.target, ClassTarget)

    @property
    def n_classes(self) -> int:
        if not isinstance(self.target, ClassTarget):
            raise SchemaError("regression schema has no classes")
        return len(self.target.labels)

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([a.is_categorical for a in self.attributes], dtype=bool)

    @property
    def value_counts(self) -> np.ndarray:
        """Number of values of each categorical attribute (0 for numeric ones)."""
        return np.array([len(a.values) if a.values else 0 for a in self.attributes], dtype=np.int64)

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class Instance:
    """One stream element.

    Dense instances keep a float array (categorical values as value indices,
    ``MISSING`` for '?'). Sparse instances keep strictly increasing ``indices``
    with their ``values`` plus the full dimensionality in ``n_attributes``.
    """

    values: np.ndarray
    label: int | float | None = None
    weight: float = 1.0
    indices: np.ndarray | None = None
    n_attributes: int = field(default=-1)

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"instance weight must be non-negative, got {self.weight}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("instance values must be one-dimensional")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.indices is None:
            if self.n_attributes not in (-1, values.shape[0]):
                raise ValueError("n_attributes disagrees with dense length")
            object.__setattr__(self, "n_attributes", values.shape[0])
        else:
            indices = np.asarray(self.indices, dtype=np.int64)
            if indices.shape != values.shape:
                raise ValueError("sparse indices and values differ in length")
            if self.n_attributes < 0:
                raise ValueError("sparse instances need an explicit n_attributes")
            if indices.size:
                if np.any(np.diff(indices) <= 0):
                    raise ValueError("sparse indices must be strictly increasing")
                if indices[0] < 0 or indices[-1] >= self.n_attributes:
                    raise ValueError("sparse index out of range")
            indices.flags.writeable = False
            object.__setattr__(self, "indices", indices)

    @property
    def is_sparse(self) -> bool:
        return self.indices is not None

    @property
    def labeled(self) -> bool:
        return self.label is not None

    def dense(self) -> np.ndarray:
        if self.indices is None:
            return self.values
        out = np.zeros(self.n_attributes)
        out[self.indices] = self.values
        return out

    def value(self, attribute: int) -> float:
        if self.indices is None:
            return float(self.values[attribute])
        pos = np.searchsorted(self.indices, attribute)
        if pos < self.indices.size and self.indices[pos] == attribute:
            return float(self.values[pos])
        return 0.0

    def with_label(self, label) -> "Instance":
        return Instance(self.values, label, self.weight, self.indices, self.n_attributes)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.n_attributes == other.n_attributes
            and self.label == other.label
            and self.weight == other.weight
            and np.array_equal(self.dense(), other.dense(), equal_nan=True)
        )

    __hash__ = None  # type: ignore[assignment]


def to_sparse(instance: Instance, schema: InstanceSchema | None = None) -> Instance:
    """Sparse copy of a dense instance with zero-valued attributes dropped."""
    if instance.is_sparse:
        return instance
    values = instance.values
    keep = np.flatnonzero(values != 0.0)  # NaN != 0, so missing values are kept
    n = schema.n_attributes if schema is not None else values.shape[0]
    return Instance(values[keep], instance.label, instance.weight, keep, n)


def to_dense(instance: Instance) -> Instance:
    if not instance.is_sparse:
        return instance
    return Instance(instance.dense(), instance.label, instance.weight)


def validate(instance: Instance, schema: InstanceSchema) -> None:
    """Raise ``SchemaError`` unless the instance conforms to the schema."""
    if instance.n_attributes != schema.n_attributes:
        raise SchemaError(f"instance has {instance.n_attributes} attributes, schema {schema.n_attributes}")
    x = instance.dense()
    for i, spec in enumerate(schema.attributes):
        v = x[i]
        if spec.values is not None and not math.isnan(v):
            if v != int(v) or not 0 <= v < len(spec.values):
                raise SchemaError(f"value {v} is not a valid index for {spec.name!r}")
    if instance.label is not None and isinstance(schema.target, ClassTarget):
        if not 0 <= int(instance.label) < len(schema.target.labels):
            raise SchemaError(f"class index {instance.label} out of range")


@runtime_checkable
class StreamSource(Protocol):
    def schema(self) -> InstanceSchema: ...

    def next(self) -> Instance | None:
        """Next instance, or ``None`` at end of stream."""
        ...


class ListSource:
    """A finite in-memory stream."""

    def __init__(self, schema: InstanceSchema, instances: Sequence[Instance]):
        self._schema = schema
        self._instances = instances
        self._pos = 0

    def schema(self) -> InstanceSchema:
        return self._schema

    def next(self) -> Instance | None:
        if self._pos >= len(self._instances):
            return None
        inst = self._instances[self._pos]
        self._pos += 1
        return inst

    def restart(self) -> None:
        self._pos = 0


def take(source: StreamSource, n: int | None = None) -> Iterator[Instance]:
    count = 0
    while n is None or count < n:
        inst = source.next()
        if inst is None:
            return
        yield inst
        count += 1


# --- ARFF -------------------------------------------------------------------

_NUMERIC_TYPES = {"numeric", "real", "integer"}


def _split_name_and_type(rest: str, lineno: int) -> tuple[str, str]:
    rest = rest.strip()
    if not rest:
        raise ArffError("attribute declaration without a name", lineno)
    if rest[0] in "'\"":
        q = rest[0]
        end = rest.find(q, 1)
        if end < 0:
            raise ArffError("unterminated quoted attribute name", lineno)
        return rest[1:end], rest[end + 1 :].strip()
    parts = rest.split(None, 1)
    if len(parts) < 2:
        raise ArffError(f"attribute {parts[0]!r} has no type", lineno)
    return parts[0], parts[1].strip()


def _split_row(line: str) -> list[str]:
    row = next(csv.reader([line], quotechar="'", skipinitialspace=True))
    return [c.strip().strip('"') for c in row]


def _parse_nominal(type_text: str, lineno: int) -> tuple[str, ...]:
    if not type_text.endswith("}"):
        raise ArffError("unterminated nominal value list", lineno)
    values = tuple(_split_row(type_text[1:-1]))
    if not values or any(v == "" for v in values):
        raise ArffError("empty nominal value", lineno)
    return values


class _ArffReader:
    def __init__(self, lines: Iterable[str], target: str | None = None):
        self._lines = iter(lines)
        self._lineno = 0
        self.relation = "stream"
        specs: list[AttributeSpec] = []
        for raw in self._lines:
            self._lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            low = line.lower()
            if low.startswith("@relation"):
                self.relation = line[len("@relation") :].strip().strip("'\"") or "stream"
            elif low.startswith("@attribute"):
                name, type_text = _split_name_and_type(line[len("@attribute") :], self._lineno)
                if type_text.startswith("{"):
                    specs.append(AttributeSpec(name, _parse_nominal(type_text, self._lineno)))
                elif type_text.lower() in _NUMERIC_TYPES:
                    specs.append(AttributeSpec(name))
                else:
                    raise ArffError(f"unsupported attribute type {type_text!r}", self._lineno)
            elif low.startswith("@data"):
                break
            else:
                raise ArffError(f"unexpected header line {line!r}", self._lineno)
        else:
            raise ArffError("missing @data section", self._lineno)
        if len(specs) < 2:
            raise ArffError("need at least one attribute plus the target", self._lineno)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ArffError("duplicate attribute names", self._lineno)
        t = len(specs) - 1 if target is None else names.index(target) if target in names else None
        if t is None:
            raise ArffError(f"target attribute {target!r} not declared")
        self.target_index = t
        self.specs = specs
        self._lookup = [
            {v: i for i, v in enumerate(s.values)} if s.values is not None else None for s in specs
        ]
        # omitted sparse entries: 0 for numeric attributes, the first value for nominal ones
        self._sparse_defaults = tuple("0" if s.values is None else s.values[0] for s in specs)
        self._target_values: list[float] = []
        self._pending: list[tuple[np.ndarray, float | int | None, float]] = []

    def rows(self) -> Iterator[tuple[np.ndarray, float | int | None, float]]:
        n = len(self.specs)
        t = self.target_index
        for raw in self._lines:
            self._lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            weight = 1.0
            if line.endswith("}") and "{" in line and not line.startswith("{"):
                body, _, w = line.rpartition("{")
                line = body.rstrip().rstrip(",")
                try:
                    weight = float(w[:-1])
                except ValueError:
                    raise ArffError(f"bad instance weight {w!r}", self._lineno) from None
            if line.startswith("{"):
                cells = list(self._sparse_defaults)
                for item in _split_row(line.strip("{}")):
                    if not item:
                        continue
                    idx_text, _, val = item.partition(" ")
                    try:
                        idx = int(idx_text)
                    except ValueError:
                        raise ArffError(f"bad sparse index {idx_text!r}", self._lineno) from None
                    if not 0 <= idx < n:
                        raise ArffError(f"sparse index {idx} out of range", self._lineno)
                    cells[idx] = val.strip()
            else:
                cells = _split_row(line)
            if len(cells) != n:
                raise ArffError(f"row has {len(cells)} values, expected {n}", self._lineno)
            x = np.empty(n - 1)
            label: float | int | None = None
            j = 0
            for i, cell in enumerate(cells):
                lookup = self._lookup[i]
                if cell == "?":
                    v = MISSING
                elif lookup is not None:
                    try:
                        v = lookup[cell]
                    except KeyError:
                        raise ArffError(
                            f"unknown value {cell!r} for attribute {self.specs[i].name!r}", self._lineno
                        ) from None
                else:
                    try:
                        v = float(cell)
                    except ValueError:
                        raise ArffError(f"bad numeric value {cell!r}", self._lineno) from None
                if i == t:
                    if not math.isnan(v):
                        label = int(v) if lookup is not None else v
                else:
                    x[j] = v
                    j += 1
            yield x, label, weight

    def schema(self, target_range: tuple[float, float] | None) -> InstanceSchema:
        attrs = tuple(s for i, s in enumerate(self.specs) if i != self.target_index)
        tspec = self.specs[self.target_index]
        if tspec.values is not None:
            target: ClassTarget | NumericTarget = ClassTarget(tspec.name, tspec.values)
        else:
            lo, hi = target_range if target_range is not None else (0.0, 1.0)
            if not lo < hi:
                hi = lo + 1.0
            target = NumericTarget(tspec.name, lo, hi)
        return InstanceSchema(attrs, target, self.relation)


def _open_text(path: str | Path) -> io.TextIOBase:
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def parse_arff(text: str | Iterable[str], target: str | None = None) -> tuple[InstanceSchema, list[Instance]]:
    """Parse ARFF text into a schema and its instances.

    The last attribute is the target unless ``target`` names another one. A
    numeric target's range is taken from the observed values.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    reader = _ArffReader(lines, target)
    instances = [Instance(x, label, w) for x, label, w in reader.rows()]
    rng = None
    if reader.specs[reader.target_index].values is None:
        ys = [i.label for i in instances if i.label is not None]
        if ys:
            rng = (min(ys), max(ys))
    return reader.schema(rng), instances


def load_arff(path: str | Path, target: str | None = None) -> tuple[InstanceSchema, list[Instance]]:
    with _open_text(path) as fh:
        return parse_arff(fh, target)


class ArffFileStream:
    """Stream over an ARFF file (``.gz`` accepted).

    Instances are read lazily. For a numeric target the file is scanned once
    up front to find the label range used for error normalisation.
    """

    def __init__(self, path: str | Path, target: str | None = None, max_instances: int | None = None):
        self.path = Path(path)
        self.target = target
        self.max_instances = max_instances
        self._open()

    def _open(self):
        self._fh = _open_text(self.path)
        self._reader = _ArffReader(self._fh, self.target)
        rng = None
        if self._reader.specs[self._reader.target_index].values is None:
            with _open_text(self.path) as fh:
                scan = _ArffReader(fh, self.target)
                ys = [y for _, y, _ in scan.rows() if y is not None]
            if ys:
                rng = (min(ys), max(ys))
        self._schema = self._reader.schema(rng)
        self._rows = self._reader.rows()
        self._count = 0

    def schema(self) -> InstanceSchema:
        return self._schema

    def next(self) -> Instance | None:
        if self.max_instances is not None and self._count >= self.max_instances:
            return None
        row = next(self._rows, None)
        if row is None:
            self._fh.close()
            return None
        self._count += 1
        x, label, w = row
        return Instance(x, label, w)

    def restart(self) -> None:
        self._fh.close()
        self._open()

    def __getstate__(self):
        state = self.__dict__.copy()
        for k in ("_fh", "_reader", "_rows"):
            state.pop(k, None)
        return state

    def __setstate__(self, state):
        skip = state["_count"]
        self.__dict__.update(state)
        self._open()
        for _ in range(skip):
            self.next()
