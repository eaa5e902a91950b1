"""Dataset model, attribute-role schema, CSV ingestion and batch partitioning.

Everything downstream (classical ops, k-anonymity, differential privacy,
the pipeline) operates on the immutable :class:`Dataset` defined here.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Iterable, Union

from .errors import ConfigInvalid, HeaderMismatch, ParseError, UnknownColumn

Cell = Union[str, float]

# Integers survive the float representation exactly up to this bound.
MAX_EXACT_INT = 2**53


class AttributeRole(Enum):
    DIRECT_IDENTIFIER = "direct"
    QUASI_IDENTIFIER = "quasi"
    SENSITIVE = "sensitive"
    INSENSITIVE = "insensitive"


class ColumnKind(Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class Column:
    name: str
    role: AttributeRole
    kind: ColumnKind
    user_id: bool = False


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered column declarations; at most one column carries the user id."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if any(not n for n in names):
            raise ConfigInvalid("column names must be non-empty")
        if len(set(names)) != len(names):
            raise ConfigInvalid("column names must be unique")
        if sum(1 for c in self.columns if c.user_id) > 1:
            raise ConfigInvalid("at most one column may be flagged user_id")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise UnknownColumn(f"no such column: {name!r}")

    def column(self, name: str) -> Column:
        return self.columns[self.index_of(name)]

    def user_id_column(self) -> str | None:
        for c in self.columns:
            if c.user_id:
                return c.name
        return None

    def replace_kind(self, name: str, kind: ColumnKind) -> "AttributeSchema":
        idx = self.index_of(name)
        cols = list(self.columns)
        old = cols[idx]
        cols[idx] = Column(old.name, old.role, kind, old.user_id)
        return AttributeSchema(tuple(cols))

    def to_json(self) -> dict:
        return {
            "columns": [
                {
                    "name": c.name,
                    "role": c.role.value,
                    "kind": c.kind.value,
                    "user_id": c.user_id,
                }
                for c in self.columns
            ]
        }


def schema_from_json(obj: dict) -> AttributeSchema:
    """Parse the schema JSON document (see README for the format)."""
    if not isinstance(obj, dict) or "columns" not in obj:
        raise ConfigInvalid("schema JSON must be an object with a 'columns' list")
    cols = []
    for entry in obj["columns"]:
        try:
            role = AttributeRole(entry["role"])
            kind = ColumnKind(entry["kind"])
        except (KeyError, ValueError) as exc:
            raise ConfigInvalid(f"bad column entry {entry!r}: {exc}") from exc
        cols.append(Column(entry.get("name", ""), role, kind, bool(entry.get("user_id", False))))
    return AttributeSchema(tuple(cols))


def schema_from_json_text(text: str | bytes) -> AttributeSchema:
    return schema_from_json(json.loads(text))


@dataclass(frozen=True)
class Dataset:
    """Immutable typed table: categorical cells are str, numeric cells float."""

    schema: AttributeSchema
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self):
        width = len(self.schema.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ParseError(f"row {i + 1} has {len(row)} cells, expected {width}", row=i + 1)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def column_values(self, name: str) -> tuple[Cell, ...]:
        idx = self.schema.index_of(name)
        return tuple(row[idx] for row in self.rows)

    def with_rows(self, rows: Iterable[tuple[Cell, ...]]) -> "Dataset":
        return Dataset(self.schema, tuple(rows))


@dataclass(frozen=True)
class DatasetBatch:
    """Contiguous slice of a parent dataset; index orders the batches."""

    index: int
    rows: tuple[tuple[Cell, ...], ...]
    parent_schema: AttributeSchema


def format_cell(value: Cell) -> str:
    """Canonical text form of a cell (integers without a trailing '.0')."""
    if isinstance(value, str):
        return value
    if value == int(value) and abs(value) <= MAX_EXACT_INT:
        return str(int(value))
    return repr(value)


def _parse_numeric(text: str, row_number: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row_number}: non-numeric cell {text!r} in numeric column {column!r}",
            row=row_number,
        ) from None
    if not math.isfinite(value):
        raise ParseError(
            f"row {row_number}: non-finite value {text!r} in numeric column {column!r}",
            row=row_number,
        )
    return value


def load_dataset(source: bytes | BinaryIO, schema: AttributeSchema) -> Dataset:
    """Ingest UTF-8 CSV (RFC 4180, mandatory header) against an explicit schema.

    The header must match the schema column names in order.  Raises
    :class:`HeaderMismatch` or :class:`ParseError` (with the offending
    1-based data row number) on malformed input.
    """
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    else:
        text = source.read().decode("utf-8")
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMismatch("empty input: expected a header row") from None
    if tuple(header) != schema.names:
        raise HeaderMismatch(f"header {header!r} does not match schema columns {list(schema.names)!r}")

    width = len(schema.columns)
    rows: list[tuple[Cell, ...]] = []
    for row_number, raw in enumerate(reader, start=1):
        if len(raw) != width:
            raise ParseError(
                f"row {row_number} has {len(raw)} cells, expected {width}", row=row_number
            )
        cells: list[Cell] = []
        for col, text_value in zip(schema.columns, raw):
            if col.kind is ColumnKind.NUMERIC:
                cells.append(_parse_numeric(text_value, row_number, col.name))
            else:
                cells.append(text_value)
        rows.append(tuple(cells))
    return Dataset(schema, tuple(rows))


def serialize_dataset(dataset: Dataset) -> bytes:
    """Dataset back to UTF-8 CSV with header; inverse of :func:`load_dataset`."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(dataset.schema.names)
    for row in dataset.rows:
        writer.writerow([format_cell(cell) for cell in row])
    return buf.getvalue().encode("utf-8")


def partition_batches(dataset: Dataset, batch_size: int) -> list[DatasetBatch]:
    """Split rows into contiguous batches; concatenation restores the input."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    batches = []
    for index, start in enumerate(range(0, dataset.row_count, batch_size)):
        batches.append(
            DatasetBatch(index, dataset.rows[start : start + batch_size], dataset.schema)
        )
    return batches
