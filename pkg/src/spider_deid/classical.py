"""Classical anonymisation: suppression, pseudonymisation, generalisation,
and exact (noise-free) aggregation.

All operations are pure: they return a new :class:`Dataset` and never mutate
their input.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from enum import Enum

from .errors import (
    BadHierarchy,
    LevelOutOfRange,
    NonNumericMeasure,
    UnknownValue,
)
from .tabular import (
    AttributeRole,
    AttributeSchema,
    Cell,
    Column,
    ColumnKind,
    Dataset,
    format_cell,
)

# Conventional root symbol; also used for suppressed cells.
SUPPRESSION_TOKEN = "*"


@dataclass(frozen=True)
class GeneralizationHierarchy:
    """Per-column ladder of progressively coarser values.

    ``levels[v]`` holds the level-1..height generalizations of original
    value ``v``; level 0 is the value itself.  The top level maps every
    value to one shared root.
    """

    column: str
    height: int
    levels: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if self.height < 1:
            raise BadHierarchy(f"hierarchy for {self.column!r}: height must be >= 1")
        roots = set()
        for value, ladder in self.levels.items():
            if len(ladder) != self.height:
                raise BadHierarchy(
                    f"hierarchy for {self.column!r}: value {value!r} has "
                    f"{len(ladder)} generalizations, expected {self.height}"
                )
            roots.add(ladder[-1])
        if len(roots) > 1:
            raise BadHierarchy(
                f"hierarchy for {self.column!r}: top level is not a single root: {sorted(roots)!r}"
            )
        # Functional consistency: a level-i value may map to only one level-(i+1) value.
        for i in range(self.height - 1):
            step: dict[str, str] = {}
            for ladder in self.levels.values():
                src, dst = ladder[i], ladder[i + 1]
                if step.setdefault(src, dst) != dst:
                    raise BadHierarchy(
                        f"hierarchy for {self.column!r}: level-{i + 1} value {src!r} "
                        f"maps to both {step[src]!r} and {dst!r}"
                    )

    def generalize_value(self, value: str, level: int) -> str:
        if not 0 <= level <= self.height:
            raise LevelOutOfRange(
                f"level {level} out of range [0, {self.height}] for {self.column!r}"
            )
        if level == 0:
            return value
        try:
            return self.levels[value][level - 1]
        except KeyError:
            raise UnknownValue(
                f"value {value!r} not covered by hierarchy for {self.column!r}", value=value
            ) from None

    @property
    def root(self) -> str:
        for ladder in self.levels.values():
            return ladder[-1]
        return SUPPRESSION_TOKEN


def hierarchy_from_csv(column: str, text: str | bytes) -> GeneralizationHierarchy:
    """Build a hierarchy from CSV rows: original value, level-1, ..., level-h."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    rows = [row for row in csv.reader(io.StringIO(text, newline="")) if row]
    if not rows:
        raise BadHierarchy(f"hierarchy CSV for {column!r} is empty")
    height = len(rows[0]) - 1
    levels: dict[str, tuple[str, ...]] = {}
    for row in rows:
        if len(row) != height + 1:
            raise BadHierarchy(
                f"hierarchy CSV for {column!r}: row {row!r} has {len(row)} fields, "
                f"expected {height + 1}"
            )
        if row[0] in levels and levels[row[0]] != tuple(row[1:]):
            raise BadHierarchy(f"hierarchy CSV for {column!r}: conflicting rows for {row[0]!r}")
        levels[row[0]] = tuple(row[1:])
    return GeneralizationHierarchy(column, height, levels)


class Statistic(Enum):
    COUNT = "count"
    SUM = "sum"
    MEAN = "mean"
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class AggregateSpec:
    group_by: tuple[str, ...]
    measures: tuple[tuple[str | None, Statistic], ...]


def _require_columns(dataset: Dataset, columns) -> None:
    for name in columns:
        dataset.schema.index_of(name)


def suppress(dataset: Dataset, columns: list[str]) -> Dataset:
    """Replace every cell of the named columns with the suppression token."""
    _require_columns(dataset, columns)
    if not columns:
        return dataset
    schema = dataset.schema
    for name in columns:
        schema = schema.replace_kind(name, ColumnKind.CATEGORICAL)
    indices = {dataset.schema.index_of(name) for name in columns}
    rows = tuple(
        tuple(SUPPRESSION_TOKEN if i in indices else cell for i, cell in enumerate(row))
        for row in dataset.rows
    )
    return Dataset(schema, rows)


def pseudonym(value: Cell, salt: bytes | None = None) -> str:
    """Lowercase-hex SHA-256 of salt || UTF-8(value); 64 characters."""
    digest = hashlib.sha256((salt or b"") + format_cell(value).encode("utf-8"))
    return digest.hexdigest()


def pseudonymize(dataset: Dataset, columns: list[str], salt: bytes | None = None) -> Dataset:
    """Hash every cell of the named columns; equal inputs yield equal pseudonyms."""
    _require_columns(dataset, columns)
    if not columns:
        return dataset
    schema = dataset.schema
    for name in columns:
        schema = schema.replace_kind(name, ColumnKind.CATEGORICAL)
    indices = {dataset.schema.index_of(name) for name in columns}
    rows = tuple(
        tuple(pseudonym(cell, salt) if i in indices else cell for i, cell in enumerate(row))
        for row in dataset.rows
    )
    return Dataset(schema, rows)


def generalize(
    dataset: Dataset, column: str, hierarchy: GeneralizationHierarchy, level: int
) -> Dataset:
    """Replace the column's cells with their level-`level` generalizations."""
    idx = dataset.schema.index_of(column)
    if not 0 <= level <= hierarchy.height:
        raise LevelOutOfRange(f"level {level} out of range [0, {hierarchy.height}] for {column!r}")
    if level == 0:
        return dataset
    rows = []
    for row_number, row in enumerate(dataset.rows, start=1):
        try:
            generalized = hierarchy.generalize_value(format_cell(row[idx]), level)
        except UnknownValue as exc:
            raise UnknownValue(f"row {row_number}: {exc}", value=exc.value, row=row_number) from None
        rows.append(tuple(generalized if i == idx else cell for i, cell in enumerate(row)))
    schema = dataset.schema.replace_kind(column, ColumnKind.CATEGORICAL)
    return Dataset(schema, tuple(rows))


def _measure_name(column: str | None, stat: Statistic) -> str:
    return stat.value if column is None else f"{stat.value}_{column}"


def aggregate(dataset: Dataset, spec: AggregateSpec) -> Dataset:
    """Exact grouped statistics, one output row per group key, sorted by key."""
    _require_columns(dataset, spec.group_by)
    for column, stat in spec.measures:
        if stat is Statistic.COUNT:
            continue
        if column is None:
            raise NonNumericMeasure(f"{stat.value} requires a column")
        if dataset.schema.column(column).kind is not ColumnKind.NUMERIC:
            raise NonNumericMeasure(f"{stat.value} over non-numeric column {column!r}")

    key_indices = [dataset.schema.index_of(name) for name in spec.group_by]
    groups: dict[tuple[Cell, ...], list[tuple[Cell, ...]]] = {}
    for row in dataset.rows:
        key = tuple(row[i] for i in key_indices)
        groups.setdefault(key, []).append(row)

    out_columns = [
        Column(name, dataset.schema.column(name).role, dataset.schema.column(name).kind)
        for name in spec.group_by
    ]
    out_columns += [
        Column(_measure_name(column, stat), AttributeRole.INSENSITIVE, ColumnKind.NUMERIC)
        for column, stat in spec.measures
    ]
    out_rows = []
    for key in sorted(groups):
        rows = groups[key]
        cells: list[Cell] = list(key)
        for column, stat in spec.measures:
            if stat is Statistic.COUNT:
                cells.append(float(len(rows)))
                continue
            idx = dataset.schema.index_of(column)
            values = [float(r[idx]) for r in rows]
            if stat is Statistic.SUM:
                cells.append(sum(values))
            elif stat is Statistic.MEAN:
                cells.append(sum(values) / len(values))
            elif stat is Statistic.MIN:
                cells.append(min(values))
            elif stat is Statistic.MAX:
                cells.append(max(values))
        out_rows.append(tuple(cells))
    return Dataset(AttributeSchema(tuple(out_columns)), tuple(out_rows))
