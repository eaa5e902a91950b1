"""Differentially private query release via the Laplace mechanism.

Neighboring datasets are related by *replacement* (bounded semantics): an
item-level neighbor replaces the values of a single row, a user-level
neighbor replaces the values of every row of a single user (row counts and
user memberships are unchanged).  Consequences worth knowing:

* a predicate-free Count has sensitivity 0 and is released exactly;
* user-level sensitivity is the item-level value times the per-user
  contribution cap, which `prepare` enforces by truncation.

Aggregation is exact and batched: partial statistics per batch are merged
with integer/rational arithmetic, so the merged result (and therefore the
released value for a fixed seed) is bit-identical for every batch size.
Noise is added once, after the merge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import (
    ConfigInvalid,
    DegenerateDenominator,
    MissingClampBounds,
    MissingUserCap,
    QueryMismatch,
)
from .tabular import Cell, Dataset, DatasetBatch, partition_batches


class PrivacyUnitKind(Enum):
    ITEM = "item"
    USER = "user"


@dataclass(frozen=True)
class PrivacyUnit:
    """Item-level (single row replaced) or user-level (all of one user's rows)."""

    kind: PrivacyUnitKind = PrivacyUnitKind.ITEM
    user_column: str | None = None
    contribution_cap: int | None = None

    def __post_init__(self):
        if self.kind is PrivacyUnitKind.USER:
            if self.user_column is None:
                raise ConfigInvalid("user-level unit requires a user_column")
            if self.contribution_cap is None:
                raise MissingUserCap("user-level unit requires a contribution cap")
            if self.contribution_cap < 1:
                raise ConfigInvalid("contribution cap must be >= 1")
        else:
            if self.user_column is not None or self.contribution_cap is not None:
                raise ConfigInvalid("item-level unit takes no user column or cap")


ITEM_LEVEL = PrivacyUnit()


class QueryKind(Enum):
    COUNT = "count"
    SUM = "sum"
    MEAN = "mean"
    HISTOGRAM = "histogram"


@dataclass(frozen=True)
class DpQuery:
    """Everything needed to compute the query's sensitivity and release it."""

    kind: QueryKind
    epsilon: float
    value_column: str | None = None
    clamp: tuple[float, float] | None = None
    predicate: tuple[str, Cell] | None = None
    group_by: str | None = None
    unit: PrivacyUnit = ITEM_LEVEL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigInvalid(f"epsilon must be > 0, got {self.epsilon}")
        if self.clamp is not None:
            lo, hi = self.clamp
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigInvalid("clamp bounds must be finite")
            if not lo < hi:
                raise ConfigInvalid(f"clamp lower bound must be < upper bound, got {self.clamp}")
        if self.kind in (QueryKind.SUM, QueryKind.MEAN) and self.value_column is None:
            raise ConfigInvalid(f"{self.kind.value} query requires a value_column")
        if self.kind is QueryKind.HISTOGRAM and self.group_by is None:
            raise ConfigInvalid("histogram query requires a group_by column")


@dataclass(frozen=True)
class Sensitivity:
    """L1 sensitivity: the largest possible change of the released statistic."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ConfigInvalid("sensitivity cannot be negative")


def _clamp_width(query: DpQuery) -> float:
    if query.clamp is None:
        raise MissingClampBounds(f"{query.kind.value} query requires clamp bounds")
    lo, hi = query.clamp
    return hi - lo


def _item_sensitivity(query: DpQuery) -> float:
    if query.kind is QueryKind.COUNT:
        # Replacement keeps the row count fixed; only a predicate can flip.
        return 1.0 if query.predicate is not None else 0.0
    if query.kind is QueryKind.SUM:
        return _clamp_width(query)
    if query.kind is QueryKind.MEAN:
        # Released as a (sum, count) pair; the count component cannot change.
        return _clamp_width(query)
    if query.kind is QueryKind.HISTOGRAM:
        return 2.0  # a replaced row leaves one bin and enters another
    raise ConfigInvalid(f"unknown query kind {query.kind!r}")


def sensitivity(query: DpQuery) -> Sensitivity:
    value = _item_sensitivity(query)
    if query.unit.kind is PrivacyUnitKind.USER:
        value *= query.unit.contribution_cap
    return Sensitivity(value)


def laplace_samples(scale_b: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """n zero-mean Laplace(scale_b) draws via the inverse CDF.

    With u uniform on (-1/2, 1/2): X = -b * sgn(u) * ln(1 - 2|u|).
    A scale of exactly 0 yields zeros (used for zero-sensitivity components).
    """
    if scale_b < 0:
        raise ValueError(f"scale must be >= 0, got {scale_b}")
    if scale_b == 0:
        return np.zeros(n)
    u = rng.random(n) - 0.5
    # rng.random() may return 0.0; keep u inside the open interval.
    u = np.where(u == -0.5, np.nextafter(-0.5, 0.0), u)
    return -scale_b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_sample(scale_b: float, rng: np.random.Generator) -> float:
    if not scale_b > 0:
        raise ValueError(f"scale_b must be positive, got {scale_b}")
    return float(laplace_samples(scale_b, rng, 1)[0])


def prepare(dataset: Dataset, query: DpQuery) -> Dataset:
    """Clamp values into the query bounds and cap per-user contributions.

    User capping keeps each user's first `contribution_cap` rows in stable
    dataset order, so the result is reproducible and batch-independent.
    """
    rows = list(dataset.rows)
    if query.unit.kind is PrivacyUnitKind.USER:
        user_idx = dataset.schema.index_of(query.unit.user_column)
        if not dataset.schema.columns[user_idx].user_id:
            raise ConfigInvalid(
                f"column {query.unit.user_column!r} is not flagged user_id in the schema"
            )
        seen: dict[Cell, int] = {}
        kept = []
        for row in rows:
            user = row[user_idx]
            seen[user] = seen.get(user, 0) + 1
            if seen[user] <= query.unit.contribution_cap:
                kept.append(row)
        rows = kept

    if query.kind in (QueryKind.SUM, QueryKind.MEAN):
        if query.clamp is None:
            raise MissingClampBounds(f"{query.kind.value} query requires clamp bounds")
        lo, hi = query.clamp
        idx = dataset.schema.index_of(query.value_column)
        rows = [
            tuple(
                min(max(float(cell), lo), hi) if i == idx else cell
                for i, cell in enumerate(row)
            )
            for row in rows
        ]
    if query.predicate is not None:
        dataset.schema.index_of(query.predicate[0])
    if query.group_by is not None:
        dataset.schema.index_of(query.group_by)
    return dataset.with_rows(rows)


@dataclass
class PartialAggregate:
    """Exact, noise-free statistics of one batch.

    Counts are ints and sums rationals, so merging is associative down to
    the last bit regardless of how the rows were batched.
    """

    kind: QueryKind
    count: int = 0
    total: Fraction = Fraction(0)
    bins: dict[Cell, int] = field(default_factory=dict)


def _predicate_matches(cell: Cell, wanted: Cell) -> bool:
    if isinstance(cell, float):
        try:
            return cell == float(wanted)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            return False
    return cell == wanted


def partial_aggregate(batch: DatasetBatch, query: DpQuery) -> PartialAggregate:
    partial = PartialAggregate(query.kind)
    schema = batch.parent_schema
    if query.kind is QueryKind.COUNT:
        if query.predicate is None:
            partial.count = len(batch.rows)
        else:
            idx = schema.index_of(query.predicate[0])
            partial.count = sum(
                1 for row in batch.rows if _predicate_matches(row[idx], query.predicate[1])
            )
    elif query.kind in (QueryKind.SUM, QueryKind.MEAN):
        idx = schema.index_of(query.value_column)
        for row in batch.rows:
            partial.total += Fraction(float(row[idx]))
        partial.count = len(batch.rows)
    elif query.kind is QueryKind.HISTOGRAM:
        idx = schema.index_of(query.group_by)
        for row in batch.rows:
            partial.bins[row[idx]] = partial.bins.get(row[idx], 0) + 1
    return partial


def merge_partials(partials: list[PartialAggregate]) -> PartialAggregate:
    if not partials:
        raise QueryMismatch("nothing to merge")
    kind = partials[0].kind
    merged = PartialAggregate(kind)
    for partial in partials:
        if partial.kind is not kind:
            raise QueryMismatch(f"cannot merge {partial.kind.value} into {kind.value}")
        merged.count += partial.count
        merged.total += partial.total
        for key, n in partial.bins.items():
            merged.bins[key] = merged.bins.get(key, 0) + n
    return merged


@dataclass
class DpResult:
    """One noisy release.  `raw` is the pre-noise value and never serialized."""

    kind: QueryKind
    raw: float | list[float]
    noisy: float | list[float]
    epsilon_spent: float
    scale_b: float
    seed: int
    bins: list[Cell] | None = None

    def released_json(self) -> dict:
        out = {
            "kind": self.kind.value,
            "noisy": self.noisy,
            "epsilon_spent": self.epsilon_spent,
            "scale_b": self.scale_b,
            "seed": self.seed,
        }
        if self.bins is not None:
            out["bins"] = self.bins
        return out


def _merged_aggregate(dataset: Dataset, query: DpQuery, batch_size: int | None) -> PartialAggregate:
    prepared = prepare(dataset, query)
    size = batch_size if batch_size is not None else max(1, prepared.row_count)
    if size < 1:
        raise ConfigInvalid(f"batch_size must be >= 1, got {size}")
    batches = partition_batches(prepared, size)
    if not batches:
        return PartialAggregate(query.kind)
    return merge_partials([partial_aggregate(batch, query) for batch in batches])


def run_dp_query(
    dataset: Dataset, query: DpQuery, seed: int, batch_size: int | None = None
) -> DpResult:
    """Prepare, aggregate in batches, merge, then add Laplace noise once.

    Mean is released as (noisy sum at eps/2) / (noisy count at eps/2) under
    sequential composition; under replacement semantics the count component
    has sensitivity 0, so its noise scale is 0 and only the sum is perturbed.
    """
    merged = _merged_aggregate(dataset, query, batch_size)
    rng = np.random.default_rng(seed)
    eps = query.epsilon

    if query.kind is QueryKind.COUNT:
        delta = sensitivity(query).value
        scale = delta / eps
        raw = float(merged.count)
        noise = laplace_samples(scale, rng, 1)[0] if scale > 0 else 0.0
        return DpResult(query.kind, raw, raw + float(noise), eps, scale, seed)

    if query.kind is QueryKind.SUM:
        delta = sensitivity(query).value
        scale = delta / eps
        raw = float(merged.total)
        return DpResult(query.kind, raw, raw + laplace_sample(scale, rng), eps, scale, seed)

    if query.kind is QueryKind.MEAN:
        sum_scale = sensitivity(query).value / (eps / 2.0)
        count_scale = 0.0  # replacement keeps the row count fixed
        noisy_sum = float(merged.total) + laplace_sample(sum_scale, rng)
        noisy_count = float(merged.count) + (
            laplace_sample(count_scale, rng) if count_scale > 0 else 0.0
        )
        if noisy_count <= 0:
            raise DegenerateDenominator(
                f"noisy count {noisy_count} is not positive; cannot release a mean"
            )
        raw = float(merged.total) / merged.count
        return DpResult(query.kind, raw, noisy_sum / noisy_count, eps, sum_scale, seed)

    if query.kind is QueryKind.HISTOGRAM:
        delta = sensitivity(query).value
        scale = delta / eps
        bins = sorted(merged.bins)  # deterministic release order
        raw = [float(merged.bins[b]) for b in bins]
        noise = laplace_samples(scale, rng, len(bins))
        noisy = [r + float(z) for r, z in zip(raw, noise)]
        return DpResult(query.kind, raw, noisy, eps, scale, seed, bins=bins)

    raise ConfigInvalid(f"unknown query kind {query.kind!r}")


@dataclass
class TradeoffPoint:
    epsilon: float
    analytic_mae: float
    empirical_mae: float | None = None

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "analytic_mae": self.analytic_mae,
            "empirical_mae": self.empirical_mae,
        }


def _analytic_mae(query: DpQuery, merged: PartialAggregate, eps: float) -> float:
    """Expected |released - exact| per component: E|Lap(b)| = b."""
    delta = sensitivity(query).value
    if query.kind is QueryKind.MEAN:
        if merged.count == 0:
            raise DegenerateDenominator("cannot compute a mean tradeoff on an empty dataset")
        return (delta / (eps / 2.0)) / merged.count
    return delta / eps


def tradeoff_curve(
    dataset: Dataset,
    query: DpQuery,
    epsilons: list[float],
    trials: int,
    seed: int,
    batch_size: int | None = None,
) -> list[TradeoffPoint]:
    """Analytic and Monte Carlo mean absolute error per candidate epsilon.

    The exact aggregate is computed once; each epsilon gets `trials`
    independent seeded noise draws.
    """
    if not epsilons:
        raise ConfigInvalid("epsilon grid must be non-empty")
    if any(not e > 0 for e in epsilons):
        raise ConfigInvalid("all epsilons must be > 0")
    if trials < 1:
        raise ConfigInvalid(f"trials must be >= 1, got {trials}")

    merged = _merged_aggregate(dataset, query, batch_size)
    points = []
    for i, eps in enumerate(epsilons):
        analytic = _analytic_mae(query, merged, eps)
        rng = np.random.default_rng([seed, i])
        if query.kind is QueryKind.HISTOGRAM:
            n_bins = max(1, len(merged.bins))
            scale = sensitivity(query).value / eps
            noise = laplace_samples(scale, rng, trials * n_bins)
            empirical = float(np.mean(np.abs(noise)))
        elif query.kind is QueryKind.MEAN:
            scale = sensitivity(query).value / (eps / 2.0)
            if merged.count == 0:
                raise DegenerateDenominator("cannot compute a mean tradeoff on an empty dataset")
            noise = laplace_samples(scale, rng, trials)
            empirical = float(np.mean(np.abs(noise))) / merged.count
        else:
            scale = sensitivity(query).value / eps
            noise = laplace_samples(scale, rng, trials)
            empirical = float(np.mean(np.abs(noise)))
        points.append(TradeoffPoint(eps, analytic, empirical))
    return points


# --- JSON wire formats -------------------------------------------------------

def unit_from_json(obj: dict | None) -> PrivacyUnit:
    if not obj or obj.get("kind", "item") == "item":
        return ITEM_LEVEL
    if obj["kind"] != "user":
        raise ConfigInvalid(f"unknown privacy unit kind {obj['kind']!r}")
    if "cap" not in obj or obj["cap"] is None:
        raise MissingUserCap("user-level unit requires a contribution cap")
    return PrivacyUnit(PrivacyUnitKind.USER, obj.get("user_column"), int(obj["cap"]))


def query_from_json(obj: dict) -> DpQuery:
    """Parse the query config JSON (batch_size/seed keys are the caller's)."""
    try:
        kind = QueryKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid(f"bad query kind: {exc}") from exc
    if "epsilon" not in obj:
        raise ConfigInvalid("query config requires epsilon")
    clamp = tuple(obj["clamp"]) if obj.get("clamp") is not None else None
    predicate = None
    if obj.get("predicate") is not None:
        predicate = (obj["predicate"]["column"], obj["predicate"]["equals"])
    return DpQuery(
        kind=kind,
        epsilon=float(obj["epsilon"]),
        value_column=obj.get("value_column"),
        clamp=clamp,
        predicate=predicate,
        group_by=obj.get("group_by"),
        unit=unit_from_json(obj.get("unit")),
    )


def query_to_json(query: DpQuery) -> dict:
    out: dict = {"kind": query.kind.value, "epsilon": query.epsilon}
    if query.value_column is not None:
        out["value_column"] = query.value_column
    if query.clamp is not None:
        out["clamp"] = list(query.clamp)
    if query.predicate is not None:
        out["predicate"] = {"column": query.predicate[0], "equals": query.predicate[1]}
    if query.group_by is not None:
        out["group_by"] = query.group_by
    if query.unit.kind is PrivacyUnitKind.USER:
        out["unit"] = {
            "kind": "user",
            "user_column": query.unit.user_column,
            "cap": query.unit.contribution_cap,
        }
    else:
        out["unit"] = {"kind": "item"}
    return out
