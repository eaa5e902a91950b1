"""Full-domain k-anonymisation.

One generalization level is chosen per quasi-identifier for the whole
dataset; the candidate level vectors form a lattice ordered component-wise.
The search walks the lattice bottom-up by level-sum and returns the
cheapest (lowest information loss) node that achieves k-anonymity, after
record suppression of up to a configured fraction of outlier rows.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import ConfigInvalid, Unsatisfiable
from .classical import GeneralizationHierarchy, generalize
from .tabular import Cell, Dataset, format_cell

LatticeNode = tuple[int, ...]


@dataclass(frozen=True)
class GeneralizationLattice:
    """Cross-product of per-quasi-identifier hierarchy levels."""

    quasi_identifiers: tuple[str, ...]
    heights: tuple[int, ...]

    def __post_init__(self):
        if len(self.quasi_identifiers) != len(self.heights):
            raise ConfigInvalid("one height per quasi-identifier required")
        if any(h < 1 for h in self.heights):
            raise ConfigInvalid("hierarchy heights must be >= 1")

    @property
    def node_count(self) -> int:
        return math.prod(h + 1 for h in self.heights)

    @property
    def bottom(self) -> LatticeNode:
        return (0,) * len(self.heights)

    @property
    def top(self) -> LatticeNode:
        return tuple(self.heights)

    def contains(self, node: LatticeNode) -> bool:
        return len(node) == len(self.heights) and all(
            0 <= level <= h for level, h in zip(node, self.heights)
        )

    def nodes(self):
        """All nodes in bottom-up breadth-first order: by level-sum, then lexicographic."""
        ranges = [range(h + 1) for h in self.heights]
        for node in sorted(itertools.product(*ranges), key=lambda n: (sum(n), n)):
            yield node


def loss_metric(node: LatticeNode, lattice: GeneralizationLattice) -> float:
    """Average normalized generalization level: 0 = raw data, 1 = all roots."""
    if not lattice.contains(node):
        raise ConfigInvalid(f"node {node!r} outside lattice bounds {lattice.heights!r}")
    m = len(lattice.heights)
    return sum(level / height for level, height in zip(node, lattice.heights)) / m


@dataclass(frozen=True)
class KAnonConfig:
    k: int
    suppression_limit: float = 0.0
    hierarchies: dict[str, GeneralizationHierarchy] = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigInvalid(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.suppression_limit <= 1.0:
            raise ConfigInvalid("suppression_limit must lie in [0, 1]")


@dataclass
class KAnonymityReport:
    k: int
    satisfied: bool
    min_class_size: int
    class_histogram: dict[int, int]
    suppressed_rows: int
    chosen_node: LatticeNode | None = None

    def to_json(self) -> dict:
        out = {
            "k": self.k,
            "satisfied": self.satisfied,
            "min_class_size": self.min_class_size,
            "histogram": {str(size): count for size, count in sorted(self.class_histogram.items())},
            "suppressed_rows": self.suppressed_rows,
        }
        if self.chosen_node is not None:
            out["chosen_node"] = list(self.chosen_node)
        return out


def equivalence_classes(dataset: Dataset, quasi_ids: list[str]) -> dict[tuple[Cell, ...], int]:
    """Class sizes keyed by the exact quasi-identifier tuple."""
    indices = [dataset.schema.index_of(name) for name in quasi_ids]
    sizes: dict[tuple[Cell, ...], int] = {}
    for row in dataset.rows:
        key = tuple(row[i] for i in indices)
        sizes[key] = sizes.get(key, 0) + 1
    return sizes


def _histogram(sizes) -> dict[int, int]:
    hist: dict[int, int] = {}
    for size in sizes:
        hist[size] = hist.get(size, 0) + 1
    return hist


def check_k_anonymity(dataset: Dataset, quasi_ids: list[str], k: int) -> KAnonymityReport:
    """Plain verification (no generalization, no suppression)."""
    classes = equivalence_classes(dataset, quasi_ids)
    min_size = min(classes.values()) if classes else 0
    return KAnonymityReport(
        k=k,
        satisfied=(not classes) or min_size >= k,
        min_class_size=min_size,
        class_histogram=_histogram(classes.values()),
        suppressed_rows=0,
    )


def _lattice_for(dataset: Dataset, config: KAnonConfig) -> GeneralizationLattice:
    quasi_ids = tuple(
        c.name
        for c in dataset.schema.columns
        if c.role.value == "quasi"
    )
    if not quasi_ids:
        raise ConfigInvalid("schema declares no quasi-identifier columns")
    missing = [q for q in quasi_ids if q not in config.hierarchies]
    if missing:
        raise ConfigInvalid(f"no hierarchy supplied for quasi-identifier(s) {missing!r}")
    heights = tuple(config.hierarchies[q].height for q in quasi_ids)
    return GeneralizationLattice(quasi_ids, heights)


class _NodeEvaluator:
    """Precomputes per-column, per-level generalized row vectors so each
    lattice node costs one pass over the rows."""

    def __init__(self, dataset: Dataset, config: KAnonConfig, lattice: GeneralizationLattice):
        self.k = config.k
        self.row_count = dataset.row_count
        # Tolerate float representation error at the budget boundary (1/6 * 6 < 1.0).
        self.budget = math.floor(config.suppression_limit * dataset.row_count + 1e-9)
        self._columns = []
        for name in lattice.quasi_identifiers:
            hierarchy = config.hierarchies[name]
            raw = [format_cell(v) for v in dataset.column_values(name)]
            per_level = [tuple(raw)]
            for level in range(1, hierarchy.height + 1):
                per_level.append(tuple(hierarchy.generalize_value(v, level) for v in raw))
            self._columns.append(per_level)

    def class_sizes(self, node: LatticeNode) -> dict[tuple[str, ...], int]:
        vectors = [col[level] for col, level in zip(self._columns, node)]
        sizes: dict[tuple[str, ...], int] = {}
        for key in zip(*vectors):
            sizes[key] = sizes.get(key, 0) + 1
        return sizes

    def admissible(self, node: LatticeNode) -> bool:
        """k-anonymous after suppressing at most the budgeted number of rows."""
        if self.row_count == 0:
            return True
        sizes = self.class_sizes(node)
        suppressed = sum(size for size in sizes.values() if size < self.k)
        return suppressed <= self.budget


def search_lattice(dataset: Dataset, config: KAnonConfig) -> LatticeNode:
    """Minimal-loss admissible node; ties broken by lexicographically
    smallest level vector.

    With suppression disabled the k-anonymity predicate is monotone in the
    lattice order, so every ancestor of an admissible node is skipped; with
    a positive suppression budget the predicate is not guaranteed monotone
    and the scan is exhaustive.
    """
    lattice = _lattice_for(dataset, config)
    evaluator = _NodeEvaluator(dataset, config, lattice)
    prune = config.suppression_limit == 0.0

    admissible: list[LatticeNode] = []
    for node in lattice.nodes():
        if prune and any(all(a <= b for a, b in zip(s, node)) for s in admissible):
            continue  # ancestor of an admissible node: admissible but strictly lossier
        if evaluator.admissible(node):
            admissible.append(node)
    if not admissible:
        raise Unsatisfiable(
            f"no generalization achieves {config.k}-anonymity within "
            f"suppression limit {config.suppression_limit}"
        )
    return min(admissible, key=lambda n: (loss_metric(n, lattice), n))


def generalize_to_node(
    dataset: Dataset, config: KAnonConfig, node: LatticeNode
) -> Dataset:
    """Apply each quasi-identifier's hierarchy at the node's level."""
    lattice = _lattice_for(dataset, config)
    out = dataset
    for name, level in zip(lattice.quasi_identifiers, node):
        out = generalize(out, name, config.hierarchies[name], level)
    return out


def anonymize_k(
    dataset: Dataset, config: KAnonConfig
) -> tuple[Dataset, LatticeNode, KAnonymityReport]:
    """Generalize at the search optimum and suppress the residual small classes.

    Returns the released dataset, the chosen lattice node, and a report whose
    histogram covers the released equivalence classes only.
    """
    node = search_lattice(dataset, config)
    generalized = generalize_to_node(dataset, config, node)
    quasi_ids = list(_lattice_for(dataset, config).quasi_identifiers)
    classes = equivalence_classes(generalized, quasi_ids)
    indices = [generalized.schema.index_of(name) for name in quasi_ids]

    released_rows = []
    for row in generalized.rows:
        key = tuple(row[i] for i in indices)
        if classes[key] >= config.k:
            released_rows.append(row)
    released = generalized.with_rows(released_rows)

    kept = {key: size for key, size in classes.items() if size >= config.k}
    report = KAnonymityReport(
        k=config.k,
        satisfied=True,
        min_class_size=min(kept.values()) if kept else 0,
        class_histogram=_histogram(kept.values()),
        suppressed_rows=dataset.row_count - len(released_rows),
        chosen_node=node,
    )
    return released, node, report
