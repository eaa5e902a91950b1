import random

import pytest

from spider_deid.classical import GeneralizationHierarchy, hierarchy_from_csv
from spider_deid.tabular import (
    AttributeRole,
    AttributeSchema,
    Column,
    ColumnKind,
    Dataset,
)


def make_schema(*cols) -> AttributeSchema:
    """cols: (name, role, kind[, user_id]) tuples with short role/kind strings."""
    out = []
    for col in cols:
        name, role, kind = col[:3]
        user_id = col[3] if len(col) > 3 else False
        out.append(Column(name, AttributeRole(role), ColumnKind(kind), user_id))
    return AttributeSchema(tuple(out))


def make_dataset(schema: AttributeSchema, rows) -> Dataset:
    return Dataset(schema, tuple(tuple(row) for row in rows))


@pytest.fixture
def people_schema():
    return make_schema(
        ("name", "direct", "categorical"),
        ("age", "quasi", "numeric"),
        ("city", "quasi", "categorical"),
        ("income", "sensitive", "numeric"),
    )


@pytest.fixture
def people(people_schema):
    return make_dataset(
        people_schema,
        [
            ("alice", 23.0, "pune", 120.0),
            ("bob", 27.0, "pune", 95.0),
            ("carol", 23.0, "delhi", 110.0),
            ("dave", 35.0, "delhi", 150.0),
            ("erin", 36.0, "pune", 80.0),
            ("frank", 27.0, "delhi", 130.0),
        ],
    )


# Three-level age ladder: decades, halves of the century, root.
AGE_HIERARCHY_CSV = "\n".join(
    f"{age},{age // 10 * 10}-{age // 10 * 10 + 9},{'0-49' if age < 50 else '50-99'},*"
    for age in range(0, 100)
)

CITY_HIERARCHY_CSV = "pune,west,*\ndelhi,north,*\nmumbai,west,*\nchennai,south,*\n"


@pytest.fixture
def age_hierarchy() -> GeneralizationHierarchy:
    return hierarchy_from_csv("age", AGE_HIERARCHY_CSV)


@pytest.fixture
def city_hierarchy() -> GeneralizationHierarchy:
    return hierarchy_from_csv("city", CITY_HIERARCHY_CSV)


def random_hierarchy(column: str, values: list[str], height: int,
                     rng: random.Random) -> GeneralizationHierarchy:
    """Random functional hierarchy: each level merges values into fewer buckets."""
    levels: dict[str, list[str]] = {v: [] for v in values}
    current = {v: v for v in values}  # value -> its bucket at the previous level
    for level in range(1, height + 1):
        if level == height:
            buckets = {b: "*" for b in set(current.values())}
        else:
            distinct = sorted(set(current.values()))
            n_buckets = max(1, len(distinct) // 2)
            buckets = {b: f"L{level}g{rng.randrange(n_buckets)}" for b in distinct}
        for v in values:
            current[v] = buckets[current[v]]
            levels[v].append(current[v])
    return GeneralizationHierarchy(column, height, {v: tuple(l) for v, l in levels.items()})
