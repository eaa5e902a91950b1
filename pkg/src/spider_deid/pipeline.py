"""Pipeline orchestration: run configuration, the two release paths, and
encrypted input/output.

A run opens the sealed input, applies the classical operations in a fixed
order (suppress, pseudonymize, generalize), then either releases the whole
dataset k-anonymised or releases noisy query answers, and seals the result
to the provider's key.  All intermediates stay in memory; reports carry
released (noisy) values only, never plaintext or pre-noise aggregates.
"""

from __future__ import annotations

import base64
import json
import secrets
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from .classical import (
    GeneralizationHierarchy,
    generalize,
    hierarchy_from_csv,
    pseudonymize,
    suppress,
)
from .dp import DpQuery, query_from_json, run_dp_query, tradeoff_curve
from .envelope import Envelope, KeyPair, open_envelope, seal
from .errors import ConfigInvalid
from .kanon import KAnonConfig, anonymize_k
from .tabular import (
    AttributeSchema,
    Dataset,
    load_dataset,
    schema_from_json,
    serialize_dataset,
)


@dataclass(frozen=True)
class GeneralizeStep:
    column: str
    hierarchy: str
    level: int


@dataclass(frozen=True)
class ClassicalOps:
    suppress: tuple[str, ...] = ()
    pseudonymize: tuple[str, ...] = ()
    pseudonymize_salt: bytes | None = None
    generalize: tuple[GeneralizeStep, ...] = ()


@dataclass
class PipelineConfig:
    schema: AttributeSchema
    classical: ClassicalOps = ClassicalOps()
    hierarchies: dict[str, GeneralizationHierarchy] = field(default_factory=dict)
    kanon: KAnonConfig | None = None
    dp_queries: list[DpQuery] | None = None
    batch_size: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if (self.kanon is None) == (self.dp_queries is None):
            raise ConfigInvalid(
                "exactly one release path required: k-anonymised dataset or DP query list"
            )
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigInvalid(f"batch_size must be >= 1, got {self.batch_size}")


def parse_pipeline_config(obj: dict) -> PipelineConfig:
    if "schema" not in obj:
        raise ConfigInvalid("pipeline config requires a schema")
    schema = schema_from_json(obj["schema"])

    hierarchies = {
        name: hierarchy_from_csv(name, text)
        for name, text in (obj.get("hierarchies") or {}).items()
    }

    classical_obj = obj.get("classical") or {}
    pseud = classical_obj.get("pseudonymize") or {}
    if isinstance(pseud, list):
        pseud = {"columns": pseud}
    salt = base64.b64decode(pseud["salt"]) if pseud.get("salt") else None
    steps = tuple(
        GeneralizeStep(g["column"], g.get("hierarchy", g["column"]), int(g["level"]))
        for g in classical_obj.get("generalize") or []
    )
    classical = ClassicalOps(
        suppress=tuple(classical_obj.get("suppress") or []),
        pseudonymize=tuple(pseud.get("columns") or []),
        pseudonymize_salt=salt,
        generalize=steps,
    )

    release = obj.get("release") or {}
    if ("kanon" in release) == ("dp" in release):
        raise ConfigInvalid("release must select exactly one of 'kanon' or 'dp'")

    kanon = None
    dp_queries = None
    if "kanon" in release:
        entry = release["kanon"]
        refs = entry.get("hierarchies") or {}
        quasi = [c.name for c in schema.columns if c.role.value == "quasi"]
        resolved = {}
        for column in quasi:
            name = refs.get(column, column)
            if name not in hierarchies:
                raise ConfigInvalid(
                    f"no hierarchy named {name!r} for quasi-identifier {column!r}"
                )
            resolved[column] = hierarchies[name]
        kanon = KAnonConfig(
            k=int(entry["k"]),
            suppression_limit=float(entry.get("suppression_limit", 0.0)),
            hierarchies=resolved,
        )
    else:
        dp_queries = [query_from_json(q) for q in release["dp"]]
        if not dp_queries:
            raise ConfigInvalid("dp release path requires at least one query")

    return PipelineConfig(
        schema=schema,
        classical=classical,
        hierarchies=hierarchies,
        kanon=kanon,
        dp_queries=dp_queries,
        batch_size=int(obj["batch_size"]) if obj.get("batch_size") is not None else None,
        seed=int(obj["seed"]) if obj.get("seed") is not None else None,
    )


@dataclass
class RunReport:
    run_id: str
    path: str
    k_report: dict | None = None
    dp_results: list[dict] | None = None
    tradeoff: list[dict] | None = None
    timings_ms: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"run_id": self.run_id, "path": self.path, "timings_ms": self.timings_ms}
        if self.k_report is not None:
            out["k_report"] = self.k_report
        if self.dp_results is not None:
            out["dp_results"] = self.dp_results
        if self.tradeoff is not None:
            out["tradeoff"] = self.tradeoff
        return out


def _apply_classical(dataset: Dataset, config: PipelineConfig) -> Dataset:
    ops = config.classical
    if ops.suppress:
        dataset = suppress(dataset, list(ops.suppress))
    if ops.pseudonymize:
        dataset = pseudonymize(dataset, list(ops.pseudonymize), ops.pseudonymize_salt)
    for step in ops.generalize:
        if step.hierarchy not in config.hierarchies:
            raise ConfigInvalid(f"no hierarchy named {step.hierarchy!r}")
        dataset = generalize(dataset, step.column, config.hierarchies[step.hierarchy], step.level)
    return dataset


def _query_seeds(seed: int | None, n: int) -> list[int]:
    if seed is None:
        seed = secrets.randbits(63)  # production default: platform entropy
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, np.uint64)]


def run_pipeline(
    config: PipelineConfig,
    input_envelope: Envelope | bytes,
    enclave_keys: KeyPair,
    provider_public_key: bytes,
) -> tuple[Envelope, RunReport]:
    """Open, de-identify, release, re-seal.  Returns the sealed output and a
    report free of plaintext and pre-noise values."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    plaintext = open_envelope(input_envelope, enclave_keys.private_key)
    timings["open_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    dataset = load_dataset(plaintext, config.schema)
    timings["load_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    dataset = _apply_classical(dataset, config)
    timings["classical_ms"] = (time.perf_counter() - t0) * 1000

    report = RunReport(run_id=uuid.uuid4().hex, path="kanon" if config.kanon else "dp")
    t0 = time.perf_counter()
    if config.kanon is not None:
        released, _node, k_report = anonymize_k(dataset, config.kanon)
        payload = serialize_dataset(released)
        report.k_report = k_report.to_json()
    else:
        seeds = _query_seeds(config.seed, len(config.dp_queries))
        results = [
            run_dp_query(dataset, query, seed, config.batch_size)
            for query, seed in zip(config.dp_queries, seeds)
        ]
        report.dp_results = [r.released_json() for r in results]
        payload = json.dumps({"results": report.dp_results}, indent=2).encode("utf-8")
    timings["release_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    output = seal(payload, provider_public_key)
    timings["seal_ms"] = (time.perf_counter() - t0) * 1000
    report.timings_ms = timings
    return output, report


def run_pipeline_json(
    config_json: dict,
    envelope_bytes: bytes,
    enclave_keys: KeyPair,
    provider_public_key: bytes,
) -> tuple[bytes, dict]:
    """Wire-format variant used by the attestation simulator's step 10."""
    config = parse_pipeline_config(config_json)
    output, report = run_pipeline(config, envelope_bytes, enclave_keys, provider_public_key)
    return output.to_bytes(), report.to_json()


def tradeoff_from_json(dataset: Dataset, obj: dict) -> list[dict]:
    """Shared request shape for the tradeoff endpoint and CLI."""
    query = query_from_json(obj["query"])
    epsilons = [float(e) for e in obj.get("epsilons") or []]
    trials = int(obj.get("trials", 1000))
    seed = int(obj["seed"]) if obj.get("seed") is not None else secrets.randbits(63)
    points = tradeoff_curve(
        dataset, query, epsilons, trials, seed,
        batch_size=int(obj["batch_size"]) if obj.get("batch_size") is not None else None,
    )
    return [p.to_json() for p in points]
