"""Acceptance suite: one test per release criterion, at the stated tolerance.

Each test prints a single [PASS]/[FAIL] line (run with `pytest -s` to see
them on a green run).  Tolerances are pinned here and nowhere else.
"""

import math
import random
import secrets
import time

import numpy as np
import pytest

from spider_deid.classical import pseudonym
from spider_deid.dp import (
    DpQuery,
    PrivacyUnit,
    PrivacyUnitKind,
    QueryKind,
    laplace_samples,
    run_dp_query,
    sensitivity,
    tradeoff_curve,
)
from spider_deid.envelope import generate_keypair, open_envelope, seal
from spider_deid.errors import EnvelopeError, Unsatisfiable
from spider_deid.kanon import (
    GeneralizationLattice,
    KAnonConfig,
    anonymize_k,
    equivalence_classes,
    loss_metric,
    search_lattice,
)
from spider_deid.attestation import MessageBus, Tamper, run_session
from spider_deid.demo import build_demo_session

from conftest import make_dataset, make_schema, random_hierarchy
from oracles import enumerate_neighbors, exhaustive_min_loss, l1_distance, max_neighbor_l1


def _report(name: str, passed: bool, detail: str = "") -> None:
    tail = f": {detail}" if detail else ""
    print(f"\n[{'PASS' if passed else 'FAIL'}] {name}{tail}")


# --- shared DP fixtures -----------------------------------------------------------

USER_SCHEMA = make_schema(
    ("user", "direct", "categorical", True),
    ("grp", "quasi", "categorical"),
    ("val", "sensitive", "numeric"),
)

CANDIDATES = {"grp": ["a", "b", "c"], "val": [-5.0, 0.0, 5.0, 10.0, 99.0]}


def _dp_fixtures():
    """Small datasets: <= 6 rows, <= 3 users, varied contribution counts."""
    layouts = [
        [("u1", "a", 0.0), ("u1", "a", 0.0), ("u1", "a", -5.0),
         ("u2", "a", 10.0), ("u2", "b", 3.0), ("u3", "c", 7.0)],
        [("u1", "b", 10.0), ("u2", "b", 10.0), ("u3", "a", 0.0)],
        [("u1", "a", 5.0)],
        [],
        [("u1", "a", 99.0), ("u1", "b", -5.0), ("u2", "c", 0.0), ("u2", "c", 10.0)],
    ]
    return [make_dataset(USER_SCHEMA, rows) for rows in layouts]


def _dp_queries(eps=1.0):
    item = PrivacyUnit()
    user2 = PrivacyUnit(PrivacyUnitKind.USER, "user", 2)
    user3 = PrivacyUnit(PrivacyUnitKind.USER, "user", 3)
    out = []
    for unit in (item, user2, user3):
        out += [
            DpQuery(QueryKind.COUNT, eps, predicate=("grp", "a"), unit=unit),
            DpQuery(QueryKind.COUNT, eps, unit=unit),
            DpQuery(QueryKind.SUM, eps, value_column="val", clamp=(0.0, 10.0), unit=unit),
            DpQuery(QueryKind.MEAN, eps, value_column="val", clamp=(0.0, 10.0), unit=unit),
            DpQuery(QueryKind.HISTOGRAM, eps, group_by="grp", unit=unit),
        ]
    return out


# --- criteria ----------------------------------------------------------------------

def test_laplace_moments():
    """E|X| in [0.98, 1.02] and Var in [1.95, 2.05] at b=1, 10^6 samples, <5s."""
    start = time.perf_counter()
    samples = laplace_samples(1.0, np.random.default_rng(20240801), 1_000_000)
    mean_abs = float(np.mean(np.abs(samples)))
    variance = float(np.var(samples))
    elapsed = time.perf_counter() - start
    ok = 0.98 <= mean_abs <= 1.02 and 1.95 <= variance <= 2.05 and elapsed < 5.0
    _report("laplace moments", ok,
            f"E|X|={mean_abs:.4f}, Var={variance:.4f}, {elapsed:.2f}s")
    assert 0.98 <= mean_abs <= 1.02
    assert 1.95 <= variance <= 2.05
    assert elapsed < 5.0


def test_epsilon_dp_density_ratio():
    """Laplace density ratio at 1000 grid points never exceeds exp(eps)(1+1e-9)."""
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    eps = 0.8
    checked_pairs = 0
    worst = 0.0
    units = [PrivacyUnit(), PrivacyUnit(PrivacyUnitKind.USER, "user", 2)]
    for dataset in _dp_fixtures():
        for unit in units:
            queries = [
                DpQuery(QueryKind.COUNT, eps, predicate=("grp", "a"), unit=unit),
                DpQuery(QueryKind.SUM, eps, value_column="val", clamp=(0.0, 10.0), unit=unit),
                DpQuery(QueryKind.HISTOGRAM, eps, group_by="grp", unit=unit),
            ]
            for query in queries:
                delta = sensitivity(query).value
                scale = delta / eps
                pairs = list(enumerate_neighbors(dataset, query, CANDIDATES))[:30]
                for base, neighbor in pairs:
                    assert l1_distance(base, neighbor) <= delta + 1e-12
                    keys = sorted(set(base) | set(neighbor))
                    ca = np.array([base.get(k, 0.0) for k in keys])
                    cb = np.array([neighbor.get(k, 0.0) for k in keys])
                    lo = min(ca.min(), cb.min()) - 10 * scale
                    hi = max(ca.max(), cb.max()) + 10 * scale
                    grid = rng.uniform(lo, hi, size=(1000, len(keys)))
                    grid[0], grid[1] = ca, cb
                    log_ratio = np.sum((np.abs(grid - cb) - np.abs(grid - ca)) / scale, axis=1)
                    ratio = np.exp(log_ratio)
                    worst = max(worst, float(ratio.max() / math.exp(eps)))
                    assert np.all(ratio <= math.exp(eps) * (1 + 1e-9))
                    checked_pairs += 1
    elapsed = time.perf_counter() - start
    ok = elapsed < 10.0 and checked_pairs > 0
    _report("epsilon-DP density ratio", ok,
            f"{checked_pairs} neighbor pairs, worst ratio/exp(eps)={worst:.6f}, {elapsed:.2f}s")
    assert elapsed < 10.0


def test_sensitivity_oracle():
    """Enumerated neighbors never exceed sensitivity() for 4 kinds x 2 units."""
    start = time.perf_counter()
    checked = 0
    for dataset in _dp_fixtures():
        for query in _dp_queries():
            observed = max_neighbor_l1(dataset, query, CANDIDATES)
            assert observed <= sensitivity(query).value + 1e-12, (query.kind, query.unit)
            checked += 1
    elapsed = time.perf_counter() - start
    ok = elapsed < 30.0
    _report("sensitivity oracle", ok, f"{checked} (fixture, query) cases, {elapsed:.2f}s")
    assert elapsed < 30.0


def test_batching_invariance():
    """run_dp_query is bit-identical across batch sizes {1, 7, whole}, same seed."""
    rng = random.Random(42)
    checked = 0
    for i in range(50):
        n_rows = rng.randint(1, 40)
        rows = [
            (f"u{rng.randint(1, 5)}", rng.choice("abc"), rng.uniform(-30, 30))
            for _ in range(n_rows)
        ]
        dataset = make_dataset(USER_SCHEMA, rows)
        query = _dp_queries(eps=rng.choice([0.3, 1.0, 2.5]))[i % 15]
        seed = rng.getrandbits(63)
        outputs = []
        for batch_size in (1, 7, None):
            result = run_dp_query(dataset, query, seed, batch_size)
            outputs.append((result.raw, result.noisy, result.scale_b, result.bins))
        assert outputs[0] == outputs[1] == outputs[2], (i, query.kind)
        checked += 1
    _report("batching invariance", True, f"{checked} datasets x 3 batch sizes, bit-identical")


def _random_kanon_instance(rng: random.Random):
    n_qis = rng.randint(1, 3)
    schema = make_schema(*[(f"q{i}", "quasi", "categorical") for i in range(n_qis)])
    hierarchies = {}
    domains = []
    for i in range(n_qis):
        values = [f"v{j}" for j in range(rng.randint(2, 6))]
        domains.append(values)
        hierarchies[f"q{i}"] = random_hierarchy(f"q{i}", values, rng.randint(1, 3), rng)
    rows = [tuple(rng.choice(d) for d in domains) for _ in range(rng.randint(0, 200))]
    config = KAnonConfig(
        k=rng.randint(1, 5),
        suppression_limit=rng.choice([0.0, 0.0, 0.1, 0.3]),
        hierarchies=hierarchies,
    )
    return make_dataset(schema, rows), config


def test_kanon_search_oracle():
    """Search loss equals exhaustive minimum on 100 random instances; every
    released class reaches k.  <60s."""
    start = time.perf_counter()
    rng = random.Random(20240809)
    agreements = 0
    for _ in range(100):
        dataset, config = _random_kanon_instance(rng)
        best = exhaustive_min_loss(dataset, config)
        if best is None:
            with pytest.raises(Unsatisfiable):
                search_lattice(dataset, config)
            agreements += 1
            continue
        quasi = tuple(c.name for c in dataset.schema.columns)
        lattice = GeneralizationLattice(
            quasi, tuple(config.hierarchies[q].height for q in quasi)
        )
        released, node, report = anonymize_k(dataset, config)
        assert loss_metric(node, lattice) == pytest.approx(best[0]), (node, best)
        classes = equivalence_classes(released, list(quasi))
        assert all(size >= config.k for size in classes.values())
        assert sum(size * n for size, n in report.class_histogram.items()) == released.row_count
        agreements += 1
    elapsed = time.perf_counter() - start
    ok = agreements == 100 and elapsed < 60.0
    _report("k-anonymity search oracle", ok, f"{agreements}/100 instances, {elapsed:.2f}s")
    assert agreements == 100
    assert elapsed < 60.0


def test_envelope_roundtrips_and_bit_flips():
    """1000 random round-trips succeed; every single-bit flip fails to open."""
    keys = generate_keypair()
    rng = random.Random(7)
    for _ in range(1000):
        payload = secrets.token_bytes(rng.randint(0, 512))
        assert open_envelope(seal(payload, keys.public_key), keys.private_key) == payload

    blob = seal(b"abc", keys.public_key).to_bytes()
    flips = 0
    for byte_index in range(len(blob)):
        for bit in range(8):
            mutated = bytearray(blob)
            mutated[byte_index] ^= 1 << bit
            with pytest.raises(EnvelopeError):
                open_envelope(bytes(mutated), keys.private_key)
            flips += 1
    _report("envelope round-trip + tamper", True,
            f"1000 round-trips, {flips} bit flips all rejected")


ATTESTATION_TAMPER_CASES = {
    Tamper.FLIPPED_MEASUREMENT: (3, "bad_platform_signature"),
    Tamper.FORGED_MAA_SIGNATURE: (6, "bad_signature"),
    Tamper.EXPIRED_JWT: (6, "expired"),
    Tamper.WRONG_PCRS: (6, "pcr_mismatch"),
    Tamper.FORGED_RAT: (8, "bad_signature"),
    Tamper.WRONG_RAT_SCOPE: (8, "scope_mismatch"),
    Tamper.REPLAYED_NONCE: (3, "nonce_mismatch"),
}


def test_attestation_protocol():
    """Honest run: 11 ordered steps.  Seven tamper classes reject at their
    designated steps.  No message carries the planted plaintext marker."""
    marker = b"PLAINTEXT_MARKER_7f3a"
    csv = b"name,age,city,income\n" + b"PLAINTEXT_MARKER_7f3a,23,pune,1\n" * 4
    bus = MessageBus()
    transcript = run_session(build_demo_session(plaintext=csv), bus=bus)
    assert transcript.success
    assert [e.step for e in transcript.entries] == list(range(1, 12))
    assert all(marker not in message for message in bus.wire_log)

    rejections = []
    for tamper, (step, reason) in ATTESTATION_TAMPER_CASES.items():
        bus = MessageBus()
        result = run_session(build_demo_session(tamper=tamper, plaintext=csv), bus=bus)
        assert (result.rejected_step, result.rejected_reason) == (step, reason), tamper
        assert all(marker not in message for message in bus.wire_log)
        rejections.append(tamper.value)
    _report("attestation protocol", True,
            f"honest 11/11 steps; {len(rejections)} tamper classes rejected on target")


def test_pseudonymisation_reference_vectors():
    """SHA-256 of '' and 'abc' match the FIPS 180-4 reference digests."""
    empty_ok = (pseudonym("")
                == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")
    abc_ok = (pseudonym("abc")
              == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
    _report("pseudonymisation reference vectors", empty_ok and abc_ok)
    assert empty_ok and abc_ok


def test_tradeoff_curve_accuracy():
    """Empirical MAE within 5% of analytic Delta/eps at eps in {0.1,0.5,1,2}."""
    dataset = make_dataset(USER_SCHEMA, [("u1", "a", 1.0)] * 5)
    query = DpQuery(QueryKind.COUNT, 1.0, predicate=("grp", "a"))
    points = tradeoff_curve(dataset, query, [0.1, 0.5, 1.0, 2.0], trials=10_000, seed=6021)
    assert [p.analytic_mae for p in points] == [10.0, 2.0, 1.0, 0.5]
    deviations = [
        abs(p.empirical_mae - p.analytic_mae) / p.analytic_mae for p in points
    ]
    ok = all(d < 0.05 for d in deviations)
    _report("tradeoff curve accuracy", ok,
            "max deviation {:.2%} over eps grid {{0.1, 0.5, 1, 2}}".format(max(deviations)))
    assert ok
