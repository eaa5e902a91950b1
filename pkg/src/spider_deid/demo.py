"""Self-contained demo assets for the attestation flow.

Builds a complete five-party session in memory: fresh keys for every
party, a small fixture dataset sealed to the enclave, an allowlist pinned
to the simulated enclave measurement, and a k-anonymisation pipeline
config.  Used by the `attest-demo` CLI command and the attestation
endpoint of the service.
"""

from __future__ import annotations

from typing import Callable

from .attestation import (
    EnclaveState,
    PartyKeys,
    PolicyAllowlist,
    SessionConfig,
    Tamper,
    measure_bundle,
    simulate_pcrs,
)
from .envelope import generate_keypair, seal

DEMO_RESOURCE_ID = "demo-dataset"

DEMO_BUNDLE = b"spider-deid demo application bundle v1"

DEMO_CSV = (
    "name,age,city,income\n"
    "alice,23,pune,120\n"
    "bob,27,pune,95\n"
    "carol,23,delhi,110\n"
    "dave,35,delhi,150\n"
    "erin,36,pune,80\n"
    "frank,27,delhi,130\n"
).encode("utf-8")

DEMO_AGE_HIERARCHY = (
    "23,20-29,*\n"
    "27,20-29,*\n"
    "35,30-39,*\n"
    "36,30-39,*\n"
)

DEMO_CITY_HIERARCHY = (
    "pune,*\n"
    "delhi,*\n"
)

DEMO_PIPELINE_CONFIG = {
    "schema": {
        "columns": [
            {"name": "name", "role": "direct", "kind": "categorical"},
            {"name": "age", "role": "quasi", "kind": "numeric"},
            {"name": "city", "role": "quasi", "kind": "categorical"},
            {"name": "income", "role": "sensitive", "kind": "numeric"},
        ]
    },
    "classical": {"suppress": ["name"]},
    "hierarchies": {"age": DEMO_AGE_HIERARCHY, "city": DEMO_CITY_HIERARCHY},
    "release": {"kanon": {"k": 2, "suppression_limit": 0.0}},
}


def build_demo_session(
    tamper: Tamper | str | None = None,
    clock: Callable[[], float] | None = None,
    plaintext: bytes = DEMO_CSV,
    pipeline_config: dict | None = None,
) -> SessionConfig:
    if isinstance(tamper, str):
        tamper = Tamper(tamper)
    keys = PartyKeys.generate()
    enclave_keys = generate_keypair()
    provider_keys = generate_keypair()
    measurement = measure_bundle(DEMO_BUNDLE)
    enclave = EnclaveState(measurement, simulate_pcrs(measurement), enclave_keys)
    allowlist = PolicyAllowlist(
        allowed_measurements=frozenset({measurement}),
        allowed_pcrs=enclave.pcrs,
    )
    store = {DEMO_RESOURCE_ID: seal(plaintext, enclave_keys.public_key).to_bytes()}
    return SessionConfig(
        keys=keys,
        enclave=enclave,
        provider_public_key=provider_keys.public_key,
        allowlist=allowlist,
        resource_store=store,
        resource_id=DEMO_RESOURCE_ID,
        pipeline_config=pipeline_config or DEMO_PIPELINE_CONFIG,
        clock=clock,
        tamper=tamper,
        output_sink={},
    )
