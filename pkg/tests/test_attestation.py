import hashlib
import json

import pytest

from spider_deid.attestation import (
    EnclaveState,
    LoopbackTransport,
    MessageBus,
    PartyKeys,
    PolicyAllowlist,
    SigningKey,
    Tamper,
    apd_validate,
    encode_frame,
    generate_hardware_report,
    issue_rat,
    jwt_decode,
    jwt_encode,
    maa_verify_and_issue,
    measure_bundle,
    read_frame,
    resource_fetch,
    run_session,
    simulate_pcrs,
)
from spider_deid.demo import DEMO_RESOURCE_ID, build_demo_session
from spider_deid.envelope import generate_keypair, seal
from spider_deid.errors import (
    BadPlatformSignature,
    BadSignature,
    Expired,
    InvalidApproval,
    MeasurementNotAllowed,
    NonceMismatch,
    PcrMismatch,
    ScopeMismatch,
    UnknownResource,
)

NOW = 1_700_000_000.0


@pytest.fixture(scope="module")
def keys():
    return PartyKeys.generate()


@pytest.fixture(scope="module")
def enclave():
    measurement = measure_bundle(b"test application bundle")
    return EnclaveState(measurement, simulate_pcrs(measurement), generate_keypair())


@pytest.fixture
def report(keys, enclave):
    return generate_hardware_report(enclave, b"n" * 16, keys.platform)


@pytest.fixture
def allowlist(enclave):
    return PolicyAllowlist(frozenset({enclave.measurement}), enclave.pcrs)


# --- JWT pieces -------------------------------------------------------------

def test_jwt_roundtrip():
    key = SigningKey.generate()
    claims = {"iss": "x", "exp": 1}
    token = jwt_decode(jwt_encode(claims, key), key.public)
    assert token == claims


def test_jwt_rejects_wrong_key():
    token = jwt_encode({"a": 1}, SigningKey.generate())
    with pytest.raises(BadSignature):
        jwt_decode(token, SigningKey.generate().public)


def test_jwt_rejects_tampered_payload():
    key = SigningKey.generate()
    header, payload, sig = jwt_encode({"a": 1}, key).split(".")
    import base64

    other = base64.urlsafe_b64encode(b'{"a":2}').rstrip(b"=").decode()
    with pytest.raises(BadSignature):
        jwt_decode(f"{header}.{other}.{sig}", key.public)


# --- hardware report / MAA -----------------------------------------------------

def test_report_measurement_deterministic():
    assert measure_bundle(b"bundle") == measure_bundle(b"bundle")
    assert len(measure_bundle(b"bundle")) == 48


def test_report_binds_nonce(keys, enclave):
    a = generate_hardware_report(enclave, b"a" * 16, keys.platform)
    b = generate_hardware_report(enclave, b"b" * 16, keys.platform)
    assert a.platform_signature != b.platform_signature


def test_maa_issues_token_echoing_report(keys, report):
    token = maa_verify_and_issue(report, b"n" * 16, keys.maa, keys.platform.public, NOW)
    claims = jwt_decode(token, keys.maa.public)
    assert claims["iss"] == "maa-sim"
    assert claims["measurement"] == report.measurement.hex()
    assert claims["pcrs"] == [p.hex() for p in report.pcr_values]
    assert claims["vm_pubkey_fpr"] == report.vm_public_key_fingerprint.hex()
    assert claims["exp"] == claims["iat"] + 300


def test_maa_rejects_flipped_measurement(keys, report):
    from spider_deid.attestation import HardwareReport

    flipped = HardwareReport(
        bytes([report.measurement[0] ^ 1]) + report.measurement[1:],
        report.pcr_values,
        report.vm_public_key_fingerprint,
        report.nonce,
        report.platform_signature,
    )
    with pytest.raises(BadPlatformSignature):
        maa_verify_and_issue(flipped, b"n" * 16, keys.maa, keys.platform.public, NOW)


def test_maa_rejects_stale_nonce(keys, report):
    with pytest.raises(NonceMismatch):
        maa_verify_and_issue(report, b"other nonce 1234", keys.maa, keys.platform.public, NOW)


def test_maa_rejects_replayed_nonce(keys, report):
    seen = set()
    maa_verify_and_issue(report, b"n" * 16, keys.maa, keys.platform.public, NOW, seen)
    with pytest.raises(NonceMismatch):
        maa_verify_and_issue(report, b"n" * 16, keys.maa, keys.platform.public, NOW, seen)


# --- APD / AS / resource server ----------------------------------------------------

def _token(keys, report):
    return maa_verify_and_issue(report, b"n" * 16, keys.maa, keys.platform.public, NOW)


def test_apd_approves_allowlisted(keys, report, allowlist):
    approval = apd_validate(_token(keys, report), allowlist, NOW + 10,
                            keys.maa.public, keys.apd, "sess-1")
    claims = jwt_decode(approval, keys.apd.public)
    assert claims["sub"] == "sess-1"


def test_apd_rejects_unknown_measurement(keys, report):
    rogue = PolicyAllowlist(frozenset({b"m" * 48}), report.pcr_values)
    with pytest.raises(MeasurementNotAllowed):
        apd_validate(_token(keys, report), rogue, NOW, keys.maa.public, keys.apd, "s")


def test_apd_rejects_wrong_pcrs(keys, report, enclave):
    rogue = PolicyAllowlist(
        frozenset({enclave.measurement}),
        tuple(hashlib.sha256(b"x" + p).digest() for p in enclave.pcrs),
    )
    with pytest.raises(PcrMismatch):
        apd_validate(_token(keys, report), rogue, NOW, keys.maa.public, keys.apd, "s")


def test_apd_rejects_expired(keys, report, allowlist):
    with pytest.raises(Expired):
        apd_validate(_token(keys, report), allowlist, NOW + 301,
                     keys.maa.public, keys.apd, "s")


def test_apd_rejects_forged_signature(keys, report, allowlist):
    with pytest.raises(BadSignature):
        apd_validate(_token(keys, report), allowlist, NOW,
                     SigningKey.generate().public, keys.apd, "s")


def test_issue_rat_scope_and_expiry(keys, report, allowlist):
    approval = apd_validate(_token(keys, report), allowlist, NOW,
                            keys.maa.public, keys.apd, "sess-2")
    rat = issue_rat(approval, "ds-1", keys.auth_server, keys.apd.public, NOW)
    claims = jwt_decode(rat, keys.auth_server.public)
    assert claims == {
        "iss": "as-sim", "sub": "sess-2", "scope": "ds-1",
        "iat": int(NOW), "exp": int(NOW) + 300,
    }


def test_issue_rat_rejects_tampered_approval(keys):
    forged = jwt_encode({"iss": "apd-sim", "sub": "s", "exp": NOW + 60},
                        SigningKey.generate())
    with pytest.raises(InvalidApproval):
        issue_rat(forged, "ds-1", keys.auth_server, keys.apd.public, NOW)


def _rat(keys, report, allowlist, scope="ds-1"):
    approval = apd_validate(_token(keys, report), allowlist, NOW,
                            keys.maa.public, keys.apd, "sess")
    return issue_rat(approval, scope, keys.auth_server, keys.apd.public, NOW)


def test_resource_fetch_happy_path(keys, report, allowlist):
    store = {"ds-1": b"envelope-bytes"}
    rat = _rat(keys, report, allowlist)
    assert resource_fetch(rat, "ds-1", store, keys.auth_server.public, NOW) == b"envelope-bytes"


def test_resource_fetch_scope_mismatch(keys, report, allowlist):
    rat = _rat(keys, report, allowlist, scope="ds-1")
    with pytest.raises(ScopeMismatch):
        resource_fetch(rat, "ds-2", {"ds-2": b"x"}, keys.auth_server.public, NOW)


def test_resource_fetch_expired(keys, report, allowlist):
    rat = _rat(keys, report, allowlist)
    with pytest.raises(Expired):
        resource_fetch(rat, "ds-1", {"ds-1": b"x"}, keys.auth_server.public, NOW + 400)


def test_resource_fetch_unknown_resource(keys, report, allowlist):
    rat = _rat(keys, report, allowlist)
    with pytest.raises(UnknownResource):
        resource_fetch(rat, "ds-1", {}, keys.auth_server.public, NOW)


def test_token_hygiene_cross_issuer(keys, report, allowlist):
    """A RAT cannot pass where a MAA token is expected and vice versa."""
    rat = _rat(keys, report, allowlist)
    with pytest.raises(BadSignature):
        apd_validate(rat, allowlist, NOW, keys.maa.public, keys.apd, "s")
    token = _token(keys, report)
    with pytest.raises(BadSignature):
        resource_fetch(token, "ds-1", {"ds-1": b"x"}, keys.auth_server.public, NOW)


# --- full sessions ---------------------------------------------------------------------

def test_honest_session_eleven_ordered_steps():
    transcript = run_session(build_demo_session())
    assert transcript.success
    assert [e.step for e in transcript.entries] == list(range(1, 12))
    obj = transcript.to_json()
    assert obj["outcome"] == {"status": "success"}
    assert [e["step"] for e in obj["steps"]] == list(range(1, 12))


TAMPER_EXPECTATIONS = {
    Tamper.FLIPPED_MEASUREMENT: (3, "bad_platform_signature"),
    Tamper.FORGED_MAA_SIGNATURE: (6, "bad_signature"),
    Tamper.EXPIRED_JWT: (6, "expired"),
    Tamper.WRONG_PCRS: (6, "pcr_mismatch"),
    Tamper.FORGED_RAT: (8, "bad_signature"),
    Tamper.WRONG_RAT_SCOPE: (8, "scope_mismatch"),
    Tamper.REPLAYED_NONCE: (3, "nonce_mismatch"),
    Tamper.MEASUREMENT_NOT_ALLOWED: (6, "measurement_not_allowed"),
    Tamper.WRONG_ENVELOPE_RECIPIENT: (10, "authentication_failure"),
}


@pytest.mark.parametrize("tamper", list(TAMPER_EXPECTATIONS))
def test_tampered_sessions_reject_at_designated_step(tamper):
    step, reason = TAMPER_EXPECTATIONS[tamper]
    transcript = run_session(build_demo_session(tamper=tamper))
    assert not transcript.success
    assert transcript.rejected_step == step
    assert transcript.rejected_reason == reason
    assert all(e.step < step or e.step == step for e in transcript.entries)


def test_rejected_session_short_circuits():
    transcript = run_session(build_demo_session(tamper=Tamper.EXPIRED_JWT))
    assert [e.step for e in transcript.entries] == [1, 2, 3, 4, 5]


def test_store_sealed_to_wrong_key_rejects_at_step_10():
    """End-to-end recipient mismatch: fingerprint spoofed onto a foreign seal."""
    config = build_demo_session()
    rogue = generate_keypair()
    foreign = bytearray(seal(b"name,age\n", rogue.public_key).to_bytes())
    foreign[5:37] = config.enclave.encryption_keys.fingerprint
    config.resource_store[DEMO_RESOURCE_ID] = bytes(foreign)
    transcript = run_session(config)
    assert (transcript.rejected_step, transcript.rejected_reason) == (10, "authentication_failure")


def test_no_plaintext_marker_in_any_message():
    marker = b"PLAINTEXT_MARKER_7f3a"
    csv = b"name,age,city,income\n" + b"PLAINTEXT_MARKER_7f3a,23,pune,1\n" * 4
    config = build_demo_session(plaintext=csv)
    bus = MessageBus()
    transcript = run_session(config, bus=bus)
    assert transcript.success
    for message in bus.wire_log:
        assert marker not in message
    assert marker not in json.dumps(transcript.to_json()).encode()


def test_transcript_timestamps_monotonic():
    ticks = iter(range(100))

    def clock():
        return 1000.0 + next(ticks)

    config = build_demo_session(clock=clock)
    transcript = run_session(config)
    times = [e.timestamp for e in transcript.entries]
    assert times == sorted(times)


def test_session_output_opens_for_provider_only():
    config = build_demo_session()
    run_session(config)
    output_bytes, report = config.output_sink[DEMO_RESOURCE_ID]
    assert report["path"] == "kanon"
    assert report["k_report"]["satisfied"] is True
    from spider_deid.errors import EnvelopeError
    with pytest.raises(EnvelopeError):
        from spider_deid.envelope import open_envelope
        open_envelope(output_bytes, config.enclave.encryption_keys.private_key)


def test_trust_store_lists_base64_keys_per_party():
    import base64

    keys = PartyKeys.generate()
    store = keys.trust_store()
    assert set(store) == {"platform", "maa", "auth_server", "apd"}
    assert base64.b64decode(store["maa"]) == keys.maa.public


# --- wire framing -----------------------------------------------------------------------

def test_frame_roundtrip():
    import io

    payload = b'{"step":1}'
    framed = encode_frame(payload)
    assert framed[:4] == (len(payload)).to_bytes(4, "big")
    assert read_frame(io.BytesIO(framed)) == payload


def test_session_over_loopback_socket_transport():
    transport = LoopbackTransport()
    try:
        bus = MessageBus(transport)
        transcript = run_session(build_demo_session(), bus=bus)
        assert transcript.success
        assert len(bus.wire_log) == 11
        for message in bus.wire_log:
            parsed = json.loads(message)
            assert set(parsed) == {"session_id", "step", "type", "body"}
    finally:
        transport.close()
