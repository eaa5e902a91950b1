"""Simulated five-party attestation and execution control flow.

The eleven numbered protocol steps run between data provider, enclave
manager, guest-attestation library, attestation service stub ("maa-sim"),
auth server ("as-sim"), access policy domain, resource server, and the
enclave itself.  Cloud attestation services and SEV-SNP hardware are
replaced by Ed25519 signatures over an explicit trust store; every
verification a real deployment would perform (platform signature, token
signatures, expiry, policy allowlists, token scopes) is performed for real
here.  Transport security (TLS) is out of scope: the optional loopback
transport marks where it would terminate.
"""

from __future__ import annotations

import base64
import hashlib
import json
import secrets
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .envelope import KeyPair, RandBytes
from .errors import (
    AttestationError,
    BadPlatformSignature,
    BadSignature,
    Expired,
    InvalidApproval,
    MeasurementNotAllowed,
    NonceMismatch,
    PcrMismatch,
    ScopeMismatch,
    SpiderError,
    UnknownResource,
)

TOKEN_LIFETIME_S = 300
MEASUREMENT_LEN = 48
PCR_COUNT = 4
NONCE_LEN = 16

MAA_ISSUER = "maa-sim"
AS_ISSUER = "as-sim"
APD_ISSUER = "apd-sim"


# --- signing primitives -------------------------------------------------------

def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _unb64(text: str) -> bytes:
    padded = text + "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(padded)


@dataclass(frozen=True)
class SigningKey:
    """Ed25519 signing pair (raw 32-byte keys)."""

    private: bytes
    public: bytes

    @classmethod
    def generate(cls, rand_bytes: RandBytes | None = None) -> "SigningKey":
        raw = rand_bytes(32) if rand_bytes else secrets.token_bytes(32)
        secret = Ed25519PrivateKey.from_private_bytes(raw)
        return cls(raw, secret.public_key().public_bytes_raw())

    def sign(self, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(self.private).sign(message)


def verify_signature(public: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        return True
    except InvalidSignature:
        return False


def jwt_encode(claims: dict, key: SigningKey) -> str:
    header = {"alg": "EdDSA", "typ": "JWT"}
    signing_input = (
        _b64(json.dumps(header, separators=(",", ":")).encode())
        + "."
        + _b64(json.dumps(claims, separators=(",", ":")).encode())
    )
    return signing_input + "." + _b64(key.sign(signing_input.encode("ascii")))


def jwt_decode(token: str, public: bytes) -> dict:
    """Verify the signature and return the claims; no expiry checks here."""
    parts = token.split(".")
    if len(parts) != 3:
        raise BadSignature("malformed token")
    signing_input = (parts[0] + "." + parts[1]).encode("ascii")
    if not verify_signature(public, _unb64(parts[2]), signing_input):
        raise BadSignature("token signature does not verify under the expected issuer key")
    return json.loads(_unb64(parts[1]))


AttestationToken = str  # JWT issued by the attestation service
Approval = str  # JWT issued by the access policy domain
ResourceAccessToken = str  # JWT issued by the auth server


# --- hardware report ------------------------------------------------------------

def measure_bundle(bundle: bytes) -> bytes:
    """Simulated launch digest of an application bundle (48 bytes)."""
    return hashlib.sha384(bundle).digest()


def simulate_pcrs(measurement: bytes, count: int = PCR_COUNT) -> tuple[bytes, ...]:
    """Deterministic stand-ins for boot-time register values."""
    return tuple(
        hashlib.sha256(b"pcr" + bytes([i]) + measurement).digest() for i in range(count)
    )


@dataclass(frozen=True)
class EnclaveState:
    measurement: bytes
    pcrs: tuple[bytes, ...]
    encryption_keys: KeyPair

    def __post_init__(self):
        if len(self.measurement) != MEASUREMENT_LEN:
            raise AttestationError(f"measurement must be {MEASUREMENT_LEN} bytes")


@dataclass(frozen=True)
class HardwareReport:
    measurement: bytes
    pcr_values: tuple[bytes, ...]
    vm_public_key_fingerprint: bytes
    nonce: bytes
    platform_signature: bytes

    def signed_payload(self) -> bytes:
        parts = [self.measurement, struct.pack(">I", len(self.pcr_values))]
        parts += list(self.pcr_values)
        parts += [self.vm_public_key_fingerprint, self.nonce]
        return b"".join(parts)

    def to_json(self) -> dict:
        return {
            "measurement": self.measurement.hex(),
            "pcrs": [p.hex() for p in self.pcr_values],
            "vm_pubkey_fpr": self.vm_public_key_fingerprint.hex(),
            "nonce": self.nonce.hex(),
            "platform_signature": self.platform_signature.hex(),
        }


def report_from_json(obj: dict) -> HardwareReport:
    return HardwareReport(
        measurement=bytes.fromhex(obj["measurement"]),
        pcr_values=tuple(bytes.fromhex(p) for p in obj["pcrs"]),
        vm_public_key_fingerprint=bytes.fromhex(obj["vm_pubkey_fpr"]),
        nonce=bytes.fromhex(obj["nonce"]),
        platform_signature=bytes.fromhex(obj["platform_signature"]),
    )


def generate_hardware_report(
    state: EnclaveState, nonce: bytes, platform_key: SigningKey
) -> HardwareReport:
    """Bind nonce, measurement, PCRs and the VM key under the platform signature."""
    unsigned = HardwareReport(
        measurement=state.measurement,
        pcr_values=state.pcrs,
        vm_public_key_fingerprint=state.encryption_keys.fingerprint,
        nonce=nonce,
        platform_signature=b"",
    )
    signature = platform_key.sign(unsigned.signed_payload())
    return HardwareReport(
        unsigned.measurement,
        unsigned.pcr_values,
        unsigned.vm_public_key_fingerprint,
        unsigned.nonce,
        signature,
    )


# --- verifier parties ------------------------------------------------------------

def maa_verify_and_issue(
    report: HardwareReport,
    expected_nonce: bytes,
    maa_key: SigningKey,
    platform_public: bytes,
    now: float,
    seen_nonces: set[bytes] | None = None,
) -> AttestationToken:
    """Attestation service stub: verify the platform report, issue a JWT."""
    if not verify_signature(platform_public, report.platform_signature, report.signed_payload()):
        raise BadPlatformSignature("hardware report signature does not verify")
    if report.nonce != expected_nonce:
        raise NonceMismatch("report nonce does not match the challenge")
    if seen_nonces is not None:
        if report.nonce in seen_nonces:
            raise NonceMismatch("nonce was already used in a previous attestation")
        seen_nonces.add(report.nonce)
    iat = int(now)
    claims = {
        "iss": MAA_ISSUER,
        "iat": iat,
        "exp": iat + TOKEN_LIFETIME_S,
        "nonce": report.nonce.hex(),
        "pcrs": [p.hex() for p in report.pcr_values],
        "measurement": report.measurement.hex(),
        "vm_pubkey_fpr": report.vm_public_key_fingerprint.hex(),
    }
    return jwt_encode(claims, maa_key)


@dataclass(frozen=True)
class PolicyAllowlist:
    allowed_measurements: frozenset[bytes]
    allowed_pcrs: tuple[bytes, ...]
    max_token_age: int = TOKEN_LIFETIME_S

    def __post_init__(self):
        if not self.allowed_measurements:
            raise AttestationError("allowlist must contain at least one measurement")


def apd_validate(
    token: AttestationToken,
    allowlist: PolicyAllowlist,
    now: float,
    maa_public: bytes,
    apd_key: SigningKey,
    session_id: str,
) -> Approval:
    """Policy check: token authenticity, freshness, measurement and PCRs."""
    claims = jwt_decode(token, maa_public)
    if claims.get("iss") != MAA_ISSUER:
        raise BadSignature(f"unexpected token issuer {claims.get('iss')!r}")
    if now > claims["exp"] or now - claims["iat"] > allowlist.max_token_age:
        raise Expired("attestation token is no longer fresh")
    measurement = bytes.fromhex(claims["measurement"])
    if measurement not in allowlist.allowed_measurements:
        raise MeasurementNotAllowed(f"measurement {measurement.hex()[:16]}... is not allowlisted")
    pcrs = tuple(bytes.fromhex(p) for p in claims["pcrs"])
    if pcrs != allowlist.allowed_pcrs:
        raise PcrMismatch("PCR values do not match the expected configuration")
    iat = int(now)
    approval_claims = {
        "iss": APD_ISSUER,
        "sub": session_id,
        "iat": iat,
        "exp": iat + TOKEN_LIFETIME_S,
        "vm_pubkey_fpr": claims["vm_pubkey_fpr"],
    }
    return jwt_encode(approval_claims, apd_key)


def issue_rat(
    approval: Approval,
    resource_id: str,
    as_key: SigningKey,
    apd_public: bytes,
    now: float,
) -> ResourceAccessToken:
    """Auth server: mint a short-lived resource token against a valid approval."""
    try:
        claims = jwt_decode(approval, apd_public)
    except BadSignature as exc:
        raise InvalidApproval(f"approval rejected: {exc}") from None
    if claims.get("iss") != APD_ISSUER:
        raise InvalidApproval(f"approval from unexpected issuer {claims.get('iss')!r}")
    if now > claims["exp"]:
        raise InvalidApproval("approval has expired")
    if not resource_id:
        raise InvalidApproval("empty resource scope")
    iat = int(now)
    return jwt_encode(
        {
            "iss": AS_ISSUER,
            "sub": claims["sub"],
            "scope": resource_id,
            "iat": iat,
            "exp": iat + TOKEN_LIFETIME_S,
        },
        as_key,
    )


def resource_fetch(
    rat: ResourceAccessToken,
    resource_id: str,
    store: dict[str, bytes],
    as_public: bytes,
    now: float,
) -> bytes:
    """Resource server: validate the token and hand out the sealed envelope."""
    claims = jwt_decode(rat, as_public)
    if claims.get("iss") != AS_ISSUER:
        raise BadSignature(f"token from unexpected issuer {claims.get('iss')!r}")
    if now > claims["exp"]:
        raise Expired("resource access token has expired")
    if claims.get("scope") != resource_id:
        raise ScopeMismatch(
            f"token scope {claims.get('scope')!r} does not cover resource {resource_id!r}"
        )
    if resource_id not in store:
        raise UnknownResource(f"no such resource {resource_id!r}")
    return store[resource_id]


# --- transport --------------------------------------------------------------------

def encode_frame(payload: bytes) -> bytes:
    """4-byte big-endian length prefix + JSON payload (socket wire format)."""
    return struct.pack(">I", len(payload)) + payload


def read_frame(reader) -> bytes:
    header = reader.read(4)
    if len(header) < 4:
        raise ConnectionError("short read on frame header")
    (length,) = struct.unpack(">I", header)
    payload = reader.read(length)
    if len(payload) < length:
        raise ConnectionError("short read on frame payload")
    return payload


class LoopbackTransport:
    """Echo relay over a loopback TCP socket.

    Every message is framed, sent through the socket and read back before
    delivery, demonstrating the wire format a multi-process deployment
    would use (with TLS terminating at this boundary in production).
    """

    def __init__(self):
        self._server = socket.create_server(("127.0.0.1", 0))
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()
        self._client = socket.create_connection(self._server.getsockname())
        self._reader = self._client.makefile("rb")

    def _serve(self):
        conn, _ = self._server.accept()
        with conn, conn.makefile("rb") as reader:
            while True:
                try:
                    payload = read_frame(reader)
                except (ConnectionError, OSError):
                    return
                conn.sendall(encode_frame(payload))

    def roundtrip(self, payload: bytes) -> bytes:
        self._client.sendall(encode_frame(payload))
        return read_frame(self._reader)

    def close(self):
        for closable in (self._client, self._server):
            try:
                closable.close()
            except OSError:
                pass


class MessageBus:
    """Delivers inter-party messages and keeps their serialized wire bytes."""

    def __init__(self, transport: LoopbackTransport | None = None):
        self.transport = transport
        self.wire_log: list[bytes] = []

    def send(self, session_id: str, step: int, message_type: str, body: dict) -> dict:
        encoded = json.dumps(
            {"session_id": session_id, "step": step, "type": message_type, "body": body},
            separators=(",", ":"),
        ).encode("utf-8")
        if self.transport is not None:
            encoded = self.transport.roundtrip(encoded)
        self.wire_log.append(encoded)
        return json.loads(encoded)["body"]


# --- session ------------------------------------------------------------------------

class Tamper(Enum):
    FLIPPED_MEASUREMENT = "flipped-measurement"
    FORGED_MAA_SIGNATURE = "forged-maa-signature"
    EXPIRED_JWT = "expired-jwt"
    WRONG_PCRS = "wrong-pcrs"
    FORGED_RAT = "forged-rat"
    WRONG_RAT_SCOPE = "wrong-rat-scope"
    REPLAYED_NONCE = "replayed-nonce"
    MEASUREMENT_NOT_ALLOWED = "measurement-not-allowed"
    WRONG_ENVELOPE_RECIPIENT = "wrong-envelope-recipient"


@dataclass
class TranscriptEntry:
    step: int
    sender: str
    receiver: str
    message_type: str
    sha256: str
    timestamp: float

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "from": self.sender,
            "to": self.receiver,
            "type": self.message_type,
            "sha256": self.sha256,
        }


@dataclass
class SessionTranscript:
    session_id: str
    entries: list[TranscriptEntry] = field(default_factory=list)
    rejected_step: int | None = None
    rejected_reason: str | None = None

    @property
    def success(self) -> bool:
        return self.rejected_step is None and len(self.entries) == 11

    def to_json(self) -> dict:
        outcome: dict = {"status": "success"} if self.success else {
            "status": "rejected",
            "step": self.rejected_step,
            "reason": self.rejected_reason,
        }
        return {
            "session_id": self.session_id,
            "steps": [e.to_json() for e in self.entries],
            "outcome": outcome,
        }


@dataclass
class PartyKeys:
    platform: SigningKey
    maa: SigningKey
    auth_server: SigningKey
    apd: SigningKey

    @classmethod
    def generate(cls, rand_bytes: RandBytes | None = None) -> "PartyKeys":
        return cls(
            SigningKey.generate(rand_bytes),
            SigningKey.generate(rand_bytes),
            SigningKey.generate(rand_bytes),
            SigningKey.generate(rand_bytes),
        )

    def trust_store(self) -> dict:
        return {
            "platform": base64.b64encode(self.platform.public).decode(),
            "maa": base64.b64encode(self.maa.public).decode(),
            "auth_server": base64.b64encode(self.auth_server.public).decode(),
            "apd": base64.b64encode(self.apd.public).decode(),
        }


PipelineExecutor = Callable[[dict, bytes, KeyPair, bytes], tuple[bytes, dict]]


@dataclass
class SessionConfig:
    keys: PartyKeys
    enclave: EnclaveState
    provider_public_key: bytes
    allowlist: PolicyAllowlist
    resource_store: dict[str, bytes]
    resource_id: str
    pipeline_config: dict
    clock: Callable[[], float] | None = None
    rand_bytes: RandBytes | None = None
    tamper: Tamper | None = None
    executor: PipelineExecutor | None = None
    output_sink: dict | None = None
    seen_nonces: set[bytes] | None = None


def _default_executor(config_json: dict, envelope_bytes: bytes, keys: KeyPair,
                      provider_public: bytes) -> tuple[bytes, dict]:
    from .pipeline import run_pipeline_json

    return run_pipeline_json(config_json, envelope_bytes, keys, provider_public)


def run_session(config: SessionConfig, bus: MessageBus | None = None) -> SessionTranscript:
    """Execute protocol steps 1..11, short-circuiting on the first rejection.

    The transcript records one entry per completed step; a rejection is
    attributed to the step whose processing failed.  Plaintext exists only
    inside the enclave during step 10; every message carries ciphertext,
    tokens, or digests.
    """
    bus = bus or MessageBus()
    session_id = secrets.token_hex(8)
    base_clock = config.clock or time.time
    clock_offset = 0.0

    def now() -> float:
        return base_clock() + clock_offset

    transcript = SessionTranscript(session_id)

    def record(step: int, sender: str, receiver: str, message_type: str, body: dict) -> dict:
        delivered = bus.send(session_id, step, message_type, body)
        digest = hashlib.sha256(bus.wire_log[-1]).hexdigest()
        transcript.entries.append(
            TranscriptEntry(step, sender, receiver, message_type, digest, now())
        )
        return delivered

    tamper = config.tamper
    executor = config.executor or _default_executor
    seen_nonces = config.seen_nonces if config.seen_nonces is not None else set()
    allowlist = config.allowlist
    enclave = config.enclave

    if tamper is Tamper.WRONG_PCRS:
        rogue_pcrs = tuple(hashlib.sha256(b"rogue" + p).digest() for p in enclave.pcrs)
        enclave = EnclaveState(enclave.measurement, rogue_pcrs, enclave.encryption_keys)
    if tamper is Tamper.MEASUREMENT_NOT_ALLOWED:
        allowlist = PolicyAllowlist(
            frozenset({hashlib.sha384(b"some other application").digest()}),
            allowlist.allowed_pcrs,
            allowlist.max_token_age,
        )

    # 1. Data provider asks the enclave manager to run the application.
    record(1, "data-provider", "enclave-manager", "run-request", {
        "resource_id": config.resource_id,
        "provider_public_key": base64.b64encode(config.provider_public_key).decode(),
        "pipeline_config": config.pipeline_config,
    })

    # 2. Guest attestation library is invoked to produce the hardware report.
    nonce = (config.rand_bytes or secrets.token_bytes)(NONCE_LEN)
    if tamper is Tamper.REPLAYED_NONCE:
        seen_nonces.add(nonce)  # an earlier session already consumed it
    record(2, "enclave-manager", "guest-attestation", "report-request",
           {"nonce": nonce.hex()})
    report = generate_hardware_report(enclave, nonce, config.keys.platform)
    if tamper is Tamper.FLIPPED_MEASUREMENT:
        flipped = bytes([report.measurement[0] ^ 0x01]) + report.measurement[1:]
        report = HardwareReport(flipped, report.pcr_values,
                                report.vm_public_key_fingerprint, report.nonce,
                                report.platform_signature)

    # 3. Report goes to the attestation service, which verifies it.
    record(3, "guest-attestation", "maa", "attestation-request", report.to_json())
    try:
        token = maa_verify_and_issue(
            report, nonce, config.keys.maa, config.keys.platform.public, now(),
            seen_nonces,
        )
    except AttestationError as exc:
        return _reject(transcript, 3, exc)

    # 4. Signed attestation token returns to the VM.
    record(4, "maa", "guest-attestation", "attestation-token", {"jwt": token})

    # 5. Token is relayed through the auth server to the policy domain.
    if tamper is Tamper.FORGED_MAA_SIGNATURE:
        rogue = SigningKey.generate()
        claims = json.loads(_unb64(token.split(".")[1]))
        token = jwt_encode(claims, rogue)
    record(5, "enclave-manager", "apd", "jwt-relay", {"jwt": token})
    if tamper is Tamper.EXPIRED_JWT:
        clock_offset += TOKEN_LIFETIME_S + 60

    # 6. Policy domain validates the token and signs an approval.
    try:
        approval = apd_validate(
            token, allowlist, now(), config.keys.maa.public, config.keys.apd,
            session_id,
        )
    except AttestationError as exc:
        return _reject(transcript, 6, exc)
    record(6, "apd", "auth-server", "approval", {"jwt": approval})

    # 7. Auth server mints the resource access token.
    try:
        rat_scope = config.resource_id
        if tamper is Tamper.WRONG_RAT_SCOPE:
            rat_scope = config.resource_id + "-other"
        rat = issue_rat(approval, rat_scope, config.keys.auth_server,
                        config.keys.apd.public, now())
    except AttestationError as exc:
        return _reject(transcript, 7, exc)
    record(7, "auth-server", "enclave-manager", "resource-access-token", {"jwt": rat})
    if tamper is Tamper.FORGED_RAT:
        rogue = SigningKey.generate()
        claims = json.loads(_unb64(rat.split(".")[1]))
        rat = jwt_encode(claims, rogue)

    # 8. Enclave manager requests the data; the resource server validates.
    record(8, "enclave-manager", "resource-server", "data-request",
           {"resource_id": config.resource_id, "jwt": rat})
    try:
        envelope_bytes = resource_fetch(
            rat, config.resource_id, config.resource_store,
            config.keys.auth_server.public, now(),
        )
    except AttestationError as exc:
        return _reject(transcript, 8, exc)

    # 9. Sealed data travels to the VM.
    record(9, "resource-server", "enclave-manager", "encrypted-data",
           {"envelope": base64.b64encode(envelope_bytes).decode()})
    if tamper is Tamper.WRONG_ENVELOPE_RECIPIENT:
        # Key encapsulation no longer matches the enclave key; the AEAD
        # tag (header-bound) cannot verify.
        patched = bytearray(envelope_bytes)
        patched[37:69] = hashlib.sha256(b"rogue ephemeral key").digest()
        envelope_bytes = bytes(patched)

    # 10. The pipeline executes inside the enclave; output is re-sealed.
    record(10, "enclave-manager", "enclave", "execute-pipeline", {
        "pipeline_config": config.pipeline_config,
        "envelope": base64.b64encode(envelope_bytes).decode(),
    })
    try:
        output_bytes, run_report = executor(
            config.pipeline_config, envelope_bytes, enclave.encryption_keys,
            config.provider_public_key,
        )
    except SpiderError as exc:
        return _reject(transcript, 10, exc)

    # 11. Encrypted output returns to the resource server.
    record(11, "enclave", "resource-server", "encrypted-output", {
        "envelope": base64.b64encode(output_bytes).decode(),
        "report": run_report,
    })
    if config.output_sink is not None:
        config.output_sink[config.resource_id] = (output_bytes, run_report)
    return transcript


def _reject(transcript: SessionTranscript, step: int, error: SpiderError) -> SessionTranscript:
    transcript.rejected_step = step
    transcript.rejected_reason = error.code
    return transcript
