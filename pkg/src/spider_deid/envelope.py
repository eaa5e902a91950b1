"""Hybrid-encryption envelope for data at rest.

Layout (all fields fixed-size except the trailing ciphertext):

    magic "SPDR" (4) | version 0x01 (1) | recipient fingerprint (32)
    | ephemeral public key (32) | nonce (12) | ciphertext + tag (len+16)

Key encapsulation is an ephemeral X25519 exchange against the recipient's
public key; the payload key is HKDF-SHA-256 of the shared secret and the
payload is ChaCha20-Poly1305 with the whole header bound as associated
data, so any header tampering breaks authentication.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Callable

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import (
    AuthenticationFailure,
    BadMagic,
    BadVersion,
    EntropyFailure,
    WrongRecipient,
)

MAGIC = b"SPDR"
VERSION = 0x01
HKDF_INFO = b"SPIDEr-v1"
KEY_LEN = 32
NONCE_LEN = 12
TAG_LEN = 16
HEADER_LEN = 4 + 1 + 32 + 32 + NONCE_LEN  # 81
MIN_ENVELOPE_LEN = HEADER_LEN + TAG_LEN  # 97
FILE_EXTENSION = ".spdr"

RandBytes = Callable[[int], bytes]


def _entropy(rand_bytes: RandBytes | None, n: int) -> bytes:
    try:
        out = (rand_bytes or os.urandom)(n)
    except Exception as exc:
        raise EntropyFailure(f"entropy source failed: {exc}") from exc
    if len(out) != n:
        raise EntropyFailure(f"entropy source returned {len(out)} bytes, wanted {n}")
    return out


def key_fingerprint(public_key: bytes) -> bytes:
    return hashlib.sha256(public_key).digest()


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    private_key: bytes

    @property
    def fingerprint(self) -> bytes:
        return key_fingerprint(self.public_key)


def keypair_from_private(private_key: bytes) -> KeyPair:
    secret = X25519PrivateKey.from_private_bytes(private_key)
    return KeyPair(secret.public_key().public_bytes_raw(), private_key)


def generate_keypair(rand_bytes: RandBytes | None = None) -> KeyPair:
    """Fresh X25519 key-agreement pair; inject `rand_bytes` for determinism."""
    return keypair_from_private(_entropy(rand_bytes, KEY_LEN))


@dataclass(frozen=True)
class Envelope:
    recipient_fingerprint: bytes
    ephemeral_public: bytes
    nonce: bytes
    ciphertext_and_tag: bytes

    def header(self) -> bytes:
        return (
            MAGIC
            + bytes([VERSION])
            + self.recipient_fingerprint
            + self.ephemeral_public
            + self.nonce
        )

    def to_bytes(self) -> bytes:
        return self.header() + self.ciphertext_and_tag

    @property
    def payload_length(self) -> int:
        return len(self.ciphertext_and_tag) - TAG_LEN


def envelope_from_bytes(blob: bytes) -> Envelope:
    if len(blob) < MIN_ENVELOPE_LEN:
        raise BadMagic(f"envelope too short: {len(blob)} bytes, minimum {MIN_ENVELOPE_LEN}")
    if blob[:4] != MAGIC:
        raise BadMagic(f"bad magic {blob[:4]!r}")
    if blob[4] != VERSION:
        raise BadVersion(f"unsupported envelope version {blob[4]}")
    return Envelope(
        recipient_fingerprint=blob[5:37],
        ephemeral_public=blob[37:69],
        nonce=blob[69:81],
        ciphertext_and_tag=blob[81:],
    )


def _derive_key(shared_secret: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(), length=KEY_LEN, salt=None, info=HKDF_INFO
    ).derive(shared_secret)


def seal(plaintext: bytes, recipient_public: bytes, rand_bytes: RandBytes | None = None) -> Envelope:
    """Encrypt to the recipient under a fresh ephemeral key and nonce."""
    ephemeral = X25519PrivateKey.from_private_bytes(_entropy(rand_bytes, KEY_LEN))
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(recipient_public))
    nonce = _entropy(rand_bytes, NONCE_LEN)
    envelope = Envelope(
        recipient_fingerprint=key_fingerprint(recipient_public),
        ephemeral_public=ephemeral.public_key().public_bytes_raw(),
        nonce=nonce,
        ciphertext_and_tag=b"",
    )
    ciphertext = ChaCha20Poly1305(_derive_key(shared)).encrypt(
        nonce, plaintext, envelope.header()
    )
    return Envelope(
        envelope.recipient_fingerprint, envelope.ephemeral_public, nonce, ciphertext
    )


def open_envelope(envelope: Envelope | bytes, private_key: bytes) -> bytes:
    """Decrypt and authenticate; returns the exact original plaintext."""
    if isinstance(envelope, (bytes, bytearray)):
        envelope = envelope_from_bytes(bytes(envelope))
    recipient = keypair_from_private(private_key)
    if envelope.recipient_fingerprint != recipient.fingerprint:
        raise WrongRecipient("envelope is sealed to a different public key")
    secret = X25519PrivateKey.from_private_bytes(private_key)
    shared = secret.exchange(X25519PublicKey.from_public_bytes(envelope.ephemeral_public))
    try:
        return ChaCha20Poly1305(_derive_key(shared)).decrypt(
            envelope.nonce, envelope.ciphertext_and_tag, envelope.header()
        )
    except InvalidTag:
        raise AuthenticationFailure("envelope failed authentication") from None
