import secrets

import pytest

from spider_deid.envelope import (
    HEADER_LEN,
    MIN_ENVELOPE_LEN,
    TAG_LEN,
    envelope_from_bytes,
    generate_keypair,
    key_fingerprint,
    keypair_from_private,
    open_envelope,
    seal,
)
from spider_deid.errors import (
    AuthenticationFailure,
    BadMagic,
    BadVersion,
    EntropyFailure,
    EnvelopeError,
    WrongRecipient,
)


@pytest.fixture(scope="module")
def keys():
    return generate_keypair()


def test_generate_distinct_keypairs():
    assert generate_keypair().public_key != generate_keypair().public_key


def test_public_key_derivation_deterministic():
    private = secrets.token_bytes(32)
    assert keypair_from_private(private) == keypair_from_private(private)


def test_fingerprint_is_sha256_of_public(keys):
    assert keys.fingerprint == key_fingerprint(keys.public_key)
    assert len(keys.fingerprint) == 32


def test_deterministic_keygen_with_injected_entropy():
    pool = [bytes(range(32))]
    keys = generate_keypair(lambda n: pool[0][:n])
    again = generate_keypair(lambda n: pool[0][:n])
    assert keys == again


def test_entropy_failure_surfaces():
    def broken(n):
        raise OSError("no entropy")

    with pytest.raises(EntropyFailure):
        generate_keypair(broken)
    with pytest.raises(EntropyFailure):
        generate_keypair(lambda n: b"short")


@pytest.mark.parametrize("size", [0, 1, 16, 1_000_000])
def test_roundtrip_payload_sizes(keys, size):
    plaintext = secrets.token_bytes(size)
    envelope = seal(plaintext, keys.public_key)
    assert open_envelope(envelope, keys.private_key) == plaintext


def test_roundtrip_through_bytes(keys):
    blob = seal(b"hello", keys.public_key).to_bytes()
    assert open_envelope(blob, keys.private_key) == b"hello"


def test_envelope_length_formula(keys):
    envelope = seal(bytes(100), keys.public_key)
    assert len(envelope.to_bytes()) == HEADER_LEN + 100 + TAG_LEN == 197
    assert envelope.payload_length == 100


def test_sealing_twice_differs(keys):
    a = seal(b"same plaintext", keys.public_key).to_bytes()
    b = seal(b"same plaintext", keys.public_key).to_bytes()
    assert a != b


def test_wrong_recipient(keys):
    other = generate_keypair()
    envelope = seal(b"secret", keys.public_key)
    with pytest.raises(WrongRecipient):
        open_envelope(envelope, other.private_key)


def test_forged_fingerprint_fails_authentication(keys):
    # Rewriting the fingerprint defeats the recipient check but not the AEAD,
    # because the header is bound as associated data.
    other = generate_keypair()
    blob = bytearray(seal(b"secret", other.public_key).to_bytes())
    blob[5:37] = keys.fingerprint
    with pytest.raises(AuthenticationFailure):
        open_envelope(bytes(blob), keys.private_key)


def test_ciphertext_bit_flip_fails(keys):
    blob = bytearray(seal(b"payload", keys.public_key).to_bytes())
    blob[-1] ^= 0x01
    with pytest.raises(AuthenticationFailure):
        open_envelope(bytes(blob), keys.private_key)


def test_truncated_envelope_rejected(keys):
    blob = seal(b"x", keys.public_key).to_bytes()
    with pytest.raises(BadMagic):
        envelope_from_bytes(blob[: MIN_ENVELOPE_LEN - 1])


def test_bad_magic_and_version(keys):
    blob = bytearray(seal(b"x", keys.public_key).to_bytes())
    wrong_magic = bytes(b"XXXX") + bytes(blob[4:])
    with pytest.raises(BadMagic):
        envelope_from_bytes(wrong_magic)
    wrong_version = bytes(blob[:4]) + b"\x02" + bytes(blob[5:])
    with pytest.raises(BadVersion):
        envelope_from_bytes(wrong_version)


def test_every_single_bit_flip_fails_to_open(keys):
    blob = seal(b"abc", keys.public_key).to_bytes()
    for byte_index in range(len(blob)):
        for bit in range(8):
            mutated = bytearray(blob)
            mutated[byte_index] ^= 1 << bit
            with pytest.raises(EnvelopeError):
                open_envelope(bytes(mutated), keys.private_key)
