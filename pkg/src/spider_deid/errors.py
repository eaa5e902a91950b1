"""Exception hierarchy shared across the pipeline modules."""


class SpiderError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def to_json(self) -> dict:
        return {"error": self.code, "message": str(self)}


# --- tabular ---------------------------------------------------------------

class HeaderMismatch(SpiderError):
    code = "header_mismatch"


class ParseError(SpiderError):
    code = "parse_error"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class UnknownColumn(SpiderError):
    code = "unknown_column"


# --- classical anonymisation ------------------------------------------------

class UnknownValue(SpiderError):
    code = "unknown_value"

    def __init__(self, message: str, value: str | None = None, row: int | None = None):
        super().__init__(message)
        self.value = value
        self.row = row


class LevelOutOfRange(SpiderError):
    code = "level_out_of_range"


class BadHierarchy(SpiderError):
    code = "bad_hierarchy"


class NonNumericMeasure(SpiderError):
    code = "non_numeric_measure"


# --- k-anonymity -------------------------------------------------------------

class Unsatisfiable(SpiderError):
    code = "unsatisfiable"


# --- differential privacy ----------------------------------------------------

class MissingClampBounds(SpiderError):
    code = "missing_clamp_bounds"


class MissingUserCap(SpiderError):
    code = "missing_user_cap"


class QueryMismatch(SpiderError):
    code = "query_mismatch"


class DegenerateDenominator(SpiderError):
    code = "degenerate_denominator"


# --- envelope ------------------------------------------------------------------

class EnvelopeError(SpiderError):
    code = "envelope_error"


class BadMagic(EnvelopeError):
    code = "bad_magic"


class BadVersion(EnvelopeError):
    code = "bad_version"


class WrongRecipient(EnvelopeError):
    code = "wrong_recipient"


class AuthenticationFailure(EnvelopeError):
    code = "authentication_failure"


class EntropyFailure(EnvelopeError):
    code = "entropy_failure"


# --- attestation ----------------------------------------------------------------

class AttestationError(SpiderError):
    code = "attestation_error"


class BadPlatformSignature(AttestationError):
    code = "bad_platform_signature"


class NonceMismatch(AttestationError):
    code = "nonce_mismatch"


class BadSignature(AttestationError):
    code = "bad_signature"


class Expired(AttestationError):
    code = "expired"


class MeasurementNotAllowed(AttestationError):
    code = "measurement_not_allowed"


class PcrMismatch(AttestationError):
    code = "pcr_mismatch"


class InvalidApproval(AttestationError):
    code = "invalid_approval"


class ScopeMismatch(AttestationError):
    code = "scope_mismatch"


class UnknownResource(AttestationError):
    code = "unknown_resource"


# --- orchestrator ----------------------------------------------------------------

class ConfigInvalid(SpiderError):
    code = "config_invalid"
