from __future__ import annotations

import enum


class RejectReason(str, enum.Enum):
    STALE_TIMESTAMP = "stale-timestamp"
    REPLAYED = "replayed"
    BAD_SIGNATURE = "bad-signature"
    UNKNOWN_ACCOUNT = "unknown-account"
    MALFORMED = "malformed"


class FailureReason(str, enum.Enum):
    BAD_MAC = "bad-mac"
    NO_PENDING_SESSION = "no-pending-session"


class ProtocolError(Exception):
    """Base class for protocol-level refusals."""


class Rejected(ProtocolError):
    """A sensor refused a service request."""

    def __init__(self, reason: RejectReason, detail: str = "") -> None:
        self.reason = RejectReason(reason)
        self.detail = detail
        super().__init__(f"{self.reason.value}{': ' + detail if detail else ''}")


class AuthenticationFailed(ProtocolError):
    def __init__(self, reason: FailureReason) -> None:
        self.reason = FailureReason(reason)
        super().__init__(self.reason.value)


class RegistrationError(ProtocolError):
    """A party aborted registration because a check did not hold."""


class StateError(ProtocolError):
    """An operation was invoked in a phase that does not allow it."""
