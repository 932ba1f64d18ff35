"""Exception hierarchy for onlinest.

Every error also derives from the builtin a caller would naturally catch
(``ValueError`` for bad input, ``RuntimeError`` for runtime failures).
"""
from __future__ import annotations

from typing import Any, Optional


class OnlineSTError(Exception):
    """Base class for all onlinest errors."""


class ArgumentError(OnlineSTError, ValueError):
    """An operation received an argument outside its domain."""


class ConfigurationError(OnlineSTError, ValueError):
    """Invalid configuration, or a model/feature dimension mismatch."""


class FormatError(OnlineSTError, ValueError):
    """A file or record does not follow its declared format."""


class UnknownTokenError(OnlineSTError, ValueError):
    """A symbol is not part of the vocabulary."""


class UndefinedMetricError(OnlineSTError, ValueError):
    """A metric is undefined for the given input."""


class StateError(OnlineSTError, RuntimeError):
    """Decoder or session state used out of order."""


class ModelError(OnlineSTError, RuntimeError):
    """The model failed to produce an output."""


class RemoteModelError(ModelError):
    """The remote model process reported a failure."""

    def __init__(self, message: str, code: str = "model_error"):
        super().__init__(message)
        self.code = code


class UtteranceError(OnlineSTError, RuntimeError):
    """Processing a single utterance failed."""

    def __init__(self, utt_id: str, message: str):
        super().__init__(f"utterance '{utt_id}': {message}")
        self.utt_id = utt_id


class TransportError(OnlineSTError, RuntimeError):
    """Bridge transport failure.

    ``partial`` is filled in by the decoding engine with whatever result was
    committed before the failure.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self.partial: Optional[Any] = None


class BridgeTimeoutError(TransportError):
    """No response within the configured timeout."""


class MalformedResponseError(TransportError):
    """The peer sent something that is not a valid protocol message."""


class ProtocolVersionError(TransportError):
    """Handshake rejected (protocol version or vocabulary mismatch)."""


class SessionError(TransportError):
    """The session was closed by the peer."""
