"""
Client side of the model bridge.

RemoteModel satisfies the SpeechTranslationModel interface by turning every
call into one request/response exchange on a Channel. Decoder states live in
the server; the client only holds opaque handles.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional, Protocol, Tuple, Type, Union

import numpy as np
from pydantic import ValidationError
from websockets.exceptions import ConnectionClosed, WebSocketException
from websockets.sync.client import connect

from onlinest.bridge import protocol as p
from onlinest.errors import (
    BridgeTimeoutError,
    FormatError,
    MalformedResponseError,
    ProtocolVersionError,
    RemoteModelError,
    SessionError,
    StateError,
    TransportError,
)
from onlinest.model.base import EncoderStates, SpeechTranslationModel, encoder_length
from onlinest.types import AudioFeatures, Vocabulary

logger = logging.getLogger(__name__)


class Channel(Protocol):
    """Ordered text-frame transport; implementations raise TransportError subclasses."""

    def send_text(self, text: str) -> None:
        ...

    def recv_text(self) -> str:
        ...

    def close(self) -> None:
        ...


class WebSocketChannel:
    """Blocking websocket connection to a bridge server."""

    def __init__(self, url: str, timeout_s: float = 10.0):
        self.url = url
        self.timeout_s = timeout_s
        try:
            # keepalive pings off: the server may be busy inside a long encode
            self._ws = connect(url, open_timeout=timeout_s, ping_interval=None, max_size=None)
        except TimeoutError as e:
            raise BridgeTimeoutError(f"timed out connecting to {url}") from e
        except (OSError, WebSocketException) as e:
            raise SessionError(f"could not connect to {url}: {e}") from e

    def send_text(self, text: str) -> None:
        try:
            self._ws.send(text)
        except ConnectionClosed as e:
            raise SessionError(f"connection to {self.url} closed: {e}") from e

    def recv_text(self) -> str:
        try:
            data = self._ws.recv(timeout=self.timeout_s)
        except TimeoutError as e:
            raise BridgeTimeoutError(f"no response from {self.url} within {self.timeout_s}s") from e
        except ConnectionClosed as e:
            raise SessionError(f"connection to {self.url} closed: {e}") from e
        if isinstance(data, bytes):
            raise MalformedResponseError("expected a text frame, got binary")
        return data

    def close(self) -> None:
        try:
            self._ws.close()
        except Exception:
            pass


@dataclass(frozen=True)
class RemoteDecoderState:
    """Handle for a decoder state held by the server."""
    session: str
    index: int


_ERROR_CODES = {
    p.VERSION_MISMATCH: ProtocolVersionError,
    p.VOCAB_MISMATCH: ProtocolVersionError,
    p.UNKNOWN_SESSION: SessionError,
    p.BAD_REQUEST: MalformedResponseError,
}


class RemoteModel(SpeechTranslationModel):
    """Model served by another process over the bridge protocol."""

    concurrent_sessions = False  # one connection carries one utterance at a time

    def __init__(self, channel: Channel, vocab: Optional[Vocabulary] = None):
        self.channel = channel
        reply = self._exchange(
            p.HandshakeRequest(
                version=p.PROTOCOL_VERSION,
                vocab_hash=vocab.fingerprint() if vocab is not None else None,
            ),
            p.HandshakeResponse,
        )
        if reply.version != p.PROTOCOL_VERSION:
            raise ProtocolVersionError(f"server answered with protocol {reply.version}")
        try:
            self._vocab = Vocabulary.from_dict(reply.vocab)
        except FormatError as e:
            raise MalformedResponseError(f"server sent an invalid vocabulary: {e}") from e
        if vocab is not None and self._vocab != vocab:
            raise ProtocolVersionError("server vocabulary differs from the local one")
        self.session = reply.session
        self._input_dim = reply.input_dim
        self._frames_sent = 0
        self._steps = 0
        self._active = False
        logger.info(f"[RemoteModel] Session {self.session}: V={self._vocab.size}, D={self._input_dim}")

    # --- transport ---

    def _exchange(self, msg: Any, expected: Type[Any]) -> Any:
        self.channel.send_text(msg.model_dump_json())
        text = self.channel.recv_text()
        try:
            reply = p.server_message_adapter.validate_json(text)
        except ValidationError as e:
            raise MalformedResponseError(f"unparseable response to {msg.type}: {e.errors()[:1]}") from e
        if isinstance(reply, p.ErrorMessage):
            exc = _ERROR_CODES.get(reply.code)
            if exc is not None:
                raise exc(f"{reply.code}: {reply.message}")
            raise RemoteModelError(reply.message, code=reply.code)
        if not isinstance(reply, expected):
            raise MalformedResponseError(f"expected {expected.__name__} for {msg.type}, got {reply.type}")
        return reply

    # --- model interface ---

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def input_dim(self) -> int:
        return self._input_dim

    def begin_utterance(self, utt_id: Optional[str] = None) -> None:
        self._exchange(p.BeginRequest(session=self.session, utt_id=utt_id), p.Ack)
        self._frames_sent = 0
        self._steps = 0
        self._active = True

    def encode(self, features: AudioFeatures) -> EncoderStates:
        if not self._active:
            raise StateError("encode called outside an utterance")
        n = features.num_frames
        if n < self._frames_sent:
            raise StateError(f"prefix shrank from {self._frames_sent} to {n} frames")
        delta = features.frames[self._frames_sent:]
        reply = self._exchange(
            p.ReadRequest(
                session=self.session,
                frames=p.encode_array(delta, p.FRAME_DTYPE),
                n=int(delta.shape[0]),
                dim=features.dim,
            ),
            p.ReadResponse,
        )
        if reply.frames != n or reply.encoder_len != encoder_length(n):
            raise MalformedResponseError(
                f"server holds {reply.frames} frames / {reply.encoder_len} states, expected {n} / {encoder_length(n)}"
            )
        self._frames_sent = n
        return EncoderStates(hidden=None, source_frames_consumed=n)

    def init_decoder_state(self) -> RemoteDecoderState:
        return RemoteDecoderState(self.session, 0)

    def decode_step(self, enc: EncoderStates, z_prev: Any, y_prev: int) -> Tuple[RemoteDecoderState, np.ndarray]:
        reply = self._exchange(p.DecodeRequest(session=self.session, prev_token=int(y_prev)), p.DecodeResponse)
        if reply.size != self._vocab.size:
            raise MalformedResponseError(f"server returned {reply.size} scores for V={self._vocab.size}")
        try:
            scores = p.decode_array(reply.scores, p.SCORE_DTYPE, (reply.size,))
        except FormatError as e:
            raise MalformedResponseError(str(e)) from e
        self._steps += 1
        return RemoteDecoderState(self.session, self._steps), scores

    def commit(self, n: int) -> None:
        self._exchange(p.CommitRequest(session=self.session, n=n), p.Ack)

    def rollback(self) -> None:
        self._exchange(p.RollbackRequest(session=self.session), p.Ack)

    def end_utterance(self) -> None:
        if not self._active:
            return
        self._active = False
        self._exchange(p.EndRequest(session=self.session), p.Ack)

    def close(self) -> None:
        self.channel.close()


def remote_model(
    endpoint: Union[str, Channel],
    vocab: Optional[Vocabulary] = None,
    timeout_s: float = 10.0,
) -> RemoteModel:
    """Connect to a bridge server (URL or ready channel) and perform the handshake."""
    channel = WebSocketChannel(endpoint, timeout_s) if isinstance(endpoint, str) else endpoint
    try:
        return RemoteModel(channel, vocab)
    except TransportError:
        channel.close()
        raise
