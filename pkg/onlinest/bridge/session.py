"""Server side of the model bridge: one BridgeSessionHost per connection.

The host owns the decoder states. Each decode request advances from the
newest pending state (or the committed one when nothing is pending);
``commit n`` promotes the first n pending states and ``rollback`` drops
the rest, which is how the engine discards an early eos.
"""
from __future__ import annotations

import logging
import uuid
from typing import Any, List, Optional

import numpy as np
from pydantic import ValidationError

from onlinest.bridge import protocol as p
from onlinest.errors import ConfigurationError, OnlineSTError, StateError
from onlinest.model.base import EncoderStates, SpeechTranslationModel, predict
from onlinest.types import AudioFeatures

logger = logging.getLogger(__name__)


class BridgeSession:
    """Per-utterance state: id, frames received so far, decoder states."""

    def __init__(self, utt_id: Optional[str], dim: int, z0: Any, bos_id: int):
        self.utt_id = utt_id
        self.frames = np.zeros((0, dim), dtype=np.float32)
        self.enc: Optional[EncoderStates] = None
        self.committed_state = z0
        self.last_committed_token = bos_id
        self.pending: List[Any] = []
        self.pending_tokens: List[int] = []

    @property
    def frames_received(self) -> int:
        return int(self.frames.shape[0])


class BridgeSessionHost:
    """Handles the message sequence of one connection against a shared model."""

    def __init__(self, model: SpeechTranslationModel):
        self.model = model
        self.session_id: Optional[str] = None
        self.utterance: Optional[BridgeSession] = None

    # --- entry points ---

    def handle_text(self, text: str) -> str:
        return self.handle_raw(text).model_dump_json()

    def handle_raw(self, text: str) -> Any:
        try:
            msg = p.client_message_adapter.validate_json(text)
        except ValidationError as e:
            return p.ErrorMessage(code=p.BAD_REQUEST, message=f"invalid message: {e.errors()[:1]}")
        return self.handle(msg)

    def handle(self, msg: Any) -> Any:
        if not isinstance(msg, p.HandshakeRequest):
            if self.session_id is None or msg.session != self.session_id:
                return p.ErrorMessage(code=p.UNKNOWN_SESSION, message=f"unknown session {msg.session!r}")
        try:
            handler = getattr(self, f"_on_{msg.type}")
            return handler(msg)
        except StateError as e:
            return p.ErrorMessage(code=p.STATE_ERROR, message=str(e))
        except ConfigurationError as e:
            return p.ErrorMessage(code=p.CONFIGURATION_ERROR, message=str(e))
        except OnlineSTError as e:
            return p.ErrorMessage(code=p.MODEL_ERROR, message=str(e))
        except Exception as e:
            logger.exception(f"[BridgeSession] Model failure on {msg.type}")
            return p.ErrorMessage(code=p.MODEL_ERROR, message=f"{type(e).__name__}: {e}")

    # --- handlers ---

    def _on_handshake(self, msg: p.HandshakeRequest):
        if msg.version != p.PROTOCOL_VERSION:
            return p.ErrorMessage(
                code=p.VERSION_MISMATCH,
                message=f"server speaks protocol {p.PROTOCOL_VERSION}, client sent {msg.version}",
            )
        vocab = self.model.vocab
        if msg.vocab_hash is not None and msg.vocab_hash != vocab.fingerprint():
            return p.ErrorMessage(code=p.VOCAB_MISMATCH, message="client vocabulary differs from the served model")
        self.session_id = uuid.uuid4().hex
        logger.info(f"[BridgeSession] Opened session {self.session_id}")
        return p.HandshakeResponse(
            version=p.PROTOCOL_VERSION,
            session=self.session_id,
            vocab=vocab.to_dict(),
            input_dim=self.model.input_dim,
        )

    def _on_begin(self, msg: p.BeginRequest):
        if self.utterance is not None:
            raise StateError(f"utterance {self.utterance.utt_id!r} is still active")
        self.utterance = BridgeSession(
            msg.utt_id, self.model.input_dim, self.model.init_decoder_state(), self.model.vocab.bos_id
        )
        return p.Ack()

    def _active(self) -> BridgeSession:
        if self.utterance is None:
            raise StateError("no active utterance; send begin first")
        return self.utterance

    def _on_read(self, msg: p.ReadRequest):
        utt = self._active()
        if msg.dim != self.model.input_dim:
            raise ConfigurationError(f"frames have D={msg.dim}, model expects D={self.model.input_dim}")
        try:
            delta = p.decode_array(msg.frames, p.FRAME_DTYPE, (msg.n, msg.dim))
        except OnlineSTError as e:
            return p.ErrorMessage(code=p.BAD_REQUEST, message=str(e))
        if msg.n:
            utt.frames = np.concatenate([utt.frames, delta.astype(np.float32)], axis=0)
            utt.enc = self.model.encode(AudioFeatures(utt.frames))
        if utt.enc is None:
            raise StateError("no frames received yet")
        return p.ReadResponse(frames=utt.frames_received, encoder_len=utt.enc.length)

    def _on_decode(self, msg: p.DecodeRequest):
        utt = self._active()
        if utt.enc is None:
            raise StateError("decode before any frames were read")
        z_prev = utt.pending[-1] if utt.pending else utt.committed_state
        z, scores = self.model.decode_step(utt.enc, z_prev, msg.prev_token)
        scores = np.asarray(scores, dtype=np.float64)
        token = predict(scores)
        utt.pending.append(z)
        utt.pending_tokens.append(token)
        return p.DecodeResponse(
            token=token,
            score=float(scores[token]),
            scores=p.encode_array(scores, p.SCORE_DTYPE),
            size=int(scores.shape[0]),
        )

    def _on_commit(self, msg: p.CommitRequest):
        utt = self._active()
        if msg.n > len(utt.pending):
            raise StateError(f"cannot commit {msg.n} states, only {len(utt.pending)} pending")
        if msg.n:
            utt.committed_state = utt.pending[msg.n - 1]
            utt.last_committed_token = utt.pending_tokens[msg.n - 1]
            del utt.pending[: msg.n]
            del utt.pending_tokens[: msg.n]
        return p.Ack()

    def _on_rollback(self, msg: p.RollbackRequest):
        utt = self._active()
        utt.pending.clear()
        utt.pending_tokens.clear()
        return p.Ack()

    def _on_end(self, msg: p.EndRequest):
        utt = self._active()
        logger.debug(f"[BridgeSession] {self.session_id}: finished {utt.utt_id!r} after {utt.frames_received} frames")
        self.utterance = None
        return p.Ack()
