"""
Wire messages for the model bridge.

Every message is one JSON text frame with a ``type`` discriminator. Arrays
travel as base64 of little-endian raw bytes: frame deltas as ``<f4`` rows,
decoder scores as ``<f8``, so values cross the wire bit-exact.
"""
from __future__ import annotations

import base64
import binascii
from typing import Annotated, Any, Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter

from onlinest.errors import FormatError

PROTOCOL_VERSION = 1

FRAME_DTYPE = "<f4"
SCORE_DTYPE = "<f8"


def encode_array(arr: np.ndarray, dtype: str) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes()).decode("ascii")


def decode_array(data: str, dtype: str, shape: Tuple[int, ...]) -> np.ndarray:
    try:
        raw = base64.b64decode(data.encode("ascii"), validate=True)
    except (binascii.Error, ValueError) as e:
        raise FormatError(f"invalid base64 payload: {e}") from e
    dt = np.dtype(dtype)
    expected = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
    if len(raw) != expected:
        raise FormatError(f"payload has {len(raw)} bytes, expected {expected} for shape {shape}")
    return np.frombuffer(raw, dtype=dt).reshape(shape).astype(dt.newbyteorder("="))


# --- client -> server ---

class HandshakeRequest(BaseModel):
    type: Literal["handshake"] = "handshake"
    version: int
    vocab_hash: Optional[str] = None


class BeginRequest(BaseModel):
    type: Literal["begin"] = "begin"
    session: str
    utt_id: Optional[str] = None


class ReadRequest(BaseModel):
    """Frames appended since the previous read of this utterance."""
    type: Literal["read"] = "read"
    session: str
    frames: str
    n: int = Field(ge=0)
    dim: int = Field(ge=1)


class DecodeRequest(BaseModel):
    type: Literal["decode"] = "decode"
    session: str
    prev_token: int = Field(ge=0)


class CommitRequest(BaseModel):
    type: Literal["commit"] = "commit"
    session: str
    n: int = Field(ge=0)


class RollbackRequest(BaseModel):
    type: Literal["rollback"] = "rollback"
    session: str


class EndRequest(BaseModel):
    type: Literal["end"] = "end"
    session: str


# --- server -> client ---

class HandshakeResponse(BaseModel):
    type: Literal["handshake_ok"] = "handshake_ok"
    version: int
    session: str
    vocab: Dict[str, Any]
    input_dim: int


class ReadResponse(BaseModel):
    type: Literal["read_ok"] = "read_ok"
    frames: int
    encoder_len: int


class DecodeResponse(BaseModel):
    type: Literal["token"] = "token"
    token: int
    score: float
    scores: str
    size: int


class Ack(BaseModel):
    type: Literal["ack"] = "ack"


class ErrorMessage(BaseModel):
    type: Literal["error"] = "error"
    code: str
    message: str


ClientMessage = Annotated[
    Union[HandshakeRequest, BeginRequest, ReadRequest, DecodeRequest, CommitRequest, RollbackRequest, EndRequest],
    Field(discriminator="type"),
]
ServerMessage = Annotated[
    Union[HandshakeResponse, ReadResponse, DecodeResponse, Ack, ErrorMessage],
    Field(discriminator="type"),
]

client_message_adapter: TypeAdapter = TypeAdapter(ClientMessage)
server_message_adapter: TypeAdapter = TypeAdapter(ServerMessage)


# error codes carried by ErrorMessage
VERSION_MISMATCH = "version_mismatch"
VOCAB_MISMATCH = "vocab_mismatch"
BAD_REQUEST = "bad_request"
UNKNOWN_SESSION = "unknown_session"
STATE_ERROR = "state_error"
CONFIGURATION_ERROR = "configuration_error"
MODEL_ERROR = "model_error"
