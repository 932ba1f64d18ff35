import math
from typing import Callable, List, Optional, Tuple

import numpy as np
import pytest
from starlette.websockets import WebSocketDisconnect

from onlinest.errors import SessionError
from onlinest.model.base import EncoderStates, SpeechTranslationModel
from onlinest.model.toy import ModelDims, ToyModel, generate_toy_model
from onlinest.types import AudioFeatures, Vocabulary

SMALL_DIMS = ModelDims(
    input_dim=8, conv_channels=2, enc_dim=8, enc_layers=1, dec_dim=8, dec_layers=1, att_dim=8, emb_dim=8
)


def make_features(n_frames: int, dim: int = 8, seed: int = 0, frame_ms: float = 10.0) -> AudioFeatures:
    rng = np.random.default_rng(seed)
    return AudioFeatures(rng.standard_normal((n_frames, dim)).astype(np.float32), frame_ms)


def make_toy(seed: int = 42, dims: ModelDims = SMALL_DIMS, vocab: Optional[Vocabulary] = None) -> ToyModel:
    return ToyModel(generate_toy_model(seed, dims, vocab or Vocabulary.for_chars("abcde")))


class ScriptedModel(SpeechTranslationModel):
    """Encoder-free stand-in: token choice is a function of (frames read, output position).

    The decoder state is the number of tokens decoded since bos, so a
    discarded eos leaves the committed position untouched.
    """

    def __init__(self, script: Callable[[int, int], int], vocab: Optional[Vocabulary] = None, dim: int = 1):
        self.script = script
        self._vocab = vocab or Vocabulary.for_chars("abc")
        self._dim = dim
        self.encode_calls: List[int] = []
        self.events: List[Tuple[str, int]] = []

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def input_dim(self) -> int:
        return self._dim

    def encode(self, features: AudioFeatures) -> EncoderStates:
        n = features.num_frames
        self.encode_calls.append(n)
        return EncoderStates(hidden=np.zeros((math.ceil(n / 4), 1)), source_frames_consumed=n)

    def init_decoder_state(self) -> int:
        return 0

    def decode_step(self, enc: EncoderStates, z_prev: int, y_prev: int):
        token = self.script(enc.source_frames_consumed, z_prev)
        scores = np.zeros(self._vocab.size)
        scores[token] = 1.0
        return z_prev + 1, scores

    def commit(self, n: int) -> None:
        self.events.append(("commit", n))

    def rollback(self) -> None:
        self.events.append(("rollback", 0))


class TestClientChannel:
    """Bridge channel over a FastAPI TestClient websocket session.

    After the server hangs up every further call fails fast; the test
    session would otherwise block waiting for a reply that never comes.
    """

    __test__ = False

    def __init__(self, client, path: str = "/ws/model"):
        self._cm = client.websocket_connect(path)
        self._ws = self._cm.__enter__()
        self.closed = False
        self.disconnected = False

    def _check(self) -> None:
        if self.disconnected or self.closed:
            raise SessionError("connection closed")

    def send_text(self, text: str) -> None:
        self._check()
        try:
            self._ws.send_text(text)
        except WebSocketDisconnect as e:
            self.disconnected = True
            raise SessionError(f"connection closed: {e}") from e

    def recv_text(self) -> str:
        self._check()
        try:
            return self._ws.receive_text()
        except WebSocketDisconnect as e:
            self.disconnected = True
            raise SessionError(f"connection closed: {e}") from e

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self._cm.__exit__(None, None, None)
        except Exception:
            pass


@pytest.fixture
def toy_model() -> ToyModel:
    return make_toy()


@pytest.fixture
def char_vocab() -> Vocabulary:
    return Vocabulary.for_chars("abcdefghijklmnopqrstuvwxyz")
