"""Abstract model interface driven by the decoding engine.

encode / decode_step / predict follow the encoder-decoder equations:
h^t = encode(X^t), z_j = decode(h^t, z_{j-1}, y_{j-1}), y_j = predict(z_j).
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from onlinest.errors import ArgumentError
from onlinest.types import AudioFeatures, Vocabulary

SUBSAMPLING = 4


def encoder_length(n_frames: int) -> int:
    """Encoder positions produced for n_frames input frames: ceil(n / 4)."""
    return math.ceil(n_frames / SUBSAMPLING)


@dataclass(frozen=True, eq=False)
class EncoderStates:
    """h^t for a source prefix.

    ``hidden`` is None when the states live in another process (bridge).
    """
    hidden: Optional[np.ndarray]
    source_frames_consumed: int

    def __post_init__(self):
        if self.source_frames_consumed < 1:
            raise ArgumentError("encoder states need at least one consumed frame")
        if self.hidden is not None:
            if self.hidden.ndim != 2 or self.hidden.shape[1] < 1:
                raise ArgumentError(f"hidden must be H x E with E > 0, got {self.hidden.shape}")
            if self.hidden.shape[0] != self.length:
                raise ArgumentError(
                    f"hidden has {self.hidden.shape[0]} positions, expected {self.length} "
                    f"for {self.source_frames_consumed} frames"
                )

    @property
    def length(self) -> int:
        return encoder_length(self.source_frames_consumed)


@dataclass(frozen=True, eq=False)
class DecoderState:
    """z_j: per-layer recurrent hidden and cell vectors plus the last attention context."""
    hidden: Tuple[np.ndarray, ...]
    cell: Tuple[np.ndarray, ...]
    context: np.ndarray
    attention: np.ndarray


def predict(scores: np.ndarray) -> int:
    """Greedy prediction; ties go to the lowest token id."""
    return int(np.argmax(scores))


class SpeechTranslationModel(ABC):
    """Interface for any offline-trained attention encoder-decoder.

    The session hooks (begin/commit/rollback/end) are no-ops for in-process
    models whose decoder states are owned by the caller; remote models use
    them to keep server-side state in step with the engine.
    """

    concurrent_sessions: bool = True

    @property
    @abstractmethod
    def vocab(self) -> Vocabulary:
        ...

    @property
    @abstractmethod
    def input_dim(self) -> int:
        """Feature dimension D the encoder expects."""
        ...

    @abstractmethod
    def encode(self, features: AudioFeatures) -> EncoderStates:
        ...

    @abstractmethod
    def init_decoder_state(self) -> Any:
        """z_0."""
        ...

    @abstractmethod
    def decode_step(self, enc: EncoderStates, z_prev: Any, y_prev: int) -> Tuple[Any, np.ndarray]:
        """Advance the decoder one token; returns (z_j, length-V scores)."""
        ...

    def begin_utterance(self, utt_id: Optional[str] = None) -> None:
        pass

    def commit(self, n: int) -> None:
        pass

    def rollback(self) -> None:
        pass

    def end_utterance(self) -> None:
        pass
