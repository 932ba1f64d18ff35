"""Model interface and the in-process toy model."""

from .base import DecoderState, EncoderStates, SpeechTranslationModel, encoder_length, predict
from .toy import ModelDims, ToyModel, ToyModelWeights, generate_toy_model

__all__ = [
    "DecoderState",
    "EncoderStates",
    "SpeechTranslationModel",
    "encoder_length",
    "predict",
    "ModelDims",
    "ToyModel",
    "ToyModelWeights",
    "generate_toy_model",
]
