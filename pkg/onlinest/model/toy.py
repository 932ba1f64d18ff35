"""
Miniature seeded encoder-decoder with the full-scale architecture at toy width.

Encoder: two VGG-like blocks (two 3x3 convolutions + one 2x2 max-pool each,
so T x D becomes ceil(T/4) x ceil(D/4) per channel), then a stack of
bidirectional LSTM layers. Decoder: additive (Bahdanau) attention feeding a
stack of unidirectional LSTM layers and a linear output projection.

Weights are never trained; they are drawn uniformly from [-0.1, 0.1].
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from onlinest.errors import ArgumentError, ConfigurationError, FormatError, StateError
from onlinest.formats.sstm import read_tensors, write_tensors
from onlinest.model.base import DecoderState, EncoderStates, SpeechTranslationModel
from onlinest.types import AudioFeatures, Vocabulary

logger = logging.getLogger(__name__)

INIT_RANGE = 0.1
CONV_KERNEL = 3


@dataclass(frozen=True)
class ModelDims:
    """Toy layer sizes. enc_dim is the concatenated (forward + backward) encoder width."""
    input_dim: int = 16
    conv_channels: int = 4
    enc_dim: int = 16
    enc_layers: int = 2
    dec_dim: int = 16
    dec_layers: int = 2
    att_dim: int = 16
    emb_dim: int = 16

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not isinstance(val, int) or val < 1:
                raise ConfigurationError(f"model dim {name} must be a positive integer, got {val!r}")
        if self.enc_dim % 2:
            raise ConfigurationError(f"enc_dim must be even (two directions), got {self.enc_dim}")

    @property
    def pooled_dim(self) -> int:
        """Feature bins left after two 2x pools."""
        return math.ceil(math.ceil(self.input_dim / 2) / 2)


def declared_shapes(dims: ModelDims, vocab_size: int) -> Dict[str, Tuple[int, ...]]:
    """Every tensor of the toy architecture, in serialization order."""
    c, kk = dims.conv_channels, CONV_KERNEL
    shapes: Dict[str, Tuple[int, ...]] = {}
    in_ch = 1
    for block in (1, 2):
        for j in (0, 1):
            shapes[f"conv{block}.{j}.weight"] = (c, in_ch, kk, kk)
            shapes[f"conv{block}.{j}.bias"] = (c,)
            in_ch = c

    half = dims.enc_dim // 2
    in_dim = c * dims.pooled_dim
    for layer in range(dims.enc_layers):
        for direction in ("fw", "bw"):
            prefix = f"enc.{layer}.{direction}"
            shapes[f"{prefix}.W"] = (4 * half, in_dim)
            shapes[f"{prefix}.U"] = (4 * half, half)
            shapes[f"{prefix}.b"] = (4 * half,)
        in_dim = dims.enc_dim

    shapes["att.W_enc"] = (dims.att_dim, dims.enc_dim)
    shapes["att.W_dec"] = (dims.att_dim, dims.dec_dim)
    shapes["att.b"] = (dims.att_dim,)
    shapes["att.v"] = (dims.att_dim,)

    shapes["dec.embed"] = (vocab_size, dims.emb_dim)
    in_dim = dims.emb_dim + dims.enc_dim
    for layer in range(dims.dec_layers):
        shapes[f"dec.{layer}.W"] = (4 * dims.dec_dim, in_dim)
        shapes[f"dec.{layer}.U"] = (4 * dims.dec_dim, dims.dec_dim)
        shapes[f"dec.{layer}.b"] = (4 * dims.dec_dim,)
        in_dim = dims.dec_dim

    shapes["out.W"] = (vocab_size, dims.dec_dim + dims.enc_dim)
    shapes["out.b"] = (vocab_size,)
    return shapes


@dataclass(frozen=True, eq=False)
class ToyModelWeights:
    """Named tensors of the toy model plus the vocabulary and seed they belong to."""
    tensors: Dict[str, np.ndarray]
    dims: ModelDims
    vocab: Vocabulary
    seed: int

    def __post_init__(self):
        expected = declared_shapes(self.dims, self.vocab.size)
        missing = [n for n in expected if n not in self.tensors]
        if missing:
            raise FormatError(f"missing tensors: {', '.join(missing)}")
        extra = [n for n in self.tensors if n not in expected]
        if extra:
            raise FormatError(f"unexpected tensors: {', '.join(extra)}")
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != shape:
                raise FormatError(f"tensor {name} has shape {self.tensors[name].shape}, expected {shape}")

    def save(self, path: Union[str, Path]) -> Path:
        """Write <path> (SSTM) and its <path>.json sidecar with dims, vocab and seed."""
        path = Path(path)
        ordered = {name: self.tensors[name] for name in declared_shapes(self.dims, self.vocab.size)}
        write_tensors(path, ordered)
        meta = {"seed": self.seed, "dims": asdict(self.dims), "vocab": self.vocab.to_dict()}
        sidecar_path(path).write_text(json.dumps(meta, ensure_ascii=False, indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ToyModelWeights":
        path = Path(path)
        try:
            meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
            dims = ModelDims(**meta["dims"])
            seed = int(meta["seed"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise FormatError(f"cannot read model sidecar for {path}: {e}") from e
        vocab = Vocabulary.from_dict(meta["vocab"])
        return cls(tensors=read_tensors(path), dims=dims, vocab=vocab, seed=seed)


def sidecar_path(weights_path: Union[str, Path]) -> Path:
    return Path(weights_path).with_suffix(".json")


def generate_toy_model(seed: int, dims: ModelDims, vocab: Vocabulary) -> ToyModelWeights:
    """Reproducible weights from seed, uniform in [-0.1, 0.1]."""
    rng = np.random.default_rng(seed)
    tensors = {
        name: rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape).astype(np.float32)
        for name, shape in declared_shapes(dims, vocab.size).items()
    }
    logger.info(f"[ToyModel] Generated {len(tensors)} tensors (seed={seed}, V={vocab.size})")
    return ToyModelWeights(tensors=tensors, dims=dims, vocab=vocab, seed=seed)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


def _conv2d_same(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    # x: (C_in, T, F), weight: (C_out, C_in, 3, 3) -> (C_out, T, F), zero padding
    pad = CONV_KERNEL // 2
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (CONV_KERNEL, CONV_KERNEL), axis=(1, 2))
    return np.einsum("ctfij,ocij->otf", windows, weight) + bias[:, None, None]


def _max_pool_2x2(x: np.ndarray) -> np.ndarray:
    # odd lengths replicate the last row/column so the output is ceil(n / 2)
    if x.shape[1] % 2:
        x = np.concatenate([x, x[:, -1:, :]], axis=1)
    if x.shape[2] % 2:
        x = np.concatenate([x, x[:, :, -1:]], axis=2)
    c, t, f = x.shape
    return x.reshape(c, t // 2, 2, f // 2, 2).max(axis=(2, 4))


def _lstm_cell(gates_x: np.ndarray, h: np.ndarray, c: np.ndarray, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gates = gates_x + U @ h
    i, f, g, o = np.split(gates, 4)
    c_new = _sigmoid(f) * c + _sigmoid(i) * np.tanh(g)
    h_new = _sigmoid(o) * np.tanh(c_new)
    return h_new, c_new


class ToyModel(SpeechTranslationModel):
    """In-process numpy forward pass over ToyModelWeights."""

    def __init__(self, weights: ToyModelWeights):
        self.weights = weights
        self.dims = weights.dims
        self._vocab = weights.vocab
        self._w = {name: t.astype(np.float64) for name, t in weights.tensors.items()}
        logger.info(f"[ToyModel] Ready: D={self.dims.input_dim}, E={self.dims.enc_dim}, V={self._vocab.size}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ToyModel":
        return cls(ToyModelWeights.load(path))

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def input_dim(self) -> int:
        return self.dims.input_dim

    def encode(self, features: AudioFeatures) -> EncoderStates:
        if features.num_frames < 1:
            raise ArgumentError("cannot encode an empty prefix")
        if features.dim != self.dims.input_dim:
            raise ConfigurationError(f"features have D={features.dim}, model expects {self.dims.input_dim}")

        x = features.frames.astype(np.float64)[None]
        for block in (1, 2):
            for j in (0, 1):
                name = f"conv{block}.{j}"
                x = np.maximum(_conv2d_same(x, self._w[f"{name}.weight"], self._w[f"{name}.bias"]), 0.0)
            x = _max_pool_2x2(x)

        c, h, f = x.shape
        seq = x.transpose(1, 0, 2).reshape(h, c * f)
        for layer in range(self.dims.enc_layers):
            fw = self._run_lstm(seq, f"enc.{layer}.fw", reverse=False)
            bw = self._run_lstm(seq, f"enc.{layer}.bw", reverse=True)
            seq = np.concatenate([fw, bw], axis=1)
        return EncoderStates(hidden=seq, source_frames_consumed=features.num_frames)

    def _run_lstm(self, xs: np.ndarray, prefix: str, reverse: bool) -> np.ndarray:
        W, U, b = self._w[f"{prefix}.W"], self._w[f"{prefix}.U"], self._w[f"{prefix}.b"]
        n = U.shape[1]
        proj = xs @ W.T + b
        h, c = np.zeros(n), np.zeros(n)
        out = np.empty((xs.shape[0], n))
        order = range(xs.shape[0] - 1, -1, -1) if reverse else range(xs.shape[0])
        for i in order:
            h, c = _lstm_cell(proj[i], h, c, U)
            out[i] = h
        return out

    def init_decoder_state(self) -> DecoderState:
        d = self.dims
        return DecoderState(
            hidden=tuple(np.zeros(d.dec_dim) for _ in range(d.dec_layers)),
            cell=tuple(np.zeros(d.dec_dim) for _ in range(d.dec_layers)),
            context=np.zeros(d.enc_dim),
            attention=np.zeros(0),
        )

    def _check_state(self, z: DecoderState) -> None:
        d = self.dims
        if not isinstance(z, DecoderState):
            raise StateError(f"expected DecoderState, got {type(z).__name__}")
        if len(z.hidden) != d.dec_layers or len(z.cell) != d.dec_layers:
            raise StateError(f"decoder state has {len(z.hidden)} layers, model has {d.dec_layers}")
        for vec in (*z.hidden, *z.cell):
            if vec.shape != (d.dec_dim,):
                raise StateError(f"decoder vector of shape {vec.shape}, expected ({d.dec_dim},)")
        if z.context.shape != (d.enc_dim,):
            raise StateError(f"context of shape {z.context.shape}, expected ({d.enc_dim},)")

    def attend(self, enc: EncoderStates, query: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Additive attention: returns (weights over H positions, context vector)."""
        hs = enc.hidden
        energy = np.tanh(hs @ self._w["att.W_enc"].T + self._w["att.W_dec"] @ query + self._w["att.b"]) @ self._w["att.v"]
        weights = _softmax(energy)
        return weights, weights @ hs

    def decode_step(self, enc: EncoderStates, z_prev: DecoderState, y_prev: int) -> Tuple[DecoderState, np.ndarray]:
        if enc.hidden is None:
            raise StateError("encoder states are not held in this process")
        self._check_state(z_prev)
        if not 0 <= y_prev < self._vocab.size:
            raise ArgumentError(f"previous token id {y_prev} outside vocabulary")

        att, ctx = self.attend(enc, z_prev.hidden[-1])
        x = np.concatenate([self._w["dec.embed"][y_prev], ctx])
        hidden: List[np.ndarray] = []
        cell: List[np.ndarray] = []
        for layer in range(self.dims.dec_layers):
            prefix = f"dec.{layer}"
            h, c = _lstm_cell(
                self._w[f"{prefix}.W"] @ x + self._w[f"{prefix}.b"],
                z_prev.hidden[layer],
                z_prev.cell[layer],
                self._w[f"{prefix}.U"],
            )
            hidden.append(h)
            cell.append(c)
            x = h
        scores = self._w["out.W"] @ np.concatenate([x, ctx]) + self._w["out.b"]
        return DecoderState(tuple(hidden), tuple(cell), ctx, att), scores
