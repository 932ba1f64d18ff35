"""
Evaluation corpora: the JSONL manifest and the synthetic corpus generator.

Manifest layout: a header line ``{"frame_ms": 10.0}`` followed by one
``{"id", "features", "reference"}`` record per utterance. Feature paths are
relative to the manifest's directory.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from onlinest.engine import offline_greedy
from onlinest.errors import ArgumentError, FormatError, ModelError
from onlinest.formats.sstf import read_features, write_features
from onlinest.model.toy import ModelDims, ToyModel, ToyModelWeights, generate_toy_model
from onlinest.tokenization import detokenize
from onlinest.types import DEFAULT_FRAME_MS, AudioFeatures, Vocabulary

logger = logging.getLogger(__name__)

MAX_MODEL_ATTEMPTS = 32


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    features: str
    reference: str


@dataclass(frozen=True)
class Manifest:
    """Ordered utterance records sharing one frame duration."""
    records: Tuple[ManifestRecord, ...]
    frame_ms: float = DEFAULT_FRAME_MS
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "root", Path(self.root))
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise FormatError(f"duplicate utterance id {rec.id!r} in manifest")
            seen.add(rec.id)
        if not self.frame_ms > 0:
            raise FormatError(f"manifest frame_ms must be > 0, got {self.frame_ms}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ManifestRecord]:
        return iter(self.records)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def by_id(self) -> Dict[str, ManifestRecord]:
        return {r.id: r for r in self.records}

    def features_path(self, rec: ManifestRecord) -> Path:
        return self.root / rec.features

    def load_features(self, rec: ManifestRecord) -> AudioFeatures:
        feats = read_features(self.features_path(rec))
        if feats.frame_ms != self.frame_ms:
            raise FormatError(
                f"{rec.id}: features use frame_ms={feats.frame_ms}, manifest declares {self.frame_ms}"
            )
        return feats


def load_manifest(path: Union[str, Path], check_files: bool = True) -> Manifest:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        frame_ms = float(header["frame_ms"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}:1: expected a header with frame_ms: {e}") from e

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            data = json.loads(line)
            rec = ManifestRecord(id=str(data["id"]), features=str(data["features"]), reference=str(data["reference"]))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise FormatError(f"{path}:{lineno}: invalid manifest record: {e}") from e
        records.append(rec)

    manifest = Manifest(tuple(records), frame_ms=frame_ms, root=path.parent)
    if check_files:
        for rec in manifest:
            if not manifest.features_path(rec).is_file():
                raise FormatError(f"{path}: features for {rec.id!r} not found at {manifest.features_path(rec)}")
    return manifest


def write_manifest(path: Union[str, Path], manifest: Manifest) -> None:
    lines = [json.dumps({"frame_ms": manifest.frame_ms})]
    for rec in manifest:
        lines.append(json.dumps({"id": rec.id, "features": rec.features, "reference": rec.reference}, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SyntheticCorpus:
    manifest: Manifest
    manifest_path: Path
    model_path: Path
    weights: ToyModelWeights


def gen_synthetic(
    out_dir: Union[str, Path],
    seed: int,
    n_utts: int,
    len_range: Tuple[int, int] = (40, 80),
    dims: Optional[ModelDims] = None,
    vocab: Optional[Vocabulary] = None,
    frame_ms: float = DEFAULT_FRAME_MS,
    max_length_ratio: float = 1.0,
) -> SyntheticCorpus:
    """Random features plus a seeded toy model; references are its offline greedy outputs.

    Model seeds seed, seed+1, ... are tried until every reference contains at
    least one word, so the offline configuration scores BLEU 100.
    """
    if n_utts < 1:
        raise ArgumentError(f"n_utts must be >= 1, got {n_utts}")
    lo, hi = len_range
    if not 1 <= lo <= hi:
        raise ArgumentError(f"len_range must satisfy 1 <= lo <= hi, got {len_range}")
    dims = dims or ModelDims()
    vocab = vocab or Vocabulary.for_chars()

    out = Path(out_dir)
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng([seed, 0])
    utterances: List[Tuple[str, AudioFeatures]] = []
    for i in range(n_utts):
        n_frames = int(rng.integers(lo, hi + 1))
        frames = rng.standard_normal((n_frames, dims.input_dim)).astype(np.float32)
        utterances.append((f"utt{i:04d}", AudioFeatures(frames, frame_ms)))

    for attempt in range(MAX_MODEL_ATTEMPTS):
        weights = generate_toy_model(seed + attempt, dims, vocab)
        model = ToyModel(weights)
        references = []
        for utt_id, feats in utterances:
            hyp = offline_greedy(model, feats, max_length_ratio, utt_id=utt_id)
            references.append(detokenize(hyp.content_ids, vocab))
        empty = [utt_id for (utt_id, _), ref in zip(utterances, references) if not ref.split()]
        if not empty:
            break
        logger.warning(
            f"[Corpus] Model seed {seed + attempt} rejected: {len(empty)} reference(s) without words"
        )
    else:
        raise ModelError(f"no model seed in [{seed}, {seed + MAX_MODEL_ATTEMPTS}) yields non-empty references")

    records = []
    for (utt_id, feats), ref in zip(utterances, references):
        rel = f"features/{utt_id}.sstf"
        write_features(out / rel, feats)
        records.append(ManifestRecord(id=utt_id, features=rel, reference=ref))

    manifest = Manifest(tuple(records), frame_ms=frame_ms, root=out)
    manifest_path = out / "manifest.jsonl"
    write_manifest(manifest_path, manifest)
    model_path = weights.save(out / "model.sstm")
    logger.info(
        f"[Corpus] Wrote {n_utts} utterances to {out} (model seed {weights.seed}, T in [{lo}, {hi}])"
    )
    return SyntheticCorpus(manifest=manifest, manifest_path=manifest_path, model_path=model_path, weights=weights)
