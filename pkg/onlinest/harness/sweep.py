"""
(k, s, N) sweeps over a corpus and re-scoring of stored traces.

Each configuration yields one ResultRow: corpus BLEU against the manifest
references and the mean per-utterance AL in ms. Rows are sorted by AL.
"""
from __future__ import annotations

import concurrent.futures
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from onlinest.config import EngineConfig, OnlineConfig, PolicyConfig
from onlinest.engine import StopReason, offline_greedy, offline_trace, online_decode
from onlinest.errors import ConfigurationError, OnlineSTError, UtteranceError
from onlinest.harness.corpus import Manifest, ManifestRecord
from onlinest.harness.traces import OFFLINE_STOP, TraceRecord, read_traces, write_traces
from onlinest.metrics.bleu import corpus_bleu
from onlinest.metrics.latency import ALVariant, mean_al, utterance_al_ms
from onlinest.model.base import SpeechTranslationModel
from onlinest.tokenization import CharDelay, detokenize
from onlinest.types import Granularity, Vocabulary, validate_trace

logger = logging.getLogger(__name__)

OFFLINE_LABEL = "offline"


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid of policies plus how they are scored."""
    k_values: Tuple[int, ...]
    s_values: Tuple[int, ...]
    n_values: Tuple[int, ...]
    al_variant: ALVariant = ALVariant.WORD_ADAPTIVE
    granularity: Optional[Granularity] = None  # None: whatever the model's vocabulary uses

    def __post_init__(self):
        for name in ("k_values", "s_values", "n_values"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ConfigurationError(f"sweep grid {name} must be non-empty")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "al_variant", ALVariant(self.al_variant))
        if self.granularity is not None:
            object.__setattr__(self, "granularity", Granularity(self.granularity))
        self.policies()  # validates every value

    def policies(self) -> List[PolicyConfig]:
        return [PolicyConfig(k, s, n) for k, s, n in itertools.product(self.k_values, self.s_values, self.n_values)]

    @classmethod
    def from_config(cls, cfg: OnlineConfig) -> "SweepGrid":
        return cls(
            tuple(cfg.sweep_k),
            tuple(cfg.sweep_s),
            tuple(cfg.sweep_n),
            al_variant=ALVariant(cfg.al_variant),
            granularity=cfg.granularity or None,
        )


@dataclass(frozen=True)
class ResultRow:
    """One line of the results table; k, s and N are None for the offline row."""
    k: Optional[int]
    s: Optional[int]
    N: Optional[int]
    bleu: float
    al_ms: float

    @property
    def is_offline(self) -> bool:
        return self.k is None

    @property
    def label(self) -> str:
        return OFFLINE_LABEL if self.is_offline else f"k{self.k}_s{self.s}_N{self.N}"

    def sort_key(self) -> tuple:
        return (self.al_ms, self.is_offline, self.k or 0, self.s or 0, self.N or 0)


def sort_rows(rows: Iterable[ResultRow]) -> List[ResultRow]:
    return sorted(rows, key=ResultRow.sort_key)


@dataclass
class SweepResult:
    rows: List[ResultRow]
    traces: Dict[str, List[TraceRecord]] = field(default_factory=dict)


def _decode_one(
    model: SpeechTranslationModel,
    manifest: Manifest,
    rec: ManifestRecord,
    policy: Optional[PolicyConfig],
    max_length_ratio: float,
) -> TraceRecord:
    eos_id = model.vocab.eos_id
    try:
        feats = manifest.load_features(rec)
        if policy is None:
            hyp = offline_greedy(model, feats, max_length_ratio, utt_id=rec.id)
            return TraceRecord.from_parts(rec.id, None, hyp, offline_trace(hyp, feats), OFFLINE_STOP, eos_id)
        result = online_decode(model, feats, EngineConfig(policy, max_length_ratio), utt_id=rec.id)
        problems = validate_trace(result.trace, policy, result.hypothesis)
        if problems:
            raise UtteranceError(rec.id, f"trace violates the schedule: {'; '.join(problems)}")
        return TraceRecord.from_result(rec.id, policy, result, eos_id)
    except UtteranceError:
        raise
    except Exception as e:
        raise UtteranceError(rec.id, f"{type(e).__name__}: {e}") from e


def decode_corpus(
    model: SpeechTranslationModel,
    manifest: Manifest,
    policy: Optional[PolicyConfig],
    max_length_ratio: float = 1.0,
    workers: int = 1,
) -> List[TraceRecord]:
    """Decode every utterance under one policy (None: offline). Records come back in manifest order."""
    n_workers = workers if model.concurrent_sessions else 1
    records = list(manifest)
    if n_workers <= 1 or len(records) <= 1:
        return [_decode_one(model, manifest, rec, policy, max_length_ratio) for rec in records]
    with concurrent.futures.ThreadPoolExecutor(max_workers=min(n_workers, len(records))) as executor:
        # map re-raises the first failure in manifest order
        return list(executor.map(lambda rec: _decode_one(model, manifest, rec, policy, max_length_ratio), records))


def score_records(
    records: Sequence[TraceRecord],
    manifest: Manifest,
    vocab: Vocabulary,
    al_variant: ALVariant = ALVariant.WORD_ADAPTIVE,
    char_delay: CharDelay = CharDelay.SEPARATOR,
) -> ResultRow:
    """Score the traces of one configuration; every manifest id must appear exactly once."""
    if not records:
        raise ConfigurationError("no trace records to score")
    keys = {r.config_key for r in records}
    if len(keys) != 1:
        raise ConfigurationError(f"records mix configurations: {sorted(keys, key=str)}")
    by_id = {}
    for rec in records:
        if rec.id in by_id:
            raise UtteranceError(rec.id, "appears twice in the traces of one configuration")
        by_id[rec.id] = rec
    refs = manifest.by_id()
    for utt_id in by_id:
        if utt_id not in refs:
            raise UtteranceError(utt_id, "not present in the manifest")

    hyps_text, refs_text, als = [], [], []
    for m in manifest:
        rec = by_id.get(m.id)
        if rec is None:
            raise UtteranceError(m.id, "has no trace")
        try:
            hyp, trace = rec.to_result()
            hyps_text.append(detokenize(hyp.content_ids, vocab))
            refs_text.append(m.reference)
            als.append(utterance_al_ms(hyp, trace, vocab, m.reference, al_variant, char_delay))
        except OnlineSTError as e:
            raise UtteranceError(m.id, str(e)) from e

    k, s, n = next(iter(keys))
    return ResultRow(k=k, s=s, N=n, bleu=corpus_bleu(hyps_text, refs_text), al_ms=mean_al(als))


def _check_granularity(grid: SweepGrid, vocab: Vocabulary) -> None:
    if grid.granularity is not None and grid.granularity != vocab.granularity:
        raise ConfigurationError(
            f"grid expects {grid.granularity.value} tokens, model vocabulary is {vocab.granularity.value}"
        )


def run_sweep(
    model: SpeechTranslationModel,
    manifest: Manifest,
    grid: SweepGrid,
    max_length_ratio: float = 1.0,
    workers: int = 1,
    include_offline: bool = True,
    char_delay: CharDelay = CharDelay.SEPARATOR,
    trace_dir: Optional[Union[str, Path]] = None,
) -> SweepResult:
    """Decode and score every grid configuration (plus the offline baseline)."""
    _check_granularity(grid, model.vocab)
    configs: List[Optional[PolicyConfig]] = list(grid.policies())
    if include_offline:
        configs.append(None)

    rows: List[ResultRow] = []
    traces: Dict[str, List[TraceRecord]] = {}
    for policy in configs:
        label = policy.label if policy else OFFLINE_LABEL
        records = decode_corpus(model, manifest, policy, max_length_ratio, workers)
        row = score_records(records, manifest, model.vocab, grid.al_variant, char_delay)
        traces[label] = records
        rows.append(row)
        if trace_dir is not None:
            write_traces(Path(trace_dir) / f"{label}.jsonl", records)
        stops = sum(1 for r in records if r.stop_reason == StopReason.MAX_LENGTH.value)
        logger.info(
            f"[Sweep] {label}: BLEU={row.bleu:.2f} AL={row.al_ms:.2f}ms "
            f"({len(records)} utterances, {stops} stopped at max length)"
        )
    return SweepResult(rows=sort_rows(rows), traces=traces)


def score_trace(
    trace_paths: Sequence[Union[str, Path]],
    manifest: Manifest,
    vocab: Vocabulary,
    al_variant: ALVariant = ALVariant.WORD_ADAPTIVE,
    char_delay: CharDelay = CharDelay.SEPARATOR,
) -> List[ResultRow]:
    """Rebuild the results table from trace files; identical to run_sweep on the same traces."""
    grouped: Dict[tuple, List[TraceRecord]] = {}
    for path in trace_paths:
        for rec in read_traces(path):
            grouped.setdefault(rec.config_key, []).append(rec)
    if not grouped:
        raise ConfigurationError("no trace records found")
    rows = [score_records(recs, manifest, vocab, al_variant, char_delay) for recs in grouped.values()]
    logger.info(f"[Sweep] Rescored {len(rows)} configuration(s) from {len(trace_paths)} trace file(s)")
    return sort_rows(rows)
