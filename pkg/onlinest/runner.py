"""
onlinest Runner - Facade tying corpus, model, engine, metrics and reports together.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .config import OnlineConfig, PolicyConfig
from .errors import ConfigurationError
from .harness.corpus import SyntheticCorpus, gen_synthetic, load_manifest
from .harness.report import (
    best_per_regime,
    format_regimes,
    pareto_front,
    write_plot_data,
    write_results_tsv,
    write_score_report,
)
from .harness.sweep import OFFLINE_LABEL, ResultRow, SweepGrid, SweepResult, decode_corpus, run_sweep, score_records, score_trace
from .harness.traces import write_traces
from .metrics.latency import ALVariant
from .model.base import SpeechTranslationModel
from .model.toy import ModelDims, ToyModel
from .tokenization import BpeModel, CharDelay
from .types import Granularity, Vocabulary

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
TOY_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class OnlineRunner:
    """Runs corpus generation, single decodes, sweeps and re-scoring from one OnlineConfig."""

    def __init__(self, cfg: OnlineConfig, model: Optional[SpeechTranslationModel] = None):
        self.cfg = cfg
        self._model = model

    @property
    def model(self) -> SpeechTranslationModel:
        if self._model is None:
            self._model = self._load_model()
        return self._model

    def _load_model(self) -> SpeechTranslationModel:
        if self.cfg.use_bridge:
            from .bridge.client import remote_model

            logger.info(f"[OnlineRunner] Connecting to bridge at {self.cfg.bridge_url}")
            return remote_model(self.cfg.bridge_url, timeout_s=self.cfg.bridge_timeout_s)
        if not self.cfg.model_path:
            raise ConfigurationError("no model: set model_path (ONLINEST_MODEL_PATH) or use_bridge")
        logger.info(f"[OnlineRunner] Loading toy model from {self.cfg.model_path}")
        return ToyModel.load(self.cfg.model_path)

    def close(self) -> None:
        close = getattr(self._model, "close", None)
        if callable(close):
            close()

    @property
    def _char_delay(self) -> CharDelay:
        return CharDelay(self.cfg.char_delay)

    @property
    def _al_variant(self) -> ALVariant:
        return ALVariant(self.cfg.al_variant)

    def _target_vocab(self) -> Vocabulary:
        """Vocabulary for a generated toy model: characters, or BPE units from the merge file."""
        if self.cfg.granularity != Granularity.BPE.value:
            return Vocabulary.for_chars(TOY_ALPHABET)
        if not self.cfg.merges_path:
            raise ConfigurationError("bpe granularity needs a merge file (merges_path / ONLINEST_MERGES_PATH)")
        bpe = BpeModel.from_file(self.cfg.merges_path)
        logger.info(f"[OnlineRunner] BPE vocabulary from {len(bpe.merges)} merges in {self.cfg.merges_path}")
        return bpe.vocabulary(TOY_ALPHABET)

    def _out_dir(self, out_dir: Optional[PathLike], run_id: str) -> Path:
        path = Path(out_dir) if out_dir is not None else self.cfg.run_path(run_id)
        path.mkdir(parents=True, exist_ok=True)
        return path

    # --- operations ---

    def generate(
        self,
        out_dir: PathLike,
        seed: int,
        n_utts: int,
        len_range: Tuple[int, int] = (40, 80),
        dims: Optional[ModelDims] = None,
    ) -> SyntheticCorpus:
        return gen_synthetic(
            out_dir,
            seed=seed,
            n_utts=n_utts,
            len_range=len_range,
            dims=dims,
            vocab=self._target_vocab(),
            frame_ms=self.cfg.frame_ms,
            max_length_ratio=self.cfg.max_length_ratio,
        )

    def run(self, manifest_path: PathLike, policy: Optional[PolicyConfig], out_dir: Optional[PathLike] = None) -> ResultRow:
        """Decode the corpus under one policy (None: offline) and score it."""
        manifest = load_manifest(manifest_path)
        label = policy.label if policy else OFFLINE_LABEL
        out = self._out_dir(out_dir, label)
        records = decode_corpus(self.model, manifest, policy, self.cfg.max_length_ratio, self.cfg.workers)
        write_traces(out / "traces" / f"{label}.jsonl", records)
        row = score_records(records, manifest, self.model.vocab, self._al_variant, self._char_delay)
        write_results_tsv(out / "results.tsv", [row])
        write_score_report(out / "scores.jsonl", [row], self._al_variant)
        logger.info(f"[OnlineRunner] {label}: BLEU={row.bleu:.2f} AL={row.al_ms:.2f}ms -> {out}")
        return row

    def sweep(
        self,
        manifest_path: PathLike,
        grid: Optional[SweepGrid] = None,
        label: str = "model",
        out_dir: Optional[PathLike] = None,
    ) -> SweepResult:
        """Full (k, s, N) sweep; writes table, score report, traces and plot data."""
        manifest = load_manifest(manifest_path)
        grid = grid or SweepGrid.from_config(self.cfg)
        out = self._out_dir(out_dir, f"sweep_{label}")
        result = run_sweep(
            self.model,
            manifest,
            grid,
            max_length_ratio=self.cfg.max_length_ratio,
            workers=self.cfg.workers,
            include_offline=self.cfg.include_offline,
            char_delay=self._char_delay,
            trace_dir=out / "traces",
        )
        self._write_outputs(out, result.rows, grid.al_variant, label)
        return result

    def score(
        self,
        trace_paths: Sequence[PathLike],
        manifest_path: PathLike,
        label: str = "model",
        out_dir: Optional[PathLike] = None,
    ) -> List[ResultRow]:
        """Re-score stored traces under the configured AL variant."""
        manifest = load_manifest(manifest_path)
        rows = score_trace(trace_paths, manifest, self.model.vocab, self._al_variant, self._char_delay)
        self._write_outputs(self._out_dir(out_dir, f"score_{label}"), rows, self._al_variant, label)
        return rows

    def _write_outputs(self, out: Path, rows: List[ResultRow], al_variant: ALVariant, label: str) -> None:
        write_results_tsv(out / "results.tsv", rows)
        write_score_report(out / "scores.jsonl", rows, al_variant)
        write_plot_data(out / "plots" / f"{label}.dat", rows, label)
        write_plot_data(out / "plots" / f"{label}.pareto.dat", pareto_front(rows), f"{label} pareto front")
        logger.info(f"[OnlineRunner] Wrote {len(rows)} rows to {out}")
        logger.info("[OnlineRunner] Best per latency regime:\n" + format_regimes(best_per_regime(rows)))
