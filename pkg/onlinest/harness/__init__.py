from onlinest.harness.corpus import (
    Manifest,
    ManifestRecord,
    SyntheticCorpus,
    gen_synthetic,
    load_manifest,
    write_manifest,
)
from onlinest.harness.report import (
    best_per_regime,
    format_results_table,
    pareto_front,
    write_plot_data,
    write_results_tsv,
    write_score_report,
)
from onlinest.harness.sweep import (
    ResultRow,
    SweepGrid,
    SweepResult,
    decode_corpus,
    run_sweep,
    score_records,
    score_trace,
)
from onlinest.harness.traces import TraceRecord, read_traces, write_traces

__all__ = [
    "Manifest",
    "ManifestRecord",
    "ResultRow",
    "SweepGrid",
    "SweepResult",
    "SyntheticCorpus",
    "TraceRecord",
    "best_per_regime",
    "decode_corpus",
    "format_results_table",
    "gen_synthetic",
    "load_manifest",
    "pareto_front",
    "read_traces",
    "run_sweep",
    "score_records",
    "score_trace",
    "write_manifest",
    "write_plot_data",
    "write_results_tsv",
    "write_score_report",
]
