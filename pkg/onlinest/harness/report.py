"""Result outputs: TSV table, JSONL score report, plot data, trade-off selections."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from onlinest.harness.sweep import ResultRow, sort_rows
from onlinest.metrics.latency import ALVariant

TSV_COLUMNS = ("k", "s", "N", "bleu", "al_ms")
PLOT_HEADER = "AL BLEU"

# upper AL bounds (ms) of the low / medium / high latency regimes
LATENCY_REGIMES: Tuple[Tuple[str, float], ...] = (("low", 1000.0), ("medium", 2000.0), ("high", 4000.0))


def format_results_table(rows: Sequence[ResultRow]) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for r in rows:
        if r.is_offline:
            head = ["offline", "-", "-"]
        else:
            head = [str(r.k), str(r.s), str(r.N)]
        lines.append("\t".join(head + [f"{r.bleu:.2f}", f"{r.al_ms:.2f}"]))
    return "\n".join(lines) + "\n"


def write_results_tsv(path: Union[str, Path], rows: Sequence[ResultRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_results_table(rows), encoding="utf-8")
    return path


def write_score_report(path: Union[str, Path], rows: Sequence[ResultRow], al_variant: ALVariant) -> Path:
    """One JSON record per row: {k, s, N, bleu, al_ms, al_variant}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    variant = ALVariant(al_variant).value
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            record = {"k": r.k, "s": r.s, "N": r.N, "bleu": r.bleu, "al_ms": r.al_ms, "al_variant": variant}
            f.write(json.dumps(record) + "\n")
    return path


def write_plot_data(path: Union[str, Path], rows: Iterable[ResultRow], label: Optional[str] = None) -> Path:
    """(AL, BLEU) points sorted by AL, one per line under an "AL BLEU" header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if label:
        lines.append(f"# {label}")
    lines.append(PLOT_HEADER)
    lines.extend(f"{r.al_ms:.2f} {r.bleu:.2f}" for r in sort_rows(rows))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def pareto_front(rows: Sequence[ResultRow]) -> List[ResultRow]:
    """Rows not beaten on both BLEU (higher) and AL (lower) by any other row."""
    front = []
    for r in rows:
        dominated = any(
            o is not r and o.bleu >= r.bleu and o.al_ms <= r.al_ms and (o.bleu > r.bleu or o.al_ms < r.al_ms)
            for o in rows
        )
        if not dominated:
            front.append(r)
    return sort_rows(front)


def best_per_regime(
    rows: Sequence[ResultRow],
    regimes: Sequence[Tuple[str, float]] = LATENCY_REGIMES,
) -> Dict[str, Optional[ResultRow]]:
    """Highest-BLEU online row within each regime's AL bound; lower AL breaks ties."""
    out: Dict[str, Optional[ResultRow]] = {}
    for name, bound in regimes:
        eligible = [r for r in rows if not r.is_offline and r.al_ms <= bound]
        out[name] = min(eligible, key=lambda r: (-r.bleu, r.sort_key())) if eligible else None
    return out


def format_regimes(best: Dict[str, Optional[ResultRow]], regimes: Sequence[Tuple[str, float]] = LATENCY_REGIMES) -> str:
    lines = []
    bounds = dict(regimes)
    for name, row in best.items():
        bound = bounds.get(name)
        if row is None:
            lines.append(f"{name} (AL <= {bound:.0f} ms): no configuration")
        else:
            lines.append(f"{name} (AL <= {bound:.0f} ms): {row.label} BLEU={row.bleu:.2f} AL={row.al_ms:.2f}ms")
    return "\n".join(lines)
