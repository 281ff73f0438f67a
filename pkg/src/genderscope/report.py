"""Result tables in text, CSV, and JSON.

All emitters are pure: the same rows produce byte-identical documents, and
the three formats carry identical numeric values. CSV is comma-delimited
UTF-8 with a header row.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from typing import Sequence

from .metrics import AggregateCounts, BiasRatio, EpiceneBreakdown, ValidationScores, bias_ratio
from .polarity import GenderPolarityCounts

FORMATS = ("text", "csv", "json")


@dataclass(frozen=True)
class PolarityRow:
    label: str
    counts: GenderPolarityCounts

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("row label must be non-empty")


@dataclass(frozen=True)
class LlmRow:
    label: str
    counts: AggregateCounts

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("row label must be non-empty")


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def _text_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def _csv_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _json_doc(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def emit_polarity_table(rows: Sequence[PolarityRow], fmt: str = "text") -> str:
    """Columns: Dataset, G_M, G_F, G_M:G_F."""
    _check_format(fmt)
    if not rows:
        raise ValueError("need at least one row")
    if fmt == "json":
        return _json_doc(
            [
                {
                    "dataset": r.label,
                    "g_m": r.counts.g_m,
                    "g_f": r.counts.g_f,
                    "ratio": BiasRatio.from_counts(r.counts.g_m, r.counts.g_f).display,
                }
                for r in rows
            ]
        )
    header = ["Dataset", "G_M", "G_F", "G_M:G_F"]
    cells = [
        [
            r.label,
            str(r.counts.g_m),
            str(r.counts.g_f),
            BiasRatio.from_counts(r.counts.g_m, r.counts.g_f).display,
        ]
        for r in rows
    ]
    return _csv_table(header, cells) if fmt == "csv" else _text_table(header, cells)


def emit_llm_table(rows: Sequence[LlmRow], fmt: str = "text") -> str:
    """Columns: Dataset, L_*M, L_*F, L_N, L_P, L_PM, L_PF, L_PM:L_PF."""
    _check_format(fmt)
    if not rows:
        raise ValueError("need at least one row")
    if fmt == "json":
        return _json_doc(
            [
                {
                    "dataset": r.label,
                    "l_all_m": r.counts.l_all_m,
                    "l_all_f": r.counts.l_all_f,
                    "l_n_any": r.counts.l_n_any,
                    "l_p_any": r.counts.l_p_any,
                    "l_p_m": r.counts.l_p_m,
                    "l_p_f": r.counts.l_p_f,
                    "ratio": bias_ratio(r.counts).display,
                }
                for r in rows
            ]
        )
    header = ["Dataset", "L_*M", "L_*F", "L_N", "L_P", "L_PM", "L_PF", "L_PM:L_PF"]
    cells = [
        [
            r.label,
            str(r.counts.l_all_m),
            str(r.counts.l_all_f),
            str(r.counts.l_n_any),
            str(r.counts.l_p_any),
            str(r.counts.l_p_m),
            str(r.counts.l_p_f),
            bias_ratio(r.counts).display,
        ]
        for r in rows
    ]
    return _csv_table(header, cells) if fmt == "csv" else _text_table(header, cells)


def _mean_sd_cell(values: list[float]) -> tuple[str, float | None, float | None]:
    """Format defined score values as percentage "mean ± sd" with sample sd
    (0.00 for a single run)."""
    if not values:
        return "n/a", None, None
    percents = [v * 100.0 for v in values]
    mean = statistics.mean(percents)
    sd = statistics.stdev(percents) if len(percents) > 1 else 0.0
    return f"{mean:.2f} ± {sd:.2f}", round(mean, 2), round(sd, 2)


def emit_validation_table(
    per_model_runs: Sequence[tuple[str, Sequence[ValidationScores]]], fmt: str = "text"
) -> str:
    """Per-model mean ± sample sd of accuracy, precision, recall, F-score as
    percentages over repeated runs. A runs column records the repetition
    count; single-run rows are footnoted in the text format."""
    _check_format(fmt)
    if not per_model_runs:
        raise ValueError("need at least one model")
    metric_names = ("accuracy", "precision", "recall", "f_score")
    json_records = []
    cells = []
    single_run = False
    for model_id, runs in per_model_runs:
        if not runs:
            raise ValueError(f"model {model_id!r} has no runs")
        single_run = single_run or len(runs) == 1
        row = [model_id]
        record: dict = {"model": model_id, "runs": len(runs)}
        for name in metric_names:
            values = [getattr(s, name) for s in runs if getattr(s, name) is not None]
            cell, mean, sd = _mean_sd_cell(values)
            row.append(cell)
            record[name] = None if mean is None else {"mean": mean, "sd": sd}
        row.append(str(len(runs)))
        cells.append(row)
        json_records.append(record)
    if fmt == "json":
        return _json_doc(json_records)
    header = ["Model", "Accuracy (%)", "Precision (%)", "Recall (%)", "F-score (%)", "Runs"]
    if fmt == "csv":
        return _csv_table(header, cells)
    doc = _text_table(header, cells)
    if single_run:
        doc += "note: rows with Runs = 1 report sd 0.00 (not estimable from one run)\n"
    return doc


def emit_epicene_table(breakdown: EpiceneBreakdown, fmt: str = "text") -> str:
    """Rows: Word, Person, Gender, Frequency; text and JSON also carry the
    person-referencing totals and feminine share (CSV is rows only)."""
    _check_format(fmt)
    share = breakdown.feminine_share
    share_text = "n/a" if share is None else f"{share * 100.0:.2f}%"
    if fmt == "json":
        return _json_doc(
            {
                "rows": [
                    {
                        "word": r.surface,
                        "person": r.person,
                        "gender": r.gender.value,
                        "frequency": r.frequency,
                    }
                    for r in breakdown.rows
                ],
                "totals": {
                    "feminine_count": breakdown.feminine_count,
                    "masculine_count": breakdown.masculine_count,
                    "feminine_share": None if share is None else round(share, 4),
                },
            }
        )
    header = ["Word", "Person", "Gender", "Frequency"]
    cells = [
        [r.surface, "P" if r.person else "N", r.gender.value, str(r.frequency)] for r in breakdown.rows
    ]
    if fmt == "csv":
        return _csv_table(header, cells)
    doc = _text_table(header, cells) if cells else "(no epicene words found)\n"
    doc += (
        f"person-referencing epicene occurrences: feminine {breakdown.feminine_count}, "
        f"masculine {breakdown.masculine_count}\n"
        f"feminine share: {share_text}\n"
    )
    return doc
