"""Render run records as a best-score grid and per-run curve CSVs.

The text table has one row per optimizer and one column per model, each
cell holding the best test micro-F1 and the earliest epoch that reached
it.  Runs that share (model, optimizer) but differ in seed are aggregated
as mean +- range.  Records that carry no test stream fall back to the
validation stream, with a warning.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .errors import DataError
from .harness import RunRecord, best_score, read_record

_VALUE_DIGITS = 5


def _fallback_field(record: RunRecord, metric_field: str,
                    warnings: list[str], name: str) -> str:
    if metric_field.startswith("test") and not any(
            row.get(metric_field) is not None for row in record.rows):
        fallback = metric_field.replace("test", "val")
        warnings.append(
            f"{name}: no {metric_field} stream recorded; falling back to "
            f"{fallback}")
        return fallback
    return metric_field


def _cell(results: list[tuple[float, int]]) -> str:
    if len(results) == 1:
        value, epoch = results[0]
        return f"{value:.{_VALUE_DIGITS}f} (ep {epoch})"
    values = [v for v, _ in results]
    epochs = sorted(e for _, e in results)
    mean = sum(values) / len(values)
    spread = max(values) - min(values)
    return (f"{mean:.{_VALUE_DIGITS}f} +- {spread:.{_VALUE_DIGITS}f} "
            f"(ep {','.join(str(e) for e in epochs)})")


def _render_grid(models: list[str], optimizers: list[str],
                 cells: dict[tuple[str, str], str], metric: str) -> str:
    headers = ["optimizer"] + models
    rows = [[opt] + [cells.get((opt, m), "-") for m in models]
            for opt in optimizers]
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows))
              for i in range(len(headers))]
    def fmt(row):
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths))
    lines = [f"best {metric.replace('_', ' ')} by model and optimizer", ""]
    lines.append(fmt(headers))
    lines.append(fmt(["-" * w for w in widths]))
    lines.extend(fmt(r) for r in rows)
    return "\n".join(line.rstrip() for line in lines) + "\n"


def write_curve_csv(record: RunRecord, path: str | Path) -> None:
    """One curve row per epoch: epoch, train_loss, test_loss, test_f1.

    Missing test metrics are left as empty cells.
    """
    with open(path, "w", newline="", encoding="utf-8") as sink:
        writer = csv.writer(sink)
        writer.writerow(["epoch", "train_loss", "test_loss", "test_f1"])
        for row in record.rows:
            writer.writerow([
                row["epoch"], repr(row["train_loss"]),
                "" if row["test_loss"] is None else repr(row["test_loss"]),
                "" if row["test_f1"] is None else repr(row["test_f1"]),
            ])


def report(run_paths: Sequence[str | Path], metric_field: str = "test_f1",
           csv_dir: str | Path | None = None) -> tuple[str, list[str]]:
    """Build the report text for the given run files.

    Returns (table text, warnings).  Warnings cover mixed code versions
    and test->val stream fallbacks; a malformed run file raises DataError
    naming the file and line.
    """
    if not run_paths:
        raise DataError("report needs at least one run file")
    warnings: list[str] = []
    records: list[tuple[str, RunRecord]] = []
    for path in sorted(Path(p) for p in run_paths):
        records.append((path.name, read_record(path)))

    versions = sorted({rec.header.get("code_version", "?")
                       for _, rec in records})
    if len(versions) > 1:
        warnings.append(
            f"run files span code versions: {', '.join(versions)}")

    grouped: dict[tuple[str, str], list[tuple[float, int]]] = {}
    models: list[str] = []
    optimizers: list[str] = []
    for name, rec in records:
        config = rec.header.get("config", {})
        model = config.get("model", "?")
        optimizer = config.get("optimizer", "?")
        field = _fallback_field(rec, metric_field, warnings, name)
        result = best_score(rec, field)
        grouped.setdefault((optimizer, model), []).append(result)
        if model not in models:
            models.append(model)
        if optimizer not in optimizers:
            optimizers.append(optimizer)

    cells = {key: _cell(results) for key, results in grouped.items()}
    text = _render_grid(models, optimizers, cells, metric_field)

    if csv_dir is not None:
        csv_dir = Path(csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        for name, rec in records:
            write_curve_csv(rec, csv_dir / (Path(name).stem + ".csv"))
    return text, warnings
