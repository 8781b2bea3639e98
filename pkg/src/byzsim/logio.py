"""Metrics log persistence.

A run log is a line-delimited JSON file: one header line carrying the
schema version and the full config, then one line per round record.  The
run summary lives in a sibling ``<name>.summary.json`` document.  Floats
serialize via repr so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

from .simulation import SCHEMA_VERSION, MetricsLog, RoundRecord
from .validation import SimulationError


class LogFormatError(SimulationError):
    pass


class LogTruncationWarning(UserWarning):
    pass


def summary_path(log_path: str | Path) -> Path:
    path = Path(log_path)
    return path.with_name(path.stem + ".summary.json")


def write_log(log: MetricsLog, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"schema_version": log.schema_version, "kind": "byzsim-log", "config": log.config}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(rec.to_dict(), sort_keys=True) for rec in log.records]
    path.write_text("\n".join(lines) + "\n")
    summary_doc = {"schema_version": log.schema_version, "summary": log.summary}
    summary_path(path).write_text(json.dumps(summary_doc, sort_keys=True, indent=2) + "\n")


def read_log(path: str | Path) -> MetricsLog:
    """Parse a run log; a corrupt trailing line yields the valid prefix with
    a LogTruncationWarning instead of failing."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise LogFormatError(f"{path}: log file not found", code="missing_log") from None
    lines = [line for line in text.split("\n") if line.strip()]
    if not lines:
        raise LogFormatError(f"{path}: no header line", code="no_header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise LogFormatError(f"{path}: header is not valid JSON", code="no_header") from None
    if not isinstance(header, dict) or header.get("kind") != "byzsim-log":
        raise LogFormatError(f"{path}: not a byzsim log", code="no_header")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise LogFormatError(
            f"{path}: schema version {header.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}",
            code="schema_mismatch",
        )
    records = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            records.append(RoundRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError):
            if i == len(lines):
                warnings.warn(
                    f"{path}: discarding corrupt final line", LogTruncationWarning, stacklevel=2
                )
                break
            raise LogFormatError(f"{path}: corrupt record on line {i}", code="corrupt_record") from None
    summary = {}
    spath = summary_path(path)
    if spath.exists():
        try:
            summary = json.loads(spath.read_text()).get("summary", {})
        except json.JSONDecodeError:
            warnings.warn(f"{spath}: unreadable summary", LogTruncationWarning, stacklevel=2)
    return MetricsLog(
        config=header["config"], records=records, summary=summary,
        schema_version=header["schema_version"],
    )


def write_comparison_table(rows: list[dict], path: str | Path) -> None:
    """Comma-separated comparison table for external plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["name", "defense", "attack", "malicious_fraction", "seed",
               "a_ini", "a_att", "negative_impact", "error"]
    out = [",".join(columns)]
    for row in rows:
        out.append(",".join(str(row.get(c, "")) for c in columns))
    path.write_text("\n".join(out) + "\n")
