"""Report serialization: byte-stable JSON and per-(frame, method) CSV."""

from __future__ import annotations

import copy
import csv
import io
import json
from pathlib import Path

from .errors import ConfigError

CSV_COLUMNS = [
    "frame_idx",
    "method",
    "ms",
    "verdict",
    "redundant_fraction",
    "reused",
    "pruned",
    "int4",
    "int8",
    "fp16",
    "cumulative_skipped",
    "cumulative_pruned",
]


def report_to_json(report: dict) -> str:
    """Canonical JSON text: insertion-ordered keys, two-space indent."""
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def report_to_csv(report: dict) -> str:
    """One row per (frame, method); pipeline columns are blank for non-pipeline methods."""
    methods = list(report["methods"].keys())
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in report["frames"]:
        tiers = record["tiers"] or {}
        for method in methods:
            is_pipeline = method == "salicache" and record["verdict"] is not None
            writer.writerow(
                [
                    record["frame_idx"],
                    method,
                    record["ms"].get(method, ""),
                    record["verdict"] if is_pipeline else "",
                    record["redundant_fraction"] if is_pipeline else "",
                    tiers.get("reused", "") if is_pipeline else "",
                    tiers.get("prune", "") if is_pipeline else "",
                    tiers.get("int4", "") if is_pipeline else "",
                    tiers.get("int8", "") if is_pipeline else "",
                    tiers.get("fp16", "") if is_pipeline else "",
                    record["cumulative_skipped"] if is_pipeline else "",
                    record["cumulative_pruned"] if is_pipeline else "",
                ]
            )
    return out.getvalue()


def emit_report(report: dict, path: str | Path, fmt: str) -> None:
    if fmt not in ("json", "csv"):
        raise ConfigError(f"unknown report format {fmt!r}; expected json or csv")
    text = report_to_json(report) if fmt == "json" else report_to_csv(report)
    Path(path).write_text(text)


def strip_timings(report: dict) -> dict:
    """Copy of a report with all wall-clock fields removed (determinism checks)."""
    stripped = copy.deepcopy(report)
    for record in stripped["frames"]:
        record.pop("ms", None)
    for summary in stripped["methods"].values():
        summary.pop("ms_per_frame", None)
    return stripped
