"""Report rows, delimited output, summaries and figures.

Reports are deterministic: the same inputs and configuration always
produce byte-identical files. Floats are written with Python's shortest
round-trip representation; the human-readable summary rounds
percentages to two decimals.

CSV layout: '#' comment lines carrying the full run configuration, a
header row, data rows in ReportRow field order, then the summary as
trailing comments. JSON reports carry config, rows and summary as one
object. Optional figures are rendered next to the report.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .config import RunConfig
from .metrics import ClassificationMetrics, EvalRecord, SummaryStats, confusion_metrics, summarize


@dataclass(frozen=True)
class ReportRow:
    """One output row; measurement-only runs leave the prediction side None."""

    scan_id: str
    gt_area_cm2: float | None = None
    pred_area_cm2: float | None = None
    dice: float | None = None
    abs_pct_error: float | None = None
    signed_pct_error: float | None = None
    sex: str | None = None
    gt_sarcopenic: bool | None = None
    pred_sarcopenic: bool | None = None
    slice_index: int | None = None
    pixel_area_mm2: float | None = None


COLUMNS = tuple(f.name for f in fields(ReportRow))


def row_from_record(record: EvalRecord, slice_index: int | None = None, pixel_area_mm2: float | None = None) -> ReportRow:
    return ReportRow(
        scan_id=record.scan_id,
        gt_area_cm2=record.gt_area_cm2,
        pred_area_cm2=record.pred_area_cm2,
        dice=record.dice,
        abs_pct_error=record.abs_pct_error,
        signed_pct_error=record.signed_pct_error,
        sex=record.sex,
        gt_sarcopenic=record.gt_sarcopenic,
        pred_sarcopenic=record.pred_sarcopenic,
        slice_index=slice_index,
        pixel_area_mm2=pixel_area_mm2,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def compute_summary(records: list[EvalRecord]) -> dict:
    """Summary stats plus classification agreement when labels are present."""
    stats = summarize(records)
    out: dict = {name: asdict(s) for name, s in stats.items()}
    pairs = [
        (r.pred_sarcopenic, r.gt_sarcopenic)
        for r in records
        if r.pred_sarcopenic is not None and r.gt_sarcopenic is not None
    ]
    if pairs:
        out["classification"] = asdict(confusion_metrics(pairs))
    return out


def render_csv(rows: list[ReportRow], config: RunConfig, summary: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in config.to_items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in COLUMNS])
    if summary:
        buf.write("# summary " + json.dumps(summary, sort_keys=True) + "\n")
    return buf.getvalue()


def render_json(rows: list[ReportRow], config: RunConfig, summary: dict | None = None) -> str:
    doc = {
        "config": dict(config.to_items()),
        "rows": [asdict(row) for row in rows],
    }
    if summary:
        doc["summary"] = summary
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def write_report(
    path: str | Path,
    rows: list[ReportRow],
    config: RunConfig,
    summary: dict | None = None,
) -> None:
    text = render_csv(rows, config, summary) if config.format == "csv" else render_json(rows, config, summary)
    Path(path).write_text(text)


def summary_lines(summary: dict) -> list[str]:
    """Human-readable digest, percentages at two decimals."""
    lines = []
    dice = summary.get("dice")
    if dice:
        lines.append(f"dice: mean {dice['mean']:.4f} median {dice['median']:.4f} n={dice['n']}")
    err = summary.get("abs_pct_error")
    if err:
        lines.append(
            f"abs area error %: mean {err['mean']:.2f} median {err['median']:.2f} "
            f"min {err['min']:.2f} max {err['max']:.2f}"
        )
    serr = summary.get("signed_pct_error")
    if serr:
        lines.append(f"signed area error %: mean {serr['mean']:.2f} median {serr['median']:.2f}")
    cls = summary.get("classification")
    if cls:
        agree = cls["tp"] + cls["tn"]
        total = agree + cls["fp"] + cls["fn"]
        lines.append(
            f"classification: {agree}/{total} agree, accuracy {cls['accuracy']:.2f}"
            + (f" precision {cls['precision']:.2f}" if cls["precision"] is not None else "")
            + (f" recall {cls['recall']:.2f}" if cls["recall"] is not None else "")
            + (f" f1 {cls['f1']:.2f}" if cls["f1"] is not None else "")
        )
    return lines


# figure rendering for the evaluation report path

_FIG_META = {"Software": "sarcoquant"}


def _finish(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_FIG_META)
    plt.close(fig)


def render_figures(records: list[EvalRecord], out_dir: str | Path) -> list[Path]:
    """Render evaluation figures; returns the written paths.

    Three views: Dice per scan, predicted vs reference area with the
    identity line, and the absolute error distribution.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = [r.scan_id for r in records]
    xs = range(len(records))
    written = []

    fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(records)), 3.6))
    ax.bar(xs, [r.dice for r in records], color="#4878b0")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(ids, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("Dice")
    ax.set_title("Overlap per scan")
    path = out_dir / "dice_per_scan.png"
    _finish(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    gt = [r.gt_area_cm2 for r in records]
    pred = [r.pred_area_cm2 for r in records]
    lo = min(gt + pred) * 0.9
    hi = max(gt + pred) * 1.05
    ax.plot([lo, hi], [lo, hi], color="#999999", linewidth=0.8, zorder=1)
    ax.scatter(gt, pred, s=18, color="#c0504d", zorder=2)
    ax.set_xlabel("reference area (cm$^2$)")
    ax.set_ylabel("predicted area (cm$^2$)")
    ax.set_title("Area agreement")
    path = out_dir / "area_agreement.png"
    _finish(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    errors = [r.abs_pct_error for r in records]
    ax.bar(xs, errors, color="#6aa84f")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(ids, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("abs area error (%)")
    ax.set_title("Error distribution")
    path = out_dir / "error_distribution.png"
    _finish(fig, path)
    written.append(path)
    return written
