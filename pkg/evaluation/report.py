"""
Report Output — CSV tables, error heatmap data, text report.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

from evaluation.metrics import abs_error_frames
from noda.dataset import Trajectory
from noda.schemas.experiment import MetricRow
from noda.trajectory_io import write_trajectory


def emit_csv(rows: Sequence[MetricRow], path: str | Path) -> Path:
    """CSV with the MetricRow field names as header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MetricRow.headers())
        for row in rows:
            writer.writerow(row.as_csv_row())
    return path


def read_csv(path: str | Path) -> list[MetricRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            MetricRow.model_validate({k: (v if v != "" else None) for k, v in rec.items()})
            for rec in csv.DictReader(fh)
        ]


def emit_heatmap_data(estimate: Trajectory, truth: Trajectory, path: str | Path) -> Path:
    """|ẑ − z_D| per frame, stored in the trajectory container."""
    errors = abs_error_frames(estimate, truth)
    write_trajectory(path, truth.with_frames(errors))
    return Path(path)


def format_report(results: Mapping[str, Sequence[MetricRow]]) -> str:
    """Human-readable tables, RelMSE ×10³."""
    lines = [
        "=" * 72,
        "NODA EXPERIMENT REPORT",
        "=" * 72,
    ]
    for protocol, rows in results.items():
        lines.extend([
            "",
            f"--- {protocol.upper()} ---",
            f"{'Method':<18} {'t_f':>7} {'SNR':>6} {'alpha':>6} {'t_H':>7} {'RelMSE×1e3':>18}",
            "-" * 72,
        ])
        for r in rows:
            snr = "inf" if r.snr_db == float("inf") else f"{r.snr_db:g}"
            lines.append(
                f"{r.method:<18} {r.t_f:>7g} {snr:>6} {r.alpha:>6.2f} {r.t_h:>7g} "
                f"{1e3 * r.relmse_mean:>9.3f} ± {1e3 * r.relmse_std:<6.3f}"
            )
    lines.extend(["", "=" * 72])
    return "\n".join(lines)


def save_report(results: Mapping[str, Sequence[MetricRow]], output_dir: str | Path) -> Path:
    """Write report.txt and report.json into output_dir."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "report.txt").write_text(format_report(results), encoding="utf-8")
    payload = {name: [r.model_dump() for r in rows] for name, rows in results.items()}
    (output_dir / "report.json").write_text(json.dumps(payload, indent=2, default=str), encoding="utf-8")
    return output_dir
