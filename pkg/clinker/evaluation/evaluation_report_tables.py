"""Evaluation reports: a JSON document and an aligned text table, one row per model variant."""
from dataclasses import dataclass
from typing import Dict, Optional

from clinker.raster.raster_pixel_grid_types import PARTICLE_PHASES, PhaseLabel


@dataclass(frozen=True)
class ReportRow:
    name: str
    mode: str
    scores: Dict[object, object]
    threshold: Optional[float] = None


def _key(phase_or_macro):
    return phase_or_macro.display_name if isinstance(phase_or_macro, PhaseLabel) else str(phase_or_macro)


def build_report(rows, iou_threshold=None, average="macro"):
    return {
        "average": average,
        "iou_threshold": iou_threshold,
        "rows": [
            {
                "name": row.name,
                "mode": row.mode,
                "threshold": row.threshold,
                "scores": {_key(k): v.to_dict() for k, v in row.scores.items()},
            }
            for row in rows
        ],
    }


def format_report_table(rows, phases=PARTICLE_PHASES):
    """Rows are model variants; columns are precision, recall and F1 for each phase."""
    metrics = ("precision", "recall", "f1")
    header = ["Model", "Mode", "Threshold"] + [
        f"{metric.title() if metric != 'f1' else 'F1'} {phase.display_name.title()}"
        for metric in metrics for phase in phases
    ]
    table = [header]
    for row in rows:
        cells = [row.name, row.mode, "-" if row.threshold is None else f"{row.threshold:.2f}"]
        for metric in metrics:
            for phase in phases:
                scores = row.scores.get(phase)
                cells.append("-" if scores is None else f"{getattr(scores, metric):.3f}")
        table.append(cells)
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(width) if i < 2 else cell.rjust(width)
                       for i, (cell, width) in enumerate(zip(line, widths))).rstrip()
             for line in table]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"
