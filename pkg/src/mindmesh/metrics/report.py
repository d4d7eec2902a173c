"""Per-trial metric table with CSV and aligned-text rendering."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable
from dataclasses import dataclass, field

from ..errors import ContractError, DataError

CSV_COLUMNS = ["subject", "trial", "nmae", "nrmse", "frames"]


@dataclass(frozen=True)
class MetricRow:
    trial_id: str
    nmae: float
    nrmse: float
    frames: int
    holdout: bool = False
    value_range: float = float("nan")


@dataclass(frozen=True)
class MetricReport:
    rows: list[MetricRow]
    subject_id: str = "S1"
    normalization_range: float = float("nan")
    decimals: int = field(default=5)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([self.subject_id, r.trial_id, f"{r.nmae:.{self.decimals}f}",
                        f"{r.nrmse:.{self.decimals}f}", r.frames])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def render(self) -> str:
        head = ["trial", "nMAE", "nRMSE", "frames"]
        body = [[r.trial_id + (" (holdout)" if r.holdout else ""), f"{r.nmae:.{self.decimals}f}",
                 f"{r.nrmse:.{self.decimals}f}", str(r.frames)] for r in self.rows]
        widths = [max(len(row[i]) for row in [head] + body) for i in range(4)]
        lines = [f"subject {self.subject_id}"]
        for row in [head] + body:
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells))
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.render()


def report_table(rows: Iterable[MetricRow], subject_id: str = "S1") -> MetricReport:
    """Order rows as named trials in given order, then holdout trials."""
    rows = list(rows)
    if not rows:
        raise ContractError("report needs at least one trial")
    ordered = [r for r in rows if not r.holdout] + [r for r in rows if r.holdout]
    ranges = [r.value_range for r in rows if r.value_range == r.value_range]
    return MetricReport(ordered, subject_id, max(ranges) if ranges else float("nan"))


def read_report_csv(text_or_path) -> MetricReport:
    text = text_or_path
    if "\n" not in str(text_or_path):
        with open(text_or_path, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_COLUMNS:
        raise DataError(f"metric CSV header must be {','.join(CSV_COLUMNS)}")
    rows, subject = [], "S1"
    for rec in reader:
        if not rec:
            continue
        subject = rec[0]
        rows.append(MetricRow(rec[1], float(rec[2]), float(rec[3]), int(rec[4])))
    return MetricReport(rows, subject)
