"""Range-normalised position-map errors and the per-trial report table."""

from .report import MetricReport, MetricRow, read_report_csv, report_table
from .sequence import SequenceErrors, nmae, nrmse, sequence_errors

__all__ = [
    "MetricReport", "MetricRow", "SequenceErrors", "nmae", "nrmse", "read_report_csv",
    "report_table", "sequence_errors",
]
