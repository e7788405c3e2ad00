"""
Utils Package - Utility functions for data loading and formatting.
"""

from .data_loader import (
    Dataset,
    load_idx,
    write_idx,
    load_idx_dataset,
    make_blobs,
    make_arcs,
    train_test_split,
)

from .formatter import (
    write_json,
    read_json,
    write_csv,
    sha256_file,
    format_stage_summary,
    format_metrics,
    format_error_report,
)

__all__ = [
    # Data loader
    "Dataset",
    "load_idx",
    "write_idx",
    "load_idx_dataset",
    "make_blobs",
    "make_arcs",
    "train_test_split",
    # Formatter
    "write_json",
    "read_json",
    "write_csv",
    "sha256_file",
    "format_stage_summary",
    "format_metrics",
    "format_error_report",
]
