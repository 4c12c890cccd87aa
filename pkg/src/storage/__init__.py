"""存储模块"""

from . import reports
from .reports import (
    write_yaml,
    read_yaml,
    save_report,
    load_report,
    save_mix_spec,
    load_mix_spec,
    save_sketch,
    load_sketch,
    load_truth,
    format_cell,
    write_csv,
    render_markdown_table,
    write_markdown_table,
    write_loglik_csv,
)

__all__ = [
    "reports",
    "write_yaml",
    "read_yaml",
    "save_report",
    "load_report",
    "save_mix_spec",
    "load_mix_spec",
    "save_sketch",
    "load_sketch",
    "load_truth",
    "format_cell",
    "write_csv",
    "render_markdown_table",
    "write_markdown_table",
    "write_loglik_csv",
]
