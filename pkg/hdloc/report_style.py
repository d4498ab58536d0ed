"""Shared console style for logs and result tables."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

# ---------------------------------------------------------------------------
# Global style helpers
# ---------------------------------------------------------------------------

_LOG_FORMAT = "%(message)s"
_STYLE_APPLIED = False

console = Console(stderr=True)


def apply_common_style(level: int = logging.INFO) -> None:
    """Install the rich log handler once per session; later calls only adjust the level."""
    global _STYLE_APPLIED
    root = logging.getLogger("hdloc")
    root.setLevel(level)
    if _STYLE_APPLIED:
        return
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=False, markup=False)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT, datefmt="[%X]"))
    root.addHandler(handler)
    root.propagate = False
    _STYLE_APPLIED = True


# ---------------------------------------------------------------------------
# Table layout definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableStyle:
    """Controls how a result frame is rendered."""

    float_digits: int = 4
    scientific_below: float = 1e-3
    header_style: str = "bold cyan"
    show_lines: bool = False
    max_rows: Optional[int] = 60


RESULT_TABLE_STYLE = TableStyle()
PVALUE_TABLE_STYLE = TableStyle(float_digits=6, scientific_below=1e-4)
BLOCK_TABLE_STYLE = TableStyle(float_digits=3, max_rows=None, show_lines=False)


def format_cell(value: object, style: TableStyle = RESULT_TABLE_STYLE) -> str:
    if value is None:
        return "-"
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            return "nan"
        if value != 0.0 and abs(value) < style.scientific_below:
            return f"{value:.{style.float_digits - 1}e}"
        return f"{value:.{style.float_digits}f}"
    return str(value)


def build_table(frame: pd.DataFrame, title: str = "", style: TableStyle = RESULT_TABLE_STYLE) -> Table:
    table = Table(title=title or None, header_style=style.header_style, show_lines=style.show_lines)
    for column in frame.columns:
        numeric = pd.api.types.is_numeric_dtype(frame[column])
        table.add_column(str(column), justify="right" if numeric else "left")
    rows = frame if style.max_rows is None else frame.head(style.max_rows)
    for record in rows.itertuples(index=False):
        table.add_row(*(format_cell(v, style) for v in record))
    if style.max_rows is not None and len(frame) > style.max_rows:
        table.caption = f"{len(frame) - style.max_rows} more row(s) not shown"
    return table


def render_frame(frame: pd.DataFrame, title: str = "", style: TableStyle = RESULT_TABLE_STYLE,
                 out: Optional[Console] = None) -> None:
    (out or console).print(build_table(frame, title, style))


__all__ = [
    "apply_common_style",
    "TableStyle",
    "RESULT_TABLE_STYLE",
    "PVALUE_TABLE_STYLE",
    "BLOCK_TABLE_STYLE",
    "format_cell",
    "build_table",
    "render_frame",
    "console",
]
