"""Reading samples from CSV / the colon expression files and writing results."""

from __future__ import annotations

import json
import logging
import math
import re
import sys
from dataclasses import fields, is_dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import pandas as pd

from .errors import ConfigError, InputError, IoError, LabelMismatch, ParseError, ShapeMismatch
from .model import GroupedSample, TestOutcome, validate_sample
from .simulation import SizePowerTable

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
OUTCOME_COLUMNS = ["statistic", "pvalue", "method", "kernel"]

_PANDAS_LINE = re.compile(r"line (\d+)")


# ---------------------------------------------------------------------------
# CSV samples
# ---------------------------------------------------------------------------


def _read_cells(path: Path, header: bool) -> pd.DataFrame:
    if not path.is_file():
        raise IoError(f"input file not found: {path}")
    try:
        return pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError as exc:
        raise ParseError(1, None, "file is empty") from exc
    except pd.errors.ParserError as exc:
        match = _PANDAS_LINE.search(str(exc))
        line = int(match.group(1)) if match else 0
        raise ParseError(line, None, "ragged row") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _parse_float(cell: object) -> float:
    try:
        return float(cell)
    except (TypeError, ValueError):
        return math.nan


def _numeric_block(cells: pd.DataFrame, first_line: int) -> np.ndarray:
    """Convert string cells to floats; reports the first unparsable cell (1-based line and column).

    Cells go through ``float`` so 17-significant-digit values read back bit for bit.
    """
    out = np.empty(cells.shape, dtype=np.float64)
    for j, name in enumerate(cells.columns):
        raw = cells[name].str.strip()
        values = raw.map(_parse_float)
        bad = values.isna() & (raw.str.lower() != "nan")
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(first_line + i, j + 1, f"not a number: {cells.iat[i, j]!r}")
        out[:, j] = values.to_numpy(dtype=np.float64)
    return out


def read_sidecar(path: Path) -> list:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read label file {path}: {exc}") from exc
    return [line.strip() for line in lines if line.strip()]


def load_csv(
    path: str | Path,
    label_column: Optional[int] = None,
    sidecar: Optional[str | Path] = None,
    *,
    header: bool = False,
    min_group_size: int = 2,
) -> GroupedSample:
    """Load a comma-separated sample.

    Labels come either from ``label_column`` (1-based, removed from the data)
    or from ``sidecar`` (one label per line). Every other column must be numeric.
    """
    if (label_column is None) == (sidecar is None):
        raise ConfigError("give exactly one of label_column or sidecar")
    path = Path(path)
    cells = _read_cells(path, header)
    first_line = 2 if header else 1

    if label_column is not None:
        if not 1 <= label_column <= cells.shape[1]:
            raise ConfigError(f"label column {label_column} outside 1..{cells.shape[1]}")
        labels = cells.iloc[:, label_column - 1].str.strip().to_list()
        data_cells = cells.drop(columns=cells.columns[label_column - 1])
    else:
        labels = read_sidecar(Path(sidecar))
        data_cells = cells
        if len(labels) != cells.shape[0]:
            raise LabelMismatch(f"{len(labels)} labels in {sidecar} for {cells.shape[0]} data rows")

    if data_cells.shape[1] == 0:
        raise ShapeMismatch(f"{path} has no data columns")
    matrix = _numeric_block(data_cells, first_line)
    sample = validate_sample(matrix, labels, min_group_size=min_group_size)
    logger.info("loaded %s: n=%d p=%d K=%d", path.name, sample.n, sample.p, sample.n_groups)
    return sample


def save_csv(sample: GroupedSample, path: str | Path) -> None:
    """Write data columns followed by the group label, 17 significant digits."""
    frame = pd.DataFrame(sample.data)
    frame["label"] = [sample.group_names[k] for k in sample.labels]
    try:
        frame.to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Colon expression data
# ---------------------------------------------------------------------------

COLON_GROUPS = ("tumor", "normal")


def load_colon(matrix_path: str | Path, tissues_path: str | Path, *, log2: bool = False) -> GroupedSample:
    """Genes x samples whitespace matrix plus signed tissue ids (negative = tumor).

    Returns samples x genes with tumor as group 0 and normal as group 1.
    """
    try:
        genes = pd.read_csv(matrix_path, sep=r"\s+", header=None, dtype=np.float64)
        tissues = np.loadtxt(tissues_path, dtype=np.int64, ndmin=1)
    except OSError as exc:
        raise IoError(f"cannot read colon data: {exc}") from exc
    except ValueError as exc:
        raise ParseError(0, None, f"colon data: {exc}") from exc

    data = genes.to_numpy().T
    if tissues.size != data.shape[0]:
        raise LabelMismatch(f"{tissues.size} tissue ids for {data.shape[0]} samples")
    if np.any(tissues == 0):
        raise LabelMismatch("tissue ids must be signed and non-zero")
    if log2:
        if np.any(data <= 0):
            raise InputError("log2 transform needs strictly positive expression values")
        data = np.log2(data)

    labels = np.where(tissues < 0, 0, 1)
    sample = validate_sample(data, labels)
    logger.info("colon data: %d samples x %d genes (%d tumor, %d normal)",
                sample.n, sample.p, *sample.group_sizes)
    return GroupedSample(sample.data, sample.labels, COLON_GROUPS)


# ---------------------------------------------------------------------------
# Result emission
# ---------------------------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def outcome_record(outcome: TestOutcome) -> dict:
    record = {
        "statistic": outcome.statistic,
        "pvalue": outcome.pvalue,
        "method": outcome.method.value,
        "kernel": outcome.kernel.label if outcome.kernel is not None else None,
    }
    details = {}
    if outcome.spectrum is not None:
        details["spectrum"] = outcome.spectrum.as_dict()
    if outcome.n_permutations is not None:
        details["n_permutations"] = outcome.n_permutations
    if details:
        details.update({k: v for k, v in outcome.diagnostics.items()})
        record["details"] = details
    return record


def as_frame(results: Any) -> pd.DataFrame:
    """Tabular view used by the CSV writer and the console tables."""
    if isinstance(results, pd.DataFrame):
        return results
    if isinstance(results, SizePowerTable):
        return results.frame
    if hasattr(results, "to_frame"):
        return results.to_frame()
    if isinstance(results, TestOutcome):
        results = [results]
    outcomes = list(results)
    if not all(isinstance(o, TestOutcome) for o in outcomes):
        raise TypeError(f"cannot tabulate {type(results).__name__}")
    return pd.DataFrame([{k: outcome_record(o)[k] for k in OUTCOME_COLUMNS} for o in outcomes],
                        columns=OUTCOME_COLUMNS)


def _result_records(results: Any) -> Any:
    if hasattr(results, "to_document"):
        return results.to_document()
    if isinstance(results, TestOutcome):
        return [outcome_record(results)]
    if isinstance(results, (list, tuple)) and all(isinstance(o, TestOutcome) for o in results):
        return [outcome_record(o) for o in results]
    return as_frame(results).to_dict("records")


def render_json(results: Any, config_echo: Optional[Mapping[str, Any]] = None, *, timestamp: bool = True) -> str:
    document = {"schema_version": SCHEMA_VERSION}
    if timestamp:
        document["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    document["config_echo"] = dict(config_echo or {})
    document["results"] = _result_records(results)
    if isinstance(results, SizePowerTable) and results.aborted:
        document["aborted"] = dict(results.aborted)
    return json.dumps(_jsonable(document), indent=2, allow_nan=False) + "\n"


def render_csv(results: Any) -> str:
    return as_frame(results).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def emit_results(
    results: Any,
    fmt: str = "json",
    path: Optional[str | Path] = None,
    *,
    config_echo: Optional[Mapping[str, Any]] = None,
    timestamp: bool = True,
) -> str:
    """Serialise results as JSON or CSV; writes to ``path`` or stdout when it is None or '-'."""
    if fmt == "json":
        text = render_json(results, config_echo, timestamp=timestamp)
    elif fmt == "csv":
        text = render_csv(results)
    else:
        raise ConfigError(f"unknown output format {fmt!r}; choose json or csv")

    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return text
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    logger.info("wrote %s", path)
    return text


__all__ = [
    "load_csv",
    "save_csv",
    "read_sidecar",
    "load_colon",
    "outcome_record",
    "as_frame",
    "render_json",
    "render_csv",
    "emit_results",
    "SCHEMA_VERSION",
]
