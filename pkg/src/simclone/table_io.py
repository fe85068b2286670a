"""CSV table loading, column type inference, and the numeric/string split.

Tables are plain grids of cell strings. Before any similarity is computed a
table is split into a numeric sub-table (canonicalized floats, NaN for cells
that do not parse) and a string sub-table, because the two kinds of columns
are scored with different metrics.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyTableError

HEADER_NONE = "none"
HEADER_FIRST_ROW = "first-row-is-header"

# Decimal or scientific notation with optional sign. Deliberately rejects
# "nan"/"inf" literals, underscores, and hex floats so inference is
# deterministic and locale-free.
_NUMBER_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")


class ColumnType:
    NUMERIC = "numeric"
    STRING = "string"


@dataclass(frozen=True)
class LoadConfig:
    max_rows: int = 4000
    max_cols: int = 60
    header_mode: str = HEADER_NONE
    numeric_threshold: float = 0.95
    delimiter: str = ","

    def __post_init__(self):
        if self.max_rows < 1 or self.max_cols < 1:
            raise ConfigError("max_rows and max_cols must be >= 1")
        if not 0.0 <= self.numeric_threshold <= 1.0:
            raise ConfigError("numeric_threshold must be in [0, 1]")
        if self.header_mode not in (HEADER_NONE, HEADER_FIRST_ROW):
            raise ConfigError(f"unknown header_mode: {self.header_mode!r}")
        if len(self.delimiter) != 1:
            raise ConfigError("delimiter must be a single character")


@dataclass
class Table:
    id: str
    source_path: str
    cells: list  # list of rows, each a list of cell strings, rectangular

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def column(self, j: int) -> list:
        return [row[j] for row in self.cells]


@dataclass
class TypedView:
    """A table split by column type.

    numeric_sub is an (n_rows, n_numeric) float array; cells of a numeric
    column that did not parse are NaN and are excluded from set and statistic
    computations downstream. string_sub keeps raw cell strings, including
    empty strings, as (n_rows, n_string) nested lists.
    """

    n_rows: int
    n_cols: int
    numeric_sub: np.ndarray
    string_sub: list
    numeric_col_map: tuple
    string_col_map: tuple

    @property
    def n_numeric_cols(self) -> int:
        return len(self.numeric_col_map)

    @property
    def n_string_cols(self) -> int:
        return len(self.string_col_map)


def parse_number(cell: str):
    """Parse a cell as a finite float, or return None.

    Surrounding whitespace is ignored. Values that overflow to infinity are
    treated as non-numeric.
    """
    s = cell.strip()
    if not _NUMBER_RE.match(s):
        return None
    v = float(s)
    if not math.isfinite(v):
        return None
    return v


def canonical_float(v: float) -> float:
    """Round to 6 significant digits.

    This is the equality notion used for numeric cells everywhere, so that
    the same quantity stored at different precisions still compares equal.
    Idempotent: canonical_float(canonical_float(v)) == canonical_float(v).
    """
    if v == 0.0:
        return 0.0
    return round(v, 5 - int(math.floor(math.log10(abs(v)))))


def load_table(path, cfg: LoadConfig = LoadConfig(), table_id: str | None = None) -> Table:
    """Load a CSV file into a rectangular Table.

    RFC 4180 quoting rules apply. The first cfg.max_rows data rows and the
    first cfg.max_cols columns are kept; ragged rows are padded with empty
    strings. With header_mode=first-row-is-header the first row is discarded
    before truncation (header text is never used).
    """
    path = Path(path)
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=cfg.delimiter)
        skip_header = cfg.header_mode == HEADER_FIRST_ROW
        for row in reader:
            if skip_header:
                skip_header = False
                continue
            rows.append(row)
            if len(rows) >= cfg.max_rows:
                break
    n_cols = min(max((len(r) for r in rows), default=0), cfg.max_cols)
    if not rows or n_cols == 0:
        raise EmptyTableError(f"{path}: no data rows or no columns after parsing")
    cells = [r[:n_cols] + [""] * (n_cols - len(r)) if len(r) != n_cols else list(r) for r in rows]
    return Table(id=table_id if table_id is not None else path.stem,
                 source_path=str(path), cells=cells)


def write_table_csv(table: Table, path, delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerows(table.cells)


def infer_column_type(column: list, numeric_threshold: float) -> str:
    """Numeric iff the fraction of non-empty cells that parse as finite
    numbers reaches the threshold and at least one non-empty cell exists."""
    non_empty = [c for c in column if c.strip() != ""]
    if not non_empty:
        return ColumnType.STRING
    parseable = sum(1 for c in non_empty if parse_number(c) is not None)
    if parseable / len(non_empty) >= numeric_threshold:
        return ColumnType.NUMERIC
    return ColumnType.STRING


def split_typed(table: Table, cfg: LoadConfig = LoadConfig()) -> TypedView:
    """Assign each column a type and split the table into sub-tables."""
    numeric_cols = []
    string_cols = []
    for j in range(table.n_cols):
        col = table.column(j)
        if infer_column_type(col, cfg.numeric_threshold) == ColumnType.NUMERIC:
            numeric_cols.append(j)
        else:
            string_cols.append(j)

    numeric_sub = np.full((table.n_rows, len(numeric_cols)), np.nan, dtype=np.float64)
    for k, j in enumerate(numeric_cols):
        for i, row in enumerate(table.cells):
            v = parse_number(row[j])
            if v is not None:
                numeric_sub[i, k] = canonical_float(v)
    string_sub = [[row[j] for j in string_cols] for row in table.cells]
    return TypedView(
        n_rows=table.n_rows,
        n_cols=table.n_cols,
        numeric_sub=numeric_sub,
        string_sub=string_sub,
        numeric_col_map=tuple(numeric_cols),
        string_col_map=tuple(string_cols),
    )
