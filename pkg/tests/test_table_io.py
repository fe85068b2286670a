import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simclone.errors import ConfigError, EmptyTableError
from simclone.table_io import (
    ColumnType,
    LoadConfig,
    canonical_float,
    infer_column_type,
    load_table,
    parse_number,
    split_typed,
    write_table_csv,
)


def write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadTable:
    def test_identity_case(self, tmp_path):
        t = load_table(write(tmp_path, "a,b\nc,d\n"))
        assert t.cells == [["a", "b"], ["c", "d"]]
        assert (t.n_rows, t.n_cols) == (2, 2)

    def test_ragged_row_padded(self, tmp_path):
        t = load_table(write(tmp_path, "a,b\nc\n"))
        assert t.cells == [["a", "b"], ["c", ""]]

    def test_truncation_to_limits(self, tmp_path):
        rows = "\n".join(",".join(str(r * 100 + c) for c in range(9)) for r in range(50))
        t = load_table(write(tmp_path, rows), LoadConfig(max_rows=10, max_cols=4))
        assert (t.n_rows, t.n_cols) == (10, 4)
        assert t.cells[0] == ["0", "1", "2", "3"]
        assert t.cells[9][0] == "900"

    def test_default_limits(self, tmp_path):
        # 4100 rows x 65 cols ends up at the 4000 x 60 defaults
        row = ",".join("1" for _ in range(65))
        t = load_table(write(tmp_path, "\n".join([row] * 4100)))
        assert (t.n_rows, t.n_cols) == (4000, 60)

    def test_header_dropped(self, tmp_path):
        t = load_table(write(tmp_path, "h1,h2\na,b\n"),
                       LoadConfig(header_mode="first-row-is-header"))
        assert t.cells == [["a", "b"]]

    def test_rfc4180_quoting(self, tmp_path):
        t = load_table(write(tmp_path, '"a,x",b\n"say ""hi""","c\nd"\n'))
        assert t.cells == [["a,x", "b"], ['say "hi"', "c\nd"]]

    def test_custom_delimiter(self, tmp_path):
        t = load_table(write(tmp_path, "a;b\nc;d\n"), LoadConfig(delimiter=";"))
        assert t.cells == [["a", "b"], ["c", "d"]]

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(OSError):
            load_table(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyTableError):
            load_table(write(tmp_path, ""))

    def test_header_only_file(self, tmp_path):
        with pytest.raises(EmptyTableError):
            load_table(write(tmp_path, "h1,h2\n"),
                       LoadConfig(header_mode="first-row-is-header"))

    def test_rectangularity_invariant(self, tmp_path):
        t = load_table(write(tmp_path, "a\nb,c,d\ne,f\n"))
        assert {len(r) for r in t.cells} == {t.n_cols}

    def test_roundtrip_via_writer(self, tmp_path):
        cells = [["a,x", 'q"q', "1"], ["", "line\nbreak", "2"]]
        from simclone.table_io import Table

        write_table_csv(Table("x", "", cells), tmp_path / "w.csv")
        again = load_table(tmp_path / "w.csv")
        assert again.cells == cells

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            LoadConfig(max_rows=0)
        with pytest.raises(ConfigError):
            LoadConfig(numeric_threshold=1.5)
        with pytest.raises(ConfigError):
            LoadConfig(delimiter=",,")


class TestNumericParsing:
    @pytest.mark.parametrize("cell,expect", [
        ("1", 1.0), ("2.5", 2.5), ("3e2", 300.0), ("-4.5E-1", -0.45),
        (".5", 0.5), ("+7", 7.0), (" 12 ", 12.0),
    ])
    def test_accepts(self, cell, expect):
        assert parse_number(cell) == expect

    @pytest.mark.parametrize("cell", [
        "", "x", "nan", "NaN", "inf", "-inf", "Infinity", "1_000", "0x10",
        "1e", "1.2.3", "1e999",
    ])
    def test_rejects(self, cell):
        assert parse_number(cell) is None

    def test_canonical_six_significant_digits(self):
        assert canonical_float(0.123456789) == 0.123457
        assert canonical_float(123456789.0) == 123457000.0
        assert canonical_float(0.0) == 0.0
        assert canonical_float(-0.000123456449) == -0.000123456

    @given(st.floats(min_value=-1e12, max_value=1e12,
                     allow_nan=False, allow_infinity=False))
    def test_canonicalization_stable(self, v):
        once = canonical_float(v)
        assert canonical_float(once) == once


class TestInferColumnType:
    def test_all_numeric(self):
        assert infer_column_type(["1", "2.5", "3e2"], 0.95) == ColumnType.NUMERIC

    def test_two_thirds_is_string(self):
        assert infer_column_type(["1", "x", "3"], 0.95) == ColumnType.STRING

    def test_all_empty_is_string(self):
        assert infer_column_type(["", "", ""], 0.95) == ColumnType.STRING

    def test_empty_cells_ignored_in_ratio(self):
        assert infer_column_type(["1", "", "3"], 0.95) == ColumnType.NUMERIC

    def test_threshold_boundary(self):
        col = ["1"] * 19 + ["x"]
        assert infer_column_type(col, 0.95) == ColumnType.NUMERIC
        assert infer_column_type(col + ["y"], 0.95) == ColumnType.STRING


class TestSplitTyped:
    def test_col_maps(self):
        from simclone.table_io import Table

        t = Table("x", "", [["1", "a", "2.0"], ["3", "b", "4.0"]])
        view = split_typed(t)
        assert view.numeric_col_map == (0, 2)
        assert view.string_col_map == (1,)
        assert view.numeric_sub.shape == (2, 2)
        assert view.string_sub == [["a"], ["b"]]

    def test_all_string(self):
        from simclone.table_io import Table

        view = split_typed(Table("x", "", [["a", "b"], ["c", "d"]]))
        assert view.n_numeric_cols == 0
        assert view.numeric_sub.shape == (2, 0)

    def test_partition_invariant(self):
        from tests.conftest import make_seed_table

        for k in range(4):
            t = make_seed_table(k, 10, 14)
            view = split_typed(t)
            merged = sorted(view.numeric_col_map + view.string_col_map)
            assert merged == list(range(t.n_cols))

    def test_canonicalization_applied(self):
        from simclone.table_io import Table

        view = split_typed(Table("x", "", [["0.123456789"], ["1"]]))
        assert view.numeric_sub[0, 0] == 0.123457

    def test_unparseable_cell_in_numeric_column_is_missing(self):
        from simclone.table_io import Table

        cells = [[str(i)] for i in range(30)] + [["?"]]
        view = split_typed(Table("x", "", cells))
        assert view.numeric_col_map == (0,)
        assert math.isnan(view.numeric_sub[30, 0])

    def test_empty_strings_kept_in_string_columns(self):
        from simclone.table_io import Table

        view = split_typed(Table("x", "", [["a", "x"], ["", "y"]]))
        assert view.string_sub[1][0] == ""

    def test_split_rejoin_split_idempotent(self):
        from simclone.table_io import Table
        from tests.conftest import make_seed_table

        for k in range(3):
            table = make_seed_table(k, 8, 12)
            view = split_typed(table)
            # rejoin: render canonical numerics back to text, keep strings
            cells = []
            for i in range(table.n_rows):
                row = [""] * table.n_cols
                for sub_j, j in enumerate(view.numeric_col_map):
                    v = view.numeric_sub[i, sub_j]
                    row[j] = "" if math.isnan(v) else repr(float(v))
                for sub_j, j in enumerate(view.string_col_map):
                    row[j] = view.string_sub[i][sub_j]
                cells.append(row)
            again = split_typed(Table(table.id, "", cells))
            assert again.numeric_col_map == view.numeric_col_map
            assert again.string_col_map == view.string_col_map
            assert again.string_sub == view.string_sub
            assert np.array_equal(again.numeric_sub, view.numeric_sub,
                                  equal_nan=True)
