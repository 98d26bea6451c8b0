"""tables：CSV 与 JSON 输出"""
import json

import numpy as np
import pytest

from lab.core import Coefficients
from lab.errors import DomainError
from lab.tables import (
    RESULT_COLUMNS,
    append_results,
    dumps_report,
    format_value,
    read_coefficients,
    read_rows,
    result_row,
    write_coefficients,
    write_counts,
    write_rows,
    write_shell,
)


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "1"
    assert format_value(np.int64(12)) == "12"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("inf")) == "inf"
    assert format_value(float("nan")) == "nan"
    assert format_value("mc") == "mc"


def test_results_append_without_repeating_header(tmp_path):
    path = str(tmp_path / "out" / "results.csv")
    append_results(path, [result_row("moment", 32.0, 0.0, "exact-count", d=1, N=32, p=2)])
    append_results(path, [result_row("moment", 15.0, 0.0, "exact-count", d=2, N=3, p=4, seed=7)])
    header, rows = read_rows(path)
    assert tuple(header) == RESULT_COLUMNS
    assert len(rows) == 2
    assert rows[1][RESULT_COLUMNS.index("seed")] == "7"
    assert rows[0][RESULT_COLUMNS.index("j")] == ""
    with open(path, "rb") as f:
        assert b"\r\n" not in f.read()


def test_row_length_checked(tmp_path):
    with pytest.raises(DomainError):
        write_rows(str(tmp_path / "x.csv"), ["a", "b"], [[1, 2, 3]])


def test_read_missing_or_empty(tmp_path):
    with pytest.raises(DomainError):
        read_rows(str(tmp_path / "none.csv"))
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DomainError):
        read_rows(str(empty))


def test_multi_index_coefficients(tmp_path):
    a = Coefficients.from_points([[1, 2], [3, 4], [5, 6]], [1.0, 1j, -0.25 + 0.5j])
    path = str(tmp_path / "a.csv")
    write_coefficients(path, a)
    header, _ = read_rows(path)
    assert header == ["n_1", "n_2", "re", "im"]
    b = read_coefficients(path)
    np.testing.assert_array_equal(b.support, a.support)
    np.testing.assert_array_equal(b.values, a.values)


def test_bad_coefficient_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("n,value\n1,2\n")
    with pytest.raises(DomainError):
        read_coefficients(str(path))


def test_counts_put_zero_bucket_first(tmp_path):
    path = str(tmp_path / "counts.csv")
    write_counts(path, "j", {2: 5, None: 3, 0: 9})
    header, rows = read_rows(path)
    assert header == ["j", "count"]
    assert rows == [["zero", "3"], ["0", "9"], ["2", "5"]]


def test_shell(tmp_path):
    path = str(tmp_path / "shell.csv")
    assert write_shell(path, [(-5, 0), (0, 5)]) == 2
    assert read_rows(path) == (["x", "y"], [["-5", "0"], ["0", "5"]])


def test_report_is_canonical():
    text = dumps_report({"b": np.float64(1.5), "a": [np.int64(2), complex(1, -1)], "c": float("inf"),
                         "ok": np.bool_(True), 3: None})
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["a"] == [2, [1.0, -1.0]]
    assert data["c"] == "inf"
    assert data["ok"] is True
    assert data["3"] is None
    assert text.endswith("\n")
