"""CSV import: dtype cascade, nulls, determinism, failure modes."""

from __future__ import annotations

import random
from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from mmworkbench.errors import ConflictError, CsvParseError, EncodingError
from mmworkbench.importers import (
    add_source,
    import_table,
    import_text,
    infer_dtype,
)
from mmworkbench.model import Dtype, OriginDescriptor, Project


def table_of(csv_text: str):
    return import_table("t", csv_text.encode("utf-8"), OriginDescriptor()).payload


def test_header_and_rows_hand_parsed():
    table = table_of("p,score\nP1,4\nP2,5\n")
    assert [(c.name, c.dtype) for c in table.columns] == [
        ("p", Dtype.string), ("score", Dtype.int)]
    assert table.rows == [{"p": "P1", "score": 4}, {"p": "P2", "score": 5}]
    assert table.row_ids == ["r000000", "r000001"]


def test_cascade_int_fails_on_decimal():
    table = table_of("x\n1\n2.5\n")
    assert table.columns[0].dtype is Dtype.float
    assert table.rows == [{"x": 1.0}, {"x": 2.5}]


def test_cascade_bool_and_datetime_and_string():
    table = table_of("b,d,s\ntrue,2023-01-02,hey\nFALSE,2023-05-06T07:08:09,ho\n")
    assert [c.dtype for c in table.columns] == [Dtype.bool, Dtype.datetime, Dtype.string]
    assert table.rows[0]["b"] is True and table.rows[1]["b"] is False
    assert table.rows[0]["d"] == datetime(2023, 1, 2)


def test_numeric_strings_stay_numeric_not_bool():
    table = table_of("x\n1\n0\n")
    assert table.columns[0].dtype is Dtype.int


def test_empty_cells_become_null():
    table = table_of("x,y\n1,\n,b\n")
    assert table.rows == [{"x": 1, "y": None}, {"x": None, "y": "b"}]


def test_all_empty_column_is_string():
    table = table_of("x\n\n\n")
    assert table.columns[0].dtype is Dtype.string


def test_quoted_fields_rfc4180():
    table = table_of('a,b\n"with,comma","with ""quote"""\n')
    assert table.rows == [{"a": "with,comma", "b": 'with "quote"'}]


def test_ragged_rows_cite_line():
    with pytest.raises(CsvParseError) as err:
        table_of("a,b\n1,2\n3\n")
    assert err.value.line == 3


def test_duplicate_headers_rejected():
    with pytest.raises(CsvParseError):
        table_of("a,a\n1,2\n")


def test_import_determinism_including_row_ids():
    data = "p,score\nP1,4\nP2,5\n".encode()
    one = import_table("same", data, OriginDescriptor())
    two = import_table("same", data, OriginDescriptor())
    assert one == two
    assert one.payload.row_ids == two.payload.row_ids


def test_reimport_identical_bytes_conflicts():
    project = Project.new("p", project_id="prj-t")
    data = "a\n1\n".encode()
    add_source(project, import_table("t", data, OriginDescriptor()))
    with pytest.raises(ConflictError):
        add_source(project, import_table("t", data, OriginDescriptor()))


def test_inference_scans_all_rows_order_independent():
    values = ["1", "2.5", "true", "x", "", "7"]
    rng = random.Random(0)
    expected = infer_dtype(values)
    for _ in range(20):
        shuffled = values[:]
        rng.shuffle(shuffled)
        assert infer_dtype(shuffled) == expected


@given(st.lists(st.sampled_from(["1", "-3", "2.5", "true", "False", "2023-01-02",
                                 "word", ""]), max_size=12))
def test_inference_order_independence_property(values):
    expected = infer_dtype(values)
    assert infer_dtype(list(reversed(values))) == expected
    assert infer_dtype(sorted(values)) == expected


def test_import_text_verbatim_and_length():
    src = import_text("memo", "hello".encode(), OriginDescriptor())
    assert src.payload.content == "hello"
    assert src.payload.length == 5


def test_import_empty_text_allowed():
    src = import_text("memo", b"", OriginDescriptor())
    assert src.payload.length == 0


def test_invalid_utf8_rejected():
    with pytest.raises(EncodingError):
        import_text("memo", b"\xff\xfe", OriginDescriptor())
    with pytest.raises(EncodingError):
        import_table("t", b"a\n\xff\xfe\n", OriginDescriptor())
