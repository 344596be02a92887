"""Coding, table views (against a brute-force oracle), extraction."""

from __future__ import annotations

import random

import pytest

from mmworkbench.errors import (
    ConflictError,
    NotFoundError,
    SpanError,
    TypeMismatchError,
    ValidationError,
)
from mmworkbench.foraging import (
    PALETTE,
    Predicate,
    TableView,
    annotate,
    apply_table_view,
    create_code,
    make_extract,
    query_annotations,
    suggest_codes,
)
from mmworkbench.importers import add_source, import_table, import_text
from mmworkbench.model import OriginDescriptor, OriginMethod, Project


@pytest.fixture
def project():
    p = Project.new("t", project_id="prj-forage")
    add_source(p, import_text("memo", "participants liked it".encode(),
                              OriginDescriptor(method=OriginMethod.interview)))
    add_source(p, import_table(
        "scores", b"p,score\nP1,3\nP2,5\nP1,4\n",
        OriginDescriptor(method=OriginMethod.survey)))
    return p


def doc_id(project):
    return project.data_sources[0].payload.id


def table_id(project):
    return project.data_sources[1].payload.id


# -- codes -------------------------------------------------------------------

def test_first_code_gets_first_palette_color(project):
    code = create_code(project, "usability")
    assert code.color == PALETTE[0]


def test_duplicate_label_case_insensitive_conflicts(project):
    create_code(project, "usability")
    with pytest.raises(ConflictError):
        create_code(project, "Usability")


def test_thirteenth_code_cycles_palette(project):
    for i in range(12):
        create_code(project, f"code{i}")
    thirteenth = create_code(project, "one more")
    assert thirteenth.color == PALETTE[0]


def test_empty_label_rejected(project):
    with pytest.raises(ValidationError):
        create_code(project, "")


def test_suggest_codes_prefix_scan(project):
    for label in ["usability", "users", "cost"]:
        create_code(project, label)
    hits = suggest_codes(project, "us")
    assert [c.label for c in hits] == ["usability", "users"]
    assert [c.label for c in suggest_codes(project, "")] == ["cost", "usability", "users"]
    assert suggest_codes(project, "zz") == []


def test_suggest_codes_matches_naive_set(project):
    labels = ["Alpha", "alphabet", "beta", "ALPACA", "gamma"]
    for label in labels:
        create_code(project, label)
    for prefix in ["a", "al", "alp", "b", "q", ""]:
        expected = sorted((l for l in labels if l.lower().startswith(prefix)),
                          key=str.lower)
        assert [c.label for c in suggest_codes(project, prefix)] == expected


# -- annotations ----------------------------------------------------------------

def test_annotate_covers_selected_text(project):
    code = create_code(project, "sentiment")
    ann = annotate(project, doc_id(project), (13, 18), [code.id], "", "me")
    doc = project.data_sources[0].payload
    assert doc.content[ann.span[0]:ann.span[1]] == "liked"


def test_reversed_span_rejected(project):
    with pytest.raises(SpanError):
        annotate(project, doc_id(project), (5, 3), [], "", "me")


def test_overlapping_annotations_allowed(project):
    annotate(project, doc_id(project), (13, 18), [], "", "me")
    second = annotate(project, doc_id(project), (0, 12), [], "", "me")
    assert second in project.annotations


def test_unknown_code_is_reference_error(project):
    with pytest.raises(NotFoundError):
        annotate(project, doc_id(project), (0, 4), ["code-nope"], "", "me")


def test_query_annotations_filter_and_order(project):
    c1 = create_code(project, "one")
    c2 = create_code(project, "two")
    annotate(project, doc_id(project), (13, 18), [c1.id], "", "me")
    annotate(project, doc_id(project), (0, 5), [c1.id, c2.id], "", "me")
    annotate(project, doc_id(project), (6, 10), [c2.id], "", "me")
    hits = query_annotations(project, code_id=c1.id)
    assert [a.span for a in hits] == [(0, 5), (13, 18)]
    assert len(query_annotations(project)) == 3
    assert query_annotations(project, code_id="code-unknown") == []


# -- table views -----------------------------------------------------------------

def test_filter_keeps_original_order_and_ids(project):
    view = TableView(table_id=table_id(project),
                     filters=[Predicate("p", "==", "P1")])
    result = apply_table_view(project, view)
    assert result.row_ids == ["r000000", "r000002"]
    assert [r["score"] for r in result.rows] == [3, 4]


def test_sort_desc_preserves_ids(project):
    view = TableView(table_id=table_id(project), sorts=[("score", "desc")])
    result = apply_table_view(project, view)
    assert [r["score"] for r in result.rows] == [5, 4, 3]
    assert result.row_ids == ["r000001", "r000002", "r000000"]


def test_contains_on_int_column_is_type_error(project):
    view = TableView(table_id=table_id(project),
                     filters=[Predicate("score", "contains", "a")])
    with pytest.raises(TypeMismatchError):
        apply_table_view(project, view)


def test_ordering_on_string_column_is_type_error(project):
    view = TableView(table_id=table_id(project),
                     filters=[Predicate("p", "<", "P2")])
    with pytest.raises(TypeMismatchError):
        apply_table_view(project, view)


def test_unknown_column_rejected(project):
    with pytest.raises(ValidationError):
        apply_table_view(project, TableView(table_id=table_id(project),
                                            filters=[Predicate("nope", "==", "x")]))


# independent oracle: same semantics, separate implementation ------------------

def oracle_matches(value, op, literal):
    if value is None:
        return False
    table = {"==": lambda a, b: a == b, "!=": lambda a, b: a != b,
             "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
             ">": lambda a, b: a > b, ">=": lambda a, b: a >= b,
             "contains": lambda a, b: b in a}
    return table[op](value, literal)


def oracle_view(rows, row_ids, filters, sorts):
    pairs = [(dict(r), i) for r, i in zip(rows, row_ids)
             if all(oracle_matches(r.get(f.column), f.op, f.literal) for f in filters)]
    for column, direction in reversed(sorts):
        non_null = [p for p in pairs if p[0].get(column) is not None]
        nulls = [p for p in pairs if p[0].get(column) is None]
        non_null.sort(key=lambda p: p[0][column], reverse=(direction == "desc"))
        pairs = non_null + nulls
    return [i for _, i in pairs]


def random_table_source(rng, n_rows=1000):
    lines = ["participant,score,ratio,flag,note"]
    for _ in range(n_rows):
        lines.append(",".join([
            f"P{rng.randint(1, 9)}",
            rng.choice(["", str(rng.randint(1, 5))]),
            rng.choice(["", f"{rng.uniform(0, 1):.4f}"]),
            rng.choice(["true", "false"]),
            rng.choice(["aa", "ab", "ba", "bb", ""]),
        ]))
    return import_table("big", ("\n".join(lines) + "\n").encode(), OriginDescriptor())


def random_view(rng, tbl_id):
    filters = []
    for _ in range(rng.randint(0, 3)):
        column = rng.choice(["participant", "score", "ratio", "flag", "note"])
        if column in ("participant", "note"):
            op = rng.choice(["==", "!=", "contains"])
            literal = rng.choice(["P1", "P2", "a", "b", "aa"])
        elif column == "flag":
            op = rng.choice(["==", "!="])
            literal = rng.choice([True, False])
        else:
            op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
            literal = rng.randint(1, 5) if column == "score" else rng.uniform(0, 1)
        filters.append(Predicate(column, op, literal))
    sorts = []
    for _ in range(rng.randint(0, 3)):
        sorts.append((rng.choice(["participant", "score", "ratio", "flag", "note"]),
                      rng.choice(["asc", "desc"])))
    return TableView(table_id=tbl_id, filters=filters, sorts=sorts)


def test_view_matches_bruteforce_oracle_on_random_tables():
    rng = random.Random(42)
    project = Project.new("big", project_id="prj-big")
    src = random_table_source(rng)
    add_source(project, src)
    table = src.payload
    for _ in range(100):
        view = random_view(rng, table.id)
        got = apply_table_view(project, view).row_ids
        expected = oracle_view(table.rows, table.row_ids, view.filters, view.sorts)
        assert got == expected


def test_filter_then_sort_commutes_with_sort_then_filter():
    rng = random.Random(90)
    project = Project.new("c", project_id="prj-comm")
    src = random_table_source(rng, n_rows=300)
    add_source(project, src)
    tbl = src.payload.id
    for _ in range(25):
        view = random_view(rng, tbl)
        fs = apply_table_view(project, view)
        sorted_first = apply_table_view(
            project, TableView(table_id=tbl, sorts=view.sorts))
        # filtering the pre-sorted rows must give the same sequence
        keep = set(apply_table_view(
            project, TableView(table_id=tbl, filters=view.filters)).row_ids)
        sf_ids = [i for i in sorted_first.row_ids if i in keep]
        assert fs.row_ids == sf_ids
        assert set(fs.row_ids) == keep & set(sorted_first.row_ids)


# -- extraction ---------------------------------------------------------------------

def test_quote_extract_snapshots_text_and_origin(project):
    extract = make_extract(project, {"document_id": doc_id(project), "span": [0, 12]})
    assert extract.kind == "quote"
    assert extract.content["text"] == "participants"
    assert extract.origin.method is OriginMethod.interview


def test_datapoint_extract_single_cell(project):
    extract = make_extract(project, {"table_id": table_id(project),
                                     "row_id": "r000001", "column": "score"})
    assert extract.kind == "datapoint"
    assert extract.content["value"] == 5


def test_slice_extract_keeps_row_ids(project):
    extract = make_extract(project, {"table_id": table_id(project),
                                     "row_ids": ["r000002", "r000000"]})
    assert extract.kind == "table_slice"
    assert extract.content.row_ids == ["r000002", "r000000"]


def test_stale_row_reference_errors(project):
    with pytest.raises(NotFoundError):
        make_extract(project, {"table_id": table_id(project),
                               "row_id": "r999999", "column": "score"})


def test_annotation_text_recoverable(project):
    """Span text re-extracted from the document equals the captured text."""
    code = create_code(project, "c")
    doc = project.data_sources[0].payload
    captured = {}
    for span in [(0, 12), (13, 18), (19, 21)]:
        ann = annotate(project, doc.id, span, [code.id], "", "me")
        captured[ann.id] = doc.content[span[0]:span[1]]
    for ann in project.annotations:
        assert doc.content[ann.span[0]:ann.span[1]] == captured[ann.id]
