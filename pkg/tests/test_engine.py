"""Cell execution: variable space semantics, outputs, determinism."""

from __future__ import annotations

import pytest

from mmworkbench.engine import NotebookEngine, VariableSpace, evaluate_notebook
from mmworkbench.errors import NotFoundError, ValidationError
from mmworkbench.importers import add_source, import_table, import_text
from mmworkbench.model import (
    Cell,
    CellKind,
    OriginDescriptor,
    OutputKind,
    Project,
)


@pytest.fixture
def project():
    p = Project.new("nb", project_id="prj-nb")
    add_source(p, import_table("survey", b"p,score\nP1,4\nP2,5\nP1,3\n",
                               OriginDescriptor()))
    add_source(p, import_text("memo", b"the cat sat on the mat", OriginDescriptor()))
    return p


def add_code(project, source):
    cell = Cell(id=project.new_id("cell"), kind=CellKind.code, source=source)
    project.notebook.cells.append(cell)
    return cell


def test_assignment_then_expression(project):
    cell = add_code(project, "x = 2\nx")
    outputs = NotebookEngine(project).execute_cell(cell.id)
    assert len(outputs) == 1
    assert outputs[0].kind is OutputKind.value
    assert outputs[0].payload == 2


def test_undefined_name_is_error_output(project):
    cell = add_code(project, "y")
    outputs = NotebookEngine(project).execute_cell(cell.id)
    assert outputs[0].kind is OutputKind.error
    assert outputs[0].payload["code"] == "name_error"


def test_mutations_before_error_persist(project):
    cell = add_code(project, "x = 41\nboom(x)")
    engine = NotebookEngine(project)
    outputs = engine.execute_cell(cell.id)
    assert outputs[0].kind is OutputKind.error
    assert engine.space.get("x") == 41


def test_syntax_error_captured_with_location(project):
    cell = add_code(project, "x = = 3")
    outputs = NotebookEngine(project).execute_cell(cell.id)
    assert outputs[0].kind is OutputKind.error
    assert outputs[0].payload["code"] == "syntax_error"
    assert outputs[0].payload["line"] == 1


def test_prebound_names_read_only(project):
    space = VariableSpace(project)
    with pytest.raises(ValidationError):
        space.set("docs", 1)
    assert space.get("tables") == ["survey"]
    ann_table = space.get("annotations")
    assert ann_table.rows == []


def test_execution_count_monotone(project):
    c1 = add_code(project, "a = 1")
    c2 = add_code(project, "a")
    engine = NotebookEngine(project)
    engine.execute_cell(c1.id)
    engine.execute_cell(c2.id)
    engine.execute_cell(c1.id)
    assert c2.execution_count == 2
    assert c1.execution_count == 3


def test_execute_all_fresh_space_and_order(project):
    add_code(project, "a = 1")
    c2 = add_code(project, "a")
    engine = NotebookEngine(project)
    results = engine.execute_all()
    assert results[c2.id][0].payload == 1
    # stale state must not leak: a later run without the assignment fails
    project.notebook.cells[0].source = "b = 1"
    results = engine.execute_all()
    assert results[c2.id][0].kind is OutputKind.error


def test_error_in_one_cell_does_not_stop_others(project):
    c1 = add_code(project, "boom()")
    c2 = add_code(project, "x = 5\nx")
    results = NotebookEngine(project).execute_all()
    assert results[c1.id][0].kind is OutputKind.error
    assert results[c2.id][0].payload == 5


def test_markdown_cells_skipped(project):
    md = Cell(id=project.new_id("cell"), kind=CellKind.markdown, source="# hi")
    project.notebook.cells.append(md)
    c2 = add_code(project, "1")
    results = NotebookEngine(project).execute_all()
    assert md.id not in results
    assert md.outputs == []
    assert results[c2.id][0].payload == 1


def test_execute_markdown_cell_rejected(project):
    md = Cell(id=project.new_id("cell"), kind=CellKind.markdown, source="# hi")
    project.notebook.cells.append(md)
    with pytest.raises(ValidationError):
        NotebookEngine(project).execute_cell(md.id)


def test_unknown_cell(project):
    with pytest.raises(NotFoundError):
        NotebookEngine(project).execute_cell("cell-nope")


def test_rerun_identical_outputs_and_element_ids(project):
    add_code(project, 't = tables("survey")')
    chart_cell = add_code(project, 'histogram(t, "score", "integer")')
    engine = NotebookEngine(project)
    first = engine.execute_all()
    ids_first = [m.element_id for m in first[chart_cell.id][0].payload.marks]
    second = engine.execute_all()
    ids_second = [m.element_id for m in second[chart_cell.id][0].payload.marks]
    assert ids_first == ids_second
    assert ([o.to_json() for o in first[chart_cell.id]] ==
            [o.to_json() for o in second[chart_cell.id]])


def test_pure_evaluation_commits_nothing(project):
    cell = add_code(project, "x = 1\nx")
    results = evaluate_notebook(project)
    assert results[cell.id][0].payload == 1
    assert cell.outputs == []
    assert cell.execution_count is None


def test_chart_output_carries_lineage_on_every_bar(project):
    add_code(project, 't = tables("survey")')
    chart_cell = add_code(project, 'histogram(t, "score", "integer")')
    results = NotebookEngine(project).execute_all()
    chart = results[chart_cell.id][0].payload
    table = project.data_sources[0].payload
    for mark in chart.marks:
        members = [rid for _, rid in mark.lineage]
        # recompute the bar count from exactly its lineage rows
        value = mark.value["bin_start"]
        expected = [rid for row, rid in zip(table.rows, table.row_ids)
                    if row["score"] == value]
        assert members == expected
        assert mark.value["count"] == len(expected)


def test_filter_sort_builtins(project):
    cell = add_code(project,
                    't = tables("survey")\nsort(filter(t, "p", "==", "P1"), "score")')
    results = NotebookEngine(project).execute_all()
    out = results[cell.id][0]
    assert out.kind is OutputKind.table
    assert [r["score"] for r in out.payload.rows] == [3, 4]
    assert out.payload.row_ids == ["r000002", "r000000"]
    assert out.payload.meta["pipeline"] == ["import", "filter", "sort"]


def test_word_freq_and_stats_via_cells(project):
    freq_cell = add_code(project, 'word_freq(docs, ["the", "on"])')
    stats_cell = add_code(project, 't = tables("survey")\nstats(t, "score")')
    results = NotebookEngine(project).execute_all()
    freq = results[freq_cell.id][0].payload
    assert {r["token"]: r["count"] for r in freq.rows} == {"cat": 1, "sat": 1, "mat": 1}
    record = results[stats_cell.id][0].payload
    assert record["n"] == 3 and record["median"] == 4.0


def test_assigning_prebound_name_is_error_output(project):
    cell = add_code(project, "docs = 3")
    outputs = NotebookEngine(project).execute_cell(cell.id)
    assert outputs[0].kind is OutputKind.error
    assert outputs[0].payload["code"] == "validation_error"
