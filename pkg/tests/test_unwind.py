"""Level-by-level unwinding: aggregate mark -> distribution -> quotes."""

from __future__ import annotations

import pytest

from mmworkbench.canvas import (
    create_block_from_cell_output,
    create_block_from_descriptor,
    unwind,
)
from mmworkbench.errors import NoLineageError
from mmworkbench.model import Anchor, BlockKind, ChartKind, OutputKind

from conftest import RESPONSES, build_study_session


def chart_block(session):
    cell = next(c for c in session.project.notebook.cells
                if c.outputs and c.outputs[0].kind is OutputKind.chart)
    return create_block_from_cell_output(session.project, cell.id, 0, (0.0, 0.0))


def mark_for(chart, label):
    return next(m for m in chart.marks if m.value["label"] == label)


def expected_rows(session, question, condition):
    table = session.project.data_sources[0].payload
    return {
        rid for row, rid in zip(table.rows, table.row_ids)
        if row["question"] == question and row["condition"] == condition
        and row["response"] is not None
    }


def test_median_bar_unwinds_to_histogram_over_exact_lineage(study):
    block = chart_block(study)
    mark = mark_for(block.payload, "Q1 / A")
    result = unwind(study.project,
                    Anchor(block_id=block.id, subregion={"element_id": mark.element_id}))
    assert result.flag is None
    kinds = [d["kind"] for d in result.suggestions]
    assert kinds == ["chart", "table_slice"]
    hist = result.suggestions[0]
    assert hist["source_ref"]["selection"]["chart"] == "histogram"
    assert set(hist["source_ref"]["selection"]["row_ids"]) == \
        expected_rows(study, "Q1", "A")
    assert hist["source_ref"]["selection"]["column"] == "response"
    assert hist["abstraction_level"] == 1
    assert hist["provenance"]["pipeline"] == ["import", "group_median", "bar", "unwind"]


def test_unwind_monotone_levels(study):
    block = chart_block(study)
    for mark in block.payload.marks:
        result = unwind(study.project, Anchor(
            block_id=block.id, subregion={"element_id": mark.element_id}))
        for descriptor in result.suggestions:
            assert descriptor["abstraction_level"] < block.abstraction_level


def test_accepted_histogram_unwinds_to_participant_quotes(study):
    block = chart_block(study)
    mark = mark_for(block.payload, "Q1 / B")
    result = unwind(study.project, Anchor(
        block_id=block.id, subregion={"element_id": mark.element_id}))
    hist_block, link = create_block_from_descriptor(
        study.project, result.suggestions[0], (200.0, 0.0))
    assert hist_block.kind is BlockKind.chart
    assert hist_block.payload.chart_kind is ChartKind.histogram
    assert link is not None and link.from_anchor.subregion == {
        "element_id": mark.element_id}

    # histogram of Q1/B responses: pick the bar holding value 2
    bar2 = next(m for m in hist_block.payload.marks if m.value["bin_start"] == 2.0)
    expected_participants = sorted({
        p for (p, q, c), r in RESPONSES.items()
        if q == "Q1" and c == "B" and r == 2
    })
    quotes = unwind(study.project, Anchor(
        block_id=hist_block.id, subregion={"element_id": bar2.element_id}))
    assert quotes.flag is None
    names = {d["provenance"]["source_names"][0] for d in quotes.suggestions}
    assert names == {f"interview_{p}" for p in expected_participants}
    for descriptor in quotes.suggestions:
        assert descriptor["kind"] == "quote"
        assert descriptor["abstraction_level"] == 0
        participant = descriptor["provenance"]["origin"]["participant"]
        assert participant in expected_participants


def test_missing_join_key_flags_empty(study):
    # a table without the participant column
    study.import_source("table", "timings", b"task,ms\nT1,120\nT2,80\n",
                        study.project.data_sources[0].origin)
    study.add_cell("code", 's = scatter(tables("timings"), "ms", "ms")\ns')
    study.execute_all()
    cell = study.project.notebook.cells[-1]
    block = create_block_from_cell_output(study.project, cell.id, 0, (0.0, 0.0))
    mark = block.payload.marks[0]
    result = unwind(study.project, Anchor(
        block_id=block.id, subregion={"element_id": mark.element_id}))
    assert result.suggestions == []
    assert result.flag == "join_key_missing"


def test_unwind_without_lineage_errors(study):
    from mmworkbench.canvas import create_note_block
    note = create_note_block(study.project, "free text", (0.0, 0.0))
    with pytest.raises(NoLineageError):
        unwind(study.project, Anchor(block_id=note.id))


def test_aggregate_table_row_unwinds_like_a_mark(study):
    gm_cell = study.project.notebook.cells[1]
    assert gm_cell.outputs[0].kind is OutputKind.table
    block = create_block_from_cell_output(study.project, gm_cell.id, 0, (0.0, 0.0))
    assert block.abstraction_level == 2
    table = block.payload
    row_id = table.row_ids[0]  # Q1 / A
    result = unwind(study.project, Anchor(
        block_id=block.id, subregion={"cell": [row_id, "median"]}))
    hist = result.suggestions[0]
    assert set(hist["source_ref"]["selection"]["row_ids"]) == \
        expected_rows(study, "Q1", "A")


def test_wordcloud_mark_unwinds_to_token_quotes():
    session = build_study_session(project_id="prj-wc")
    session.add_cell("code", "wordcloud(word_freq(docs, [\"the\", \"i\"]))")
    session.execute_all()
    cell = session.project.notebook.cells[-1]
    block = create_block_from_cell_output(session.project, cell.id, 0, (0.0, 0.0))
    mark = next(m for m in block.payload.marks if m.key == "layout")
    result = unwind(session.project, Anchor(
        block_id=block.id, subregion={"element_id": mark.element_id}))
    assert result.suggestions, "token occurrences should yield quote descriptors"
    total = 0
    for descriptor in result.suggestions:
        assert descriptor["kind"] == "quote"
        assert descriptor["preview"]["text"].lower() == "layout"
        total += 1
    assert total == mark.value["count"]
