"""Block graph: creation rules, links/anchors, cascade delete + undo, chains,
regions, provenance stamps."""

from __future__ import annotations

import pytest

from mmworkbench.canonical import canonical_bytes
from mmworkbench.canvas import (
    UndoEntry,
    chain_paths,
    create_block_from_cell_output,
    create_block_from_extract,
    create_link,
    create_note_block,
    create_region,
    assign_to_region,
    delete_block,
    get_provenance,
    move_block,
    path_block_ids,
    resize_block,
    undo_delete,
)
from mmworkbench.errors import (
    AnchorError,
    NotFoundError,
    ValidationError,
)
from mmworkbench.foraging import make_extract
from mmworkbench.model import Anchor, BlockKind, OutputKind, SyncMode


def chart_cell(study):
    for cell in study.project.notebook.cells:
        if cell.outputs and cell.outputs[0].kind is OutputKind.chart:
            return cell
    raise AssertionError("study has no chart cell")


def quote_block(study, span=(0, 22)):
    doc = study.project.data_sources[1].payload
    extract = make_extract(study.project, {"document_id": doc.id,
                                           "span": list(span)})
    return create_block_from_extract(study.project, extract, (10.0, 10.0))


def test_quote_block_kind_level_pipeline(study):
    block = quote_block(study)
    assert block.kind is BlockKind.quote
    assert block.abstraction_level == 0
    assert block.provenance.pipeline == ["import"]
    assert block.provenance.icon_key == "mic"


def test_chart_block_from_group_median_bar(study):
    cell = chart_cell(study)
    block = create_block_from_cell_output(study.project, cell.id, 0, (0.0, 0.0))
    assert block.kind is BlockKind.chart
    assert block.abstraction_level == 2
    assert block.provenance.pipeline == ["import", "group_median", "bar"]
    assert block.provenance.source_names == ["survey"]
    assert block.provenance.icon_key == "clipboard"


def test_datapoint_block_level_zero(study):
    table = study.project.data_sources[0].payload
    extract = make_extract(study.project, {
        "table_id": table.id, "row_id": table.row_ids[0], "column": "response"})
    block = create_block_from_extract(study.project, extract, (0.0, 0.0))
    assert block.kind is BlockKind.datapoint
    assert block.abstraction_level == 0
    assert block.payload["value"] == 4


def test_move_and_resize(study):
    block = quote_block(study)
    moved = move_block(study.project, block.id, (10.0, 20.0))
    assert moved.position == (10.0, 20.0)
    with pytest.raises(NotFoundError):
        move_block(study.project, "blk-nope", (0.0, 0.0))
    with pytest.raises(ValidationError):
        resize_block(study.project, block.id, (0.0, -1.0))


def test_link_to_chart_element(study):
    quote = quote_block(study)
    chart = create_block_from_cell_output(study.project, chart_cell(study).id, 0,
                                          (300.0, 0.0))
    element = chart.payload.marks[0].element_id
    link = create_link(study.project, Anchor(block_id=quote.id),
                       Anchor(block_id=chart.id, subregion={"element_id": element}))
    assert link in study.project.canvas.links


def test_link_to_missing_element_is_anchor_error(study):
    quote = quote_block(study)
    chart = create_block_from_cell_output(study.project, chart_cell(study).id, 0,
                                          (300.0, 0.0))
    with pytest.raises(AnchorError):
        create_link(study.project, Anchor(block_id=quote.id),
                    Anchor(block_id=chart.id, subregion={"element_id": "e-nope"}))


def test_self_link_rejected(study):
    block = quote_block(study)
    with pytest.raises(ValidationError):
        create_link(study.project, Anchor(block_id=block.id),
                    Anchor(block_id=block.id))


def test_text_range_anchor_validated(study):
    quote = quote_block(study, span=(0, 10))
    note = create_note_block(study.project, "note", (500.0, 0.0))
    create_link(study.project,
                Anchor(block_id=quote.id, subregion={"text_range": [0, 4]}),
                Anchor(block_id=note.id))
    with pytest.raises(AnchorError):
        create_link(study.project,
                    Anchor(block_id=quote.id, subregion={"text_range": [0, 999]}),
                    Anchor(block_id=note.id))


def test_delete_cascades_and_reports_all_removals(study):
    a = quote_block(study)
    b = create_note_block(study.project, "n1", (100.0, 0.0))
    c = create_note_block(study.project, "n2", (200.0, 0.0))
    l1 = create_link(study.project, Anchor(block_id=a.id), Anchor(block_id=b.id))
    l2 = create_link(study.project, Anchor(block_id=c.id), Anchor(block_id=a.id))
    removed = delete_block(study.project, a.id)
    assert set(removed) == {a.id, l1.id, l2.id}
    assert study.project.canvas.block_by_id(a.id) is None
    assert all(a.id not in (l.from_anchor.block_id, l.to_anchor.block_id)
               for l in study.project.canvas.links)


def test_delete_isolated_block_single_removal(study):
    block = create_note_block(study.project, "alone", (0.0, 0.0))
    assert delete_block(study.project, block.id) == [block.id]


def test_undo_restores_byte_identical_canvas(study):
    a = quote_block(study)
    b = create_note_block(study.project, "n", (100.0, 0.0))
    create_link(study.project, Anchor(block_id=a.id), Anchor(block_id=b.id))
    region = create_region(study.project, "RQ1", (0.0, 0.0, 400.0, 400.0))
    assign_to_region(study.project, a.id, region.id)

    before = canonical_bytes(study.project.canvas.to_json())
    log: list[UndoEntry] = []
    delete_block(study.project, a.id, log)
    assert canonical_bytes(study.project.canvas.to_json()) != before
    undo_delete(study.project, log.pop())
    assert canonical_bytes(study.project.canvas.to_json()) == before


def test_chain_paths_three_block_chain(study):
    a = quote_block(study)
    b = create_note_block(study.project, "mid", (100.0, 0.0))
    c = create_note_block(study.project, "end", (200.0, 0.0))
    create_link(study.project, Anchor(block_id=a.id), Anchor(block_id=b.id))
    create_link(study.project, Anchor(block_id=b.id), Anchor(block_id=c.id))
    paths = chain_paths(study.project, a.id)
    assert [path_block_ids(p) for p in paths] == [[a.id, b.id, c.id]]


def test_chain_paths_isolated_block_empty(study):
    block = create_note_block(study.project, "x", (0.0, 0.0))
    assert chain_paths(study.project, block.id) == []


def test_chain_paths_cycle_terminates(study):
    a = create_note_block(study.project, "a", (0.0, 0.0))
    b = create_note_block(study.project, "b", (100.0, 0.0))
    create_link(study.project, Anchor(block_id=a.id), Anchor(block_id=b.id))
    create_link(study.project, Anchor(block_id=b.id), Anchor(block_id=a.id))
    paths = chain_paths(study.project, a.id)
    assert [path_block_ids(p) for p in paths] == [[a.id, b.id]]


def test_chain_depth_limit(study):
    blocks = [create_note_block(study.project, str(i), (float(i), 0.0))
              for i in range(12)]
    for left, right in zip(blocks, blocks[1:]):
        create_link(study.project, Anchor(block_id=left.id),
                    Anchor(block_id=right.id))
    paths = chain_paths(study.project, blocks[0].id)
    assert len(paths) == 1
    assert len(paths[0]) == 8  # depth-limited


def test_regions_single_membership(study):
    a = quote_block(study)
    b = create_note_block(study.project, "b", (50.0, 0.0))
    r1 = create_region(study.project, "RQ1", (0.0, 0.0, 300.0, 300.0))
    r2 = create_region(study.project, "RQ2", (300.0, 0.0, 300.0, 300.0))
    assign_to_region(study.project, a.id, r1.id)
    assign_to_region(study.project, b.id, r1.id)
    assert r1.members == [a.id, b.id]
    assign_to_region(study.project, a.id, r2.id)
    assert r1.members == [b.id]
    assert r2.members == [a.id]


def test_zero_area_region_rejected(study):
    with pytest.raises(ValidationError):
        create_region(study.project, "flat", (0.0, 0.0, 100.0, 0.0))


def test_provenance_lookup_and_filter_pipeline(study):
    session = study
    session.add_cell("code",
                     't = tables("survey")\n'
                     'f = filter(t, "condition", "==", "A")\n'
                     'gm2 = group_median(f, "question", "response")\n'
                     'bar(gm2, "group", "median")')
    session.execute_all()
    cell = session.project.notebook.cells[-1]
    block = create_block_from_cell_output(session.project, cell.id, 0, (0.0, 0.0))
    stamp = get_provenance(session.project, block.id)
    assert stamp.pipeline == ["import", "filter", "group_median", "bar"]
    with pytest.raises(NotFoundError):
        get_provenance(session.project, "blk-nope")
