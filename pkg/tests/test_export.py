"""Static HTML report: structural equality with the canvas model."""

from __future__ import annotations

from html.parser import HTMLParser

from mmworkbench.export import export_html
from mmworkbench.model import Anchor, OutputKind, Project

from conftest import build_study_session


class Counter(HTMLParser):
    def __init__(self):
        super().__init__()
        self.blocks = []
        self.links = []
        self.badges = []
        self.regions = []

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        classes = (attrs.get("class") or "").split()
        if "block" in classes:
            self.blocks.append(attrs.get("id"))
        if "link" in classes and tag == "line":
            self.links.append(attrs.get("id"))
        if "badge" in classes:
            self.badges.append(classes)
        if "region" in classes:
            self.regions.append(attrs.get("id"))


def parse(html_text: str) -> Counter:
    counter = Counter()
    counter.feed(html_text)
    return counter


def scenario_session():
    session = build_study_session(project_id="prj-export")
    doc = session.project.data_sources[1].payload
    q1 = session.create_block_from_extract(
        {"document_id": doc.id, "span": [0, 7]}, (0.0, 0.0))
    q2 = session.create_block_from_extract(
        {"document_id": doc.id, "span": [8, 14]}, (300.0, 0.0))
    cell = next(c for c in session.project.notebook.cells
                if c.outputs and c.outputs[0].kind is OutputKind.chart)
    chart = session.create_block_from_cell_output(cell.id, 0, (600.0, 0.0))
    session.create_link(Anchor(block_id=q1.id), Anchor(block_id=chart.id))
    session.create_link(Anchor(block_id=q2.id), Anchor(block_id=chart.id))
    return session


def test_structural_counts_match_canvas():
    session = scenario_session()
    counter = parse(export_html(session.project))
    canvas = session.project.canvas
    assert len(counter.blocks) == len(canvas.blocks) == 3
    assert len(counter.links) == len(canvas.links) == 2
    assert set(counter.blocks) == {f"block-{b.id}" for b in canvas.blocks}
    assert set(counter.links) == {f"link-{l.id}" for l in canvas.links}


def test_empty_canvas_valid_report():
    project = Project.new("empty", project_id="prj-empty-export")
    text = export_html(project)
    counter = parse(text)
    assert counter.blocks == [] and counter.links == []
    assert "<!DOCTYPE html>" in text


def test_every_block_has_provenance_caption():
    session = scenario_session()
    text = export_html(session.project)
    assert text.count('class="caption"') == len(session.project.canvas.blocks)
    assert "🎤" in text  # interview origin icon
    assert "📋" in text  # survey origin icon


def test_dangling_anchor_renders_badge():
    session = scenario_session()
    cell = next(c for c in session.project.notebook.cells
                if c.outputs and c.outputs[0].kind is OutputKind.chart)
    # live block: payload re-materializes, so its anchored mark can vanish
    chart = session.create_block_from_cell_output(cell.id, 0, (900.0, 0.0), "live")
    element = chart.payload.marks[0].element_id
    quote = session.project.canvas.blocks[0]
    session.create_link(Anchor(block_id=quote.id, subregion={"text_range": [0, 3]}),
                        Anchor(block_id=chart.id, subregion={"element_id": element}))
    # break the anchored mark away by pointing the bar cell at an empty table
    bar_cell = session.project.notebook.cells[2]
    session.update_cell(bar_cell.id,
                        'bar(group_median(filter(tables("survey"), "response", '
                        '">", 900), "question", "response"), "group", "median")')
    session.execute_all()
    text = export_html(session.project)
    counter = parse(text)
    assert any("dangling" in classes for classes in counter.badges)


def test_no_external_resources():
    session = scenario_session()
    text = export_html(session.project)
    for marker in ("http://", "https://", "src=", "href=\"http"):
        if marker == "src=":
            assert "img src=" not in text
        else:
            assert marker not in text or marker == "href=\"http"


def test_regions_rendered():
    session = scenario_session()
    region = session.create_region("RQ1", (0.0, 0.0, 500.0, 400.0))
    session.assign_to_region(session.project.canvas.blocks[0].id, region.id)
    counter = parse(export_html(session.project))
    assert counter.regions == [f"region-{region.id}"]


def test_chains_navigation_links():
    session = scenario_session()
    text = export_html(session.project)
    assert "Chains" in text
    for block in session.project.canvas.blocks:
        assert f'href="#block-{block.id}"' in text or f'id="block-{block.id}"' in text
