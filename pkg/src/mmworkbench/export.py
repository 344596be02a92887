"""Static, self-contained HTML rendition of the canvas.

Position-faithful blocks, links drawn as SVG connectors, provenance captions
with origin icons on every block, and chain navigation via intra-document
anchors. Embeds no external resources.
"""

from __future__ import annotations

import html
from typing import Any

from .canvas import anchor_resolves, chain_paths, path_block_ids
from .model import Block, BlockKind, ChartKind, ChartSpec, Project, Table

GLYPHS = {"mic": "🎤", "group": "👥", "clipboard": "📋",
          "terminal": "🖥", "file": "📄"}

_CSS = """
body { font-family: sans-serif; background: #fafafa; margin: 0; padding: 1rem; }
h1 { font-size: 1.2rem; }
.canvas { position: relative; background: #fff; border: 1px solid #ccc; margin: 1rem 0; }
.region { position: absolute; border: 2px dashed #b9c4d4; border-radius: 6px; }
.region .region-name { position: absolute; top: -0.8em; left: 8px; background: #fff;
  padding: 0 4px; color: #6b7a90; font-size: 0.75rem; }
.block { position: absolute; border: 1px solid #888; border-radius: 4px;
  background: #fdfdfd; box-shadow: 1px 1px 3px rgba(0,0,0,.15); overflow: hidden;
  font-size: 0.75rem; }
.block .caption { background: #eef2f7; padding: 2px 6px; border-bottom: 1px solid #ddd;
  white-space: nowrap; overflow: hidden; text-overflow: ellipsis; }
.block .body { padding: 4px 6px; overflow: auto; height: calc(100% - 3.4em); }
.block .pipeline { color: #667; padding: 1px 6px; font-size: 0.68rem;
  border-top: 1px dotted #ccc; }
.badge { display: inline-block; border-radius: 3px; padding: 0 4px; margin-left: 4px;
  font-size: 0.65rem; color: #fff; }
.badge.stale { background: #c77f00; }
.badge.dangling { background: #b33; }
.badge.live { background: #2a7; }
svg.wires { position: absolute; left: 0; top: 0; pointer-events: none; }
line.link { stroke: #557; stroke-width: 1.5; marker-end: url(#arrow); }
table.mini { border-collapse: collapse; }
table.mini td, table.mini th { border: 1px solid #ccc; padding: 1px 4px; }
.chains li { margin: 2px 0; }
blockquote { margin: 2px; font-style: italic; }
"""


def _esc(value: Any) -> str:
    return html.escape(str(value))


def _chart_svg(chart: ChartSpec, width: float, height: float) -> str:
    w, h = max(width - 16, 40), max(height - 56, 30)
    parts = [f'<svg width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">']
    marks = chart.marks
    if not marks:
        parts.append("</svg>")
        return "".join(parts)
    if chart.chart_kind in (ChartKind.bar, ChartKind.histogram):
        values = [m.value.get("count", m.value.get("value", 0)) or 0 for m in marks]
        top = max(max(values), 1)
        bw = w / len(marks)
        for i, mark in enumerate(marks):
            bh = (values[i] / top) * (h - 4)
            parts.append(
                f'<rect data-element="{_esc(mark.element_id)}" x="{i * bw + 1:.1f}" '
                f'y="{h - bh:.1f}" width="{max(bw - 2, 1):.1f}" height="{bh:.1f}" '
                f'fill="#6a8fbb"><title>{_esc(mark.key)}: {values[i]}</title></rect>')
    elif chart.chart_kind is ChartKind.scatter:
        xs = [m.value["x"] for m in marks]
        ys = [m.value["y"] for m in marks]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        sx = (w - 8) / ((x1 - x0) or 1)
        sy = (h - 8) / ((y1 - y0) or 1)
        for mark in marks:
            cx = 4 + (mark.value["x"] - x0) * sx
            cy = h - 4 - (mark.value["y"] - y0) * sy
            parts.append(
                f'<circle data-element="{_esc(mark.element_id)}" cx="{cx:.1f}" '
                f'cy="{cy:.1f}" r="3" fill="#b3553a"><title>'
                f'({mark.value["x"]}, {mark.value["y"]})</title></circle>')
    else:  # wordcloud
        top = max(m.value.get("count", 1) for m in marks) or 1
        y = 12.0
        for mark in marks[:12]:
            size = 8 + 10 * (mark.value.get("count", 1) / top)
            parts.append(
                f'<text data-element="{_esc(mark.element_id)}" x="4" y="{y:.0f}" '
                f'font-size="{size:.0f}">{_esc(mark.key)}</text>')
            y += size + 2
            if y > h:
                break
    parts.append("</svg>")
    return "".join(parts)


def _table_html(table: Table, limit: int = 8) -> str:
    head = "".join(f"<th>{_esc(c.name)}</th>" for c in table.columns)
    body = []
    for row in table.rows[:limit]:
        cells = "".join(
            f"<td>{'' if row.get(c.name) is None else _esc(row.get(c.name))}</td>"
            for c in table.columns)
        body.append(f"<tr>{cells}</tr>")
    more = (f"<tr><td colspan={len(table.columns)}>… {len(table.rows) - limit} more"
            "</td></tr>" if len(table.rows) > limit else "")
    return f'<table class="mini"><tr>{head}</tr>{"".join(body)}{more}</table>'


def _block_body(block: Block) -> str:
    payload = block.payload
    if isinstance(payload, ChartSpec):
        return _chart_svg(payload, block.size[0], block.size[1])
    if isinstance(payload, Table):
        return _table_html(payload)
    if block.kind is BlockKind.quote:
        return f"<blockquote>{_esc(payload.get('text', ''))}</blockquote>"
    if block.kind is BlockKind.datapoint:
        value = payload.get("value")
        where = (f"{payload.get('column')} @ {payload.get('row_id')}"
                 if "column" in payload else "value")
        return f"<b>{_esc(value)}</b> <small>{_esc(where)}</small>"
    return f"<p>{_esc(payload.get('text', ''))}</p>"


def export_html(project: Project) -> str:
    canvas = project.canvas
    blocks = canvas.blocks
    pad = 40.0
    min_x = min([b.position[0] for b in blocks] +
                [r.bounds[0] for r in canvas.regions], default=0.0)
    min_y = min([b.position[1] for b in blocks] +
                [r.bounds[1] for r in canvas.regions], default=0.0)
    max_x = max([b.position[0] + b.size[0] for b in blocks] +
                [r.bounds[0] + r.bounds[2] for r in canvas.regions], default=400.0)
    max_y = max([b.position[1] + b.size[1] for b in blocks] +
                [r.bounds[1] + r.bounds[3] for r in canvas.regions], default=300.0)
    ox, oy = pad - min_x, pad - min_y
    width, height = max_x - min_x + 2 * pad, max_y - min_y + 2 * pad

    dangling_blocks = set()
    for link in canvas.links:
        if link.dangling_from or not anchor_resolves(project, link.from_anchor):
            dangling_blocks.add(link.from_anchor.block_id)
        if link.dangling_to or not anchor_resolves(project, link.to_anchor):
            dangling_blocks.add(link.to_anchor.block_id)

    out = [
        "<!DOCTYPE html><html><head><meta charset='utf-8'>",
        f"<title>{_esc(project.name)}</title><style>{_CSS}</style></head><body>",
        f"<h1>{_esc(project.name)}</h1>",
        f"<p>{len(blocks)} blocks, {len(canvas.links)} links, "
        f"{len(canvas.regions)} regions.</p>",
        f'<div class="canvas" style="width:{width:.0f}px;height:{height:.0f}px">',
    ]

    for region in canvas.regions:
        x, y, w, h = region.bounds
        out.append(
            f'<div class="region" id="region-{_esc(region.id)}" '
            f'style="left:{x + ox:.0f}px;top:{y + oy:.0f}px;width:{w:.0f}px;'
            f'height:{h:.0f}px"><span class="region-name">{_esc(region.name)}'
            "</span></div>")

    for block in blocks:
        x, y = block.position[0] + ox, block.position[1] + oy
        w, h = block.size
        stamp = block.provenance
        glyph = GLYPHS.get(stamp.icon_key, "📄")
        badges = []
        if block.sync_mode.value == "live":
            badges.append('<span class="badge live">live</span>')
        if block.stale:
            badges.append('<span class="badge stale">stale</span>')
        if block.id in dangling_blocks:
            badges.append('<span class="badge dangling">dangling</span>')
        caption = (f'{glyph} {_esc(", ".join(stamp.source_names) or block.kind.value)}'
                   f'{"".join(badges)}')
        out.append(
            f'<div class="block kind-{block.kind.value}" id="block-{_esc(block.id)}" '
            f'style="left:{x:.0f}px;top:{y:.0f}px;width:{w:.0f}px;height:{h:.0f}px">'
            f'<div class="caption" title="level {block.abstraction_level}">{caption}</div>'
            f'<div class="body">{_block_body(block)}</div>'
            f'<div class="pipeline">{_esc(" › ".join(stamp.pipeline))}</div></div>')

    # one connector element per link
    out.append(f'<svg class="wires" width="{width:.0f}" height="{height:.0f}">'
               '<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="7" '
               'refY="3" orient="auto"><path d="M0,0 L7,3 L0,6 z" fill="#557"/>'
               "</marker></defs>")
    centers = {
        b.id: (b.position[0] + ox + b.size[0] / 2, b.position[1] + oy + b.size[1] / 2)
        for b in blocks
    }
    for link in canvas.links:
        a = centers.get(link.from_anchor.block_id)
        b = centers.get(link.to_anchor.block_id)
        if a is None or b is None:
            continue
        label = _esc(link.label or link.id)
        out.append(
            f'<line class="link" id="link-{_esc(link.id)}" x1="{a[0]:.0f}" '
            f'y1="{a[1]:.0f}" x2="{b[0]:.0f}" y2="{b[1]:.0f}">'
            f"<title>{label}</title></line>")
    out.append("</svg></div>")

    # chain navigation: anchors into the canvas
    names = {b.id: f"{b.kind.value} {b.id}" for b in blocks}
    chains: list[list[str]] = []
    targets = {l.to_anchor.block_id for l in canvas.links}
    for block in blocks:
        if block.id in targets:
            continue  # chains start at blocks nothing points to
        for path in chain_paths(project, block.id):
            chains.append(path_block_ids(path))
    if chains:
        out.append('<h2>Chains</h2><ul class="chains">')
        for chain in chains:
            hops = " → ".join(
                f'<a href="#block-{_esc(bid)}">{_esc(names.get(bid, bid))}</a>'
                for bid in chain)
            out.append(f"<li>{hops}</li>")
        out.append("</ul>")

    out.append("</body></html>")
    return "".join(out)
