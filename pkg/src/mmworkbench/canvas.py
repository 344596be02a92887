"""Data integration & interpretation: the block graph.

Blocks snapshot evidence with a provenance stamp and an abstraction level
(0 raw quote/datum, 1 per-row view, 2 aggregate). Links connect blocks or
sub-regions of blocks (text ranges, chart elements, table cells); chains are
emergent paths over links. Unwinding walks an aggregate mark's lineage one
level down and suggests blocks the user may accept onto the canvas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import analytics
from .canonical import content_hash
from .errors import (
    AnchorError,
    NoLineageError,
    NotFoundError,
    ValidationError,
    WorkbenchError,
)
from .foraging import ExtractPayload
from .model import (
    Anchor,
    Block,
    BlockKind,
    CellOutput,
    ChartSpec,
    Link,
    OriginDescriptor,
    OutputKind,
    Project,
    ProvenanceStamp,
    Region,
    SourceKind,
    SyncMode,
    Table,
)

# outputs of a pure notebook evaluation, keyed by cell id
OutputsMap = dict[str, list[CellOutput]]

DEFAULT_BLOCK_SIZE = (240.0, 160.0)
MAX_CHAIN_DEPTH = 8


def payload_hash(payload: Any) -> str:
    if isinstance(payload, (Table, ChartSpec)):
        return content_hash(payload.to_json())
    return content_hash(payload)


def level_for_table(table: Table) -> int:
    return 2 if table.lineage is not None else 1


def assemble_provenance(project: Project, meta: dict[str, Any] | None,
                        default_pipeline: list[str],
                        fallback_names: list[str] | None = None) -> ProvenanceStamp:
    """Walk a derived payload's meta back to its sources; origin comes from the
    first contributing source, names list all of them."""
    meta = meta or {}
    pipeline = list(meta.get("pipeline", default_pipeline))
    origin = OriginDescriptor()
    names: list[str] = list(meta.get("source_names", []))
    source_ids = list(meta.get("source_ids", []))
    if not source_ids and meta.get("table_id"):
        src = project.table_source(meta["table_id"])
        if src is not None:
            source_ids = [src.id]
    if source_ids:
        first = project.source_by_id(source_ids[0])
        if first is not None:
            origin = first.origin
        if not names:
            names = [s.name for sid in source_ids
                     if (s := project.source_by_id(sid)) is not None]
    if not names:
        names = list(fallback_names or [])
    return ProvenanceStamp(origin=origin, pipeline=pipeline, source_names=names)


# ---------------------------------------------------------------------------
# Block creation
# ---------------------------------------------------------------------------

def create_block_from_extract(project: Project, extract: ExtractPayload,
                              position: tuple[float, float],
                              sync_mode: SyncMode = SyncMode.snapshot,
                              size: tuple[float, float] | None = None) -> Block:
    kind = BlockKind(extract.kind)
    if kind is BlockKind.table_slice:
        payload: Any = extract.content
        pipeline = list((extract.content.meta or {}).get("pipeline", ["import"]))
        level = 1
    else:
        payload = extract.content
        pipeline = ["import"]
        level = 0
    block = Block(
        id=project.new_id("blk"), kind=kind, payload=payload,
        source_ref=extract.source_ref,
        provenance=ProvenanceStamp(origin=extract.origin, pipeline=pipeline,
                                   source_names=[extract.source_name]),
        abstraction_level=level,
        position=position, size=size or DEFAULT_BLOCK_SIZE,
        sync_mode=sync_mode, stale=False,
        upstream_hash=payload_hash(payload),
    )
    project.canvas.blocks.append(block)
    return block


def create_block_from_cell_output(project: Project, cell_id: str, output_index: int,
                                  position: tuple[float, float],
                                  sync_mode: SyncMode = SyncMode.snapshot,
                                  size: tuple[float, float] | None = None) -> Block:
    cell = project.notebook.cell_by_id(cell_id)
    if cell is None:
        raise NotFoundError(f"unknown cell {cell_id}", entity_id=cell_id)
    if output_index < 0 or output_index >= len(cell.outputs):
        raise NotFoundError(f"cell {cell_id} has no output #{output_index}",
                            entity_id=cell_id)
    output = cell.outputs[output_index]
    if output.kind is OutputKind.error:
        raise ValidationError("cannot place an error output on the canvas")

    if output.kind is OutputKind.chart:
        kind, level = BlockKind.chart, output.payload.abstraction_level
        stamp = assemble_provenance(project, output.payload.meta, ["cell"])
        payload = output.payload
    elif output.kind is OutputKind.table:
        kind, level = BlockKind.table_slice, level_for_table(output.payload)
        stamp = assemble_provenance(project, output.payload.meta, ["cell"])
        payload = output.payload
    else:
        kind, level = BlockKind.datapoint, 0
        meta = getattr(output.payload, "meta", None)
        stamp = assemble_provenance(project, meta, ["cell"])
        payload = {"value": dict(output.payload) if isinstance(output.payload, dict)
                   else output.payload}

    block = Block(
        id=project.new_id("blk"), kind=kind, payload=payload,
        source_ref={"component": "notebook", "cell_id": cell_id,
                    "output_index": output_index},
        provenance=stamp, abstraction_level=level,
        position=position, size=size or DEFAULT_BLOCK_SIZE,
        sync_mode=sync_mode, stale=False,
        upstream_hash=payload_hash(payload),
    )
    project.canvas.blocks.append(block)
    return block


def create_note_block(project: Project, text: str, position: tuple[float, float],
                      size: tuple[float, float] | None = None) -> Block:
    block = Block(
        id=project.new_id("blk"), kind=BlockKind.note, payload={"text": text},
        source_ref={"component": "note"},
        provenance=ProvenanceStamp(origin=OriginDescriptor(), pipeline=["note"],
                                   source_names=[]),
        abstraction_level=0,
        position=position, size=size or DEFAULT_BLOCK_SIZE,
        sync_mode=SyncMode.snapshot, stale=False,
        upstream_hash=content_hash({"text": text}),
    )
    project.canvas.blocks.append(block)
    return block


# ---------------------------------------------------------------------------
# Geometry / regions
# ---------------------------------------------------------------------------

def _require_block(project: Project, block_id: str) -> Block:
    block = project.canvas.block_by_id(block_id)
    if block is None:
        raise NotFoundError(f"unknown block {block_id}", entity_id=block_id)
    return block


def move_block(project: Project, block_id: str, position: tuple[float, float]) -> Block:
    block = _require_block(project, block_id)
    block.position = (float(position[0]), float(position[1]))
    return block


def resize_block(project: Project, block_id: str, size: tuple[float, float]) -> Block:
    block = _require_block(project, block_id)
    if size[0] <= 0 or size[1] <= 0:
        raise ValidationError(f"block size must be positive, got {size}")
    block.size = (float(size[0]), float(size[1]))
    return block


def create_region(project: Project, name: str,
                  bounds: tuple[float, float, float, float]) -> Region:
    if bounds[2] <= 0 or bounds[3] <= 0:
        raise ValidationError(f"region bounds need positive area, got {bounds}")
    region = Region(id=project.new_id("rgn"), name=name,
                    bounds=(float(bounds[0]), float(bounds[1]),
                            float(bounds[2]), float(bounds[3])))
    project.canvas.regions.append(region)
    return region


def assign_to_region(project: Project, block_id: str, region_id: str) -> Region:
    _require_block(project, block_id)
    region = project.canvas.region_by_id(region_id)
    if region is None:
        raise NotFoundError(f"unknown region {region_id}", entity_id=region_id)
    current = project.canvas.region_of(block_id)
    if current is not None:
        current.members.remove(block_id)
    region.members.append(block_id)
    return region


# ---------------------------------------------------------------------------
# Anchors and links
# ---------------------------------------------------------------------------

def anchor_resolves(project: Project, anchor: Anchor) -> bool:
    block = project.canvas.block_by_id(anchor.block_id)
    if block is None:
        return False
    sub = anchor.subregion
    if sub is None:
        return True
    if "element_id" in sub:
        return (isinstance(block.payload, ChartSpec)
                and block.payload.mark_by_element(sub["element_id"]) is not None)
    if "text_range" in sub:
        if not (isinstance(block.payload, dict) and "text" in block.payload):
            return False
        start, end = sub["text_range"]
        return 0 <= start < end <= len(block.payload["text"])
    if "cell" in sub:
        if not isinstance(block.payload, Table):
            return False
        row_id, column = sub["cell"]
        return row_id in block.payload.row_ids and block.payload.column(column) is not None
    return False


def create_link(project: Project, from_anchor: Anchor, to_anchor: Anchor,
                label: str | None = None) -> Link:
    for anchor in (from_anchor, to_anchor):
        _require_block(project, anchor.block_id)
    if from_anchor.block_id == to_anchor.block_id:
        raise ValidationError("self-links are not allowed")
    for anchor in (from_anchor, to_anchor):
        if not anchor_resolves(project, anchor):
            raise AnchorError(f"anchor does not resolve: {anchor.to_json()}")
    link = Link(id=project.new_id("lnk"), from_anchor=from_anchor,
                to_anchor=to_anchor, label=label)
    project.canvas.links.append(link)
    return link


@dataclass
class UndoEntry:
    block: Block
    block_index: int
    links: list[tuple[int, Link]] = field(default_factory=list)
    membership: tuple[str, int] | None = None  # (region_id, index)


def delete_block(project: Project, block_id: str,
                 undo_log: list[UndoEntry] | None = None) -> list[str]:
    """Removes the block, cascades incident links, prunes region membership.
    Returns all removed ids; the undo entry restores original list positions."""
    block = _require_block(project, block_id)
    canvas = project.canvas
    entry = UndoEntry(block=block, block_index=canvas.blocks.index(block))

    incident = [
        (i, link) for i, link in enumerate(canvas.links)
        if block_id in (link.from_anchor.block_id, link.to_anchor.block_id)
    ]
    entry.links = incident
    region = canvas.region_of(block_id)
    if region is not None:
        entry.membership = (region.id, region.members.index(block_id))
        region.members.remove(block_id)

    canvas.blocks.remove(block)
    for _, link in incident:
        canvas.links.remove(link)
    if undo_log is not None:
        undo_log.append(entry)
    return [block_id] + [link.id for _, link in incident]


def undo_delete(project: Project, entry: UndoEntry) -> list[str]:
    canvas = project.canvas
    canvas.blocks.insert(entry.block_index, entry.block)
    for index, link in entry.links:
        canvas.links.insert(index, link)
    if entry.membership is not None:
        region_id, index = entry.membership
        region = canvas.region_by_id(region_id)
        if region is not None:
            region.members.insert(index, entry.block.id)
    return [entry.block.id] + [link.id for _, link in entry.links]


def chain_paths(project: Project, block_id: str,
                max_depth: int = MAX_CHAIN_DEPTH) -> list[list[Link]]:
    """All maximal simple directed paths starting at the block, depth-limited;
    traversal order follows link creation order (ids are allocation-ordered)."""
    _require_block(project, block_id)
    outgoing: dict[str, list[Link]] = {}
    for link in sorted(project.canvas.links, key=lambda l: l.id):
        outgoing.setdefault(link.from_anchor.block_id, []).append(link)

    paths: list[list[Link]] = []

    def walk(current: str, visited: set[str], path: list[Link]) -> None:
        extended = False
        if len(path) < max_depth:
            for link in outgoing.get(current, []):
                nxt = link.to_anchor.block_id
                if nxt in visited:
                    continue
                extended = True
                walk(nxt, visited | {nxt}, path + [link])
        if not extended and path:
            paths.append(path)

    walk(block_id, {block_id}, [])
    return paths


def path_block_ids(path: list[Link]) -> list[str]:
    if not path:
        return []
    return [path[0].from_anchor.block_id] + [link.to_anchor.block_id for link in path]


# ---------------------------------------------------------------------------
# Unwinding (level-by-level descent)
# ---------------------------------------------------------------------------

@dataclass
class UnwindResult:
    suggestions: list[dict[str, Any]]
    flag: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {"suggestions": self.suggestions, "flag": self.flag}


def _descriptor(kind: BlockKind, level: int, source_ref: dict[str, Any],
                stamp: ProvenanceStamp, preview: Any, title: str,
                parent: Anchor) -> dict[str, Any]:
    return {
        "kind": kind.value,
        "abstraction_level": level,
        "source_ref": source_ref,
        "provenance": stamp.to_json(),
        "preview": preview,
        "title": title,
        "parent_anchor": parent.to_json(),
    }


def _quote_descriptors(project: Project, participants: list[str],
                       parent_stamp: ProvenanceStamp, parent: Anchor) -> list[dict[str, Any]]:
    """That participant's documents and their annotations, as level-0 quotes."""
    out: list[dict[str, Any]] = []
    for src in project.data_sources:
        if src.kind is not SourceKind.text or src.origin.participant not in participants:
            continue
        doc = src.payload
        annotations = sorted(
            (a for a in project.annotations if a.document_id == doc.id),
            key=lambda a: a.span[0])
        stamp = ProvenanceStamp(origin=src.origin,
                                pipeline=parent_stamp.pipeline + ["unwind"],
                                source_names=[src.name])
        if annotations:
            for ann in annotations:
                start, end = ann.span
                out.append(_descriptor(
                    BlockKind.quote, 0,
                    {"component": "foraging", "source_id": src.id,
                     "selection": {"document_id": doc.id, "span": [start, end]}},
                    stamp, {"text": doc.content[start:end], "note": ann.note},
                    f"quote from {src.name}", parent))
        elif doc.length > 0:
            out.append(_descriptor(
                BlockKind.quote, 0,
                {"component": "foraging", "source_id": src.id,
                 "selection": {"document_id": doc.id, "span": [0, doc.length]}},
                stamp, {"text": doc.content[:120]}, f"document {src.name}", parent))
    return out


def _token_quote_descriptors(project: Project, refs: list[tuple[str, str]],
                             parent_stamp: ProvenanceStamp,
                             parent: Anchor) -> list[dict[str, Any]]:
    out: list[dict[str, Any]] = []
    for doc_id, token in refs:
        src = project.document_source(doc_id)
        if src is None:
            continue
        doc = src.payload
        stamp = ProvenanceStamp(origin=src.origin,
                                pipeline=parent_stamp.pipeline + ["unwind"],
                                source_names=[src.name])
        for start, end in analytics.token_spans(doc.content, token):
            out.append(_descriptor(
                BlockKind.quote, 0,
                {"component": "foraging", "source_id": src.id,
                 "selection": {"document_id": doc.id, "span": [start, end]}},
                stamp, {"text": doc.content[start:end], "token": token},
                f"{token!r} in {src.name}", parent))
    return out


def _anchor_lineage(project: Project, block: Block,
                    anchor: Anchor) -> tuple[list[tuple[str, str]], int]:
    """Lineage refs plus the anchor's abstraction level."""
    sub = anchor.subregion or {}
    if isinstance(block.payload, ChartSpec):
        if "element_id" not in sub:
            raise AnchorError("unwinding a chart needs an element_id anchor")
        mark = block.payload.mark_by_element(sub["element_id"])
        if mark is None:
            raise AnchorError(f"no chart element {sub['element_id']}")
        if not mark.lineage:
            raise NoLineageError(f"mark {mark.element_id} has no lineage")
        return list(mark.lineage), block.payload.abstraction_level
    if isinstance(block.payload, Table):
        row_id = sub["cell"][0] if "cell" in sub else sub.get("row_id")
        if row_id is None or row_id not in block.payload.row_ids:
            raise AnchorError("unwinding a table needs a resolvable row anchor")
        index = block.payload.row_ids.index(row_id)
        if block.payload.lineage is not None:
            refs = list(block.payload.lineage[index])
        else:
            refs = [(analytics.root_table_id(block.payload), row_id)]
        if not refs:
            raise NoLineageError(f"row {row_id} has no lineage")
        return refs, block.abstraction_level
    raise NoLineageError(f"block {block.id} ({block.kind.value}) carries no lineage")


def unwind(project: Project, anchor: Anchor) -> UnwindResult:
    """Deterministic suggestions one abstraction level down from the anchored
    mark or aggregate row; descriptors become blocks only on user acceptance."""
    block = _require_block(project, anchor.block_id)
    refs, level = _anchor_lineage(project, block, anchor)
    stamp = block.provenance

    doc_refs = [r for r in refs if project.document_source(r[0]) is not None]
    if doc_refs:
        return UnwindResult(suggestions=_token_quote_descriptors(
            project, doc_refs, stamp, anchor))

    table_ids = sorted({sid for sid, _ in refs})
    src = project.table_source(table_ids[0]) if table_ids else None
    if src is None:
        raise NoLineageError("lineage rows reference no live table")
    table: Table = src.payload
    row_ids = sorted({rid for _, rid in refs})
    live_rows = [r for r in row_ids if r in table.row_ids]

    if level >= 2:
        meta = block.payload.meta if isinstance(block.payload, (ChartSpec, Table)) else {}
        value_column = (meta or {}).get("value_column")
        suggestions: list[dict[str, Any]] = []
        if value_column is not None and table.column(value_column) is not None:
            values = [table.row_by_id(r).get(value_column) for r in live_rows]  # type: ignore[union-attr]
            integral = all(
                v is None or (isinstance(v, (int, float)) and float(v) == int(v))
                for v in values)
            bins: int | str = "integer" if integral else 10
            child_stamp = ProvenanceStamp(origin=src.origin,
                                          pipeline=stamp.pipeline + ["unwind"],
                                          source_names=[src.name])
            suggestions.append(_descriptor(
                BlockKind.chart, 1,
                {"component": "foraging", "source_id": src.id,
                 "selection": {"table_id": table.id, "row_ids": live_rows,
                               "column": value_column, "chart": "histogram",
                               "bins": bins}},
                child_stamp,
                {"rows": len(live_rows), "column": value_column},
                f"distribution of {value_column}", anchor))
        child_stamp = ProvenanceStamp(origin=src.origin,
                                      pipeline=stamp.pipeline + ["unwind"],
                                      source_names=[src.name])
        suggestions.append(_descriptor(
            BlockKind.table_slice, 1,
            {"component": "foraging", "source_id": src.id,
             "selection": {"table_id": table.id, "row_ids": live_rows}},
            child_stamp, {"rows": len(live_rows)},
            "rows behind this mark", anchor))
        return UnwindResult(suggestions=suggestions)

    # level 1: join lineage rows to text documents on the project join key
    join_key = project.join_key
    if table.column(join_key) is None:
        return UnwindResult(suggestions=[], flag="join_key_missing")
    participants = sorted({
        str(row[join_key])
        for r in live_rows
        if (row := table.row_by_id(r)) is not None and row.get(join_key) is not None
    })
    quotes = _quote_descriptors(project, participants, stamp, anchor)
    if not quotes:
        return UnwindResult(suggestions=[], flag="no_documents_for_participants")
    return UnwindResult(suggestions=quotes)


def create_block_from_descriptor(project: Project, descriptor: dict[str, Any],
                                 position: tuple[float, float],
                                 sync_mode: SyncMode = SyncMode.snapshot,
                                 size: tuple[float, float] | None = None,
                                 link_to_parent: bool = True,
                                 ) -> tuple[Block, Link | None]:
    """Materialize an accepted unwind suggestion; links it under its parent
    anchor so the chain emerges from acceptance."""
    kind = BlockKind(descriptor["kind"])
    source_ref = descriptor["source_ref"]
    block_id = project.new_id("blk")
    payload = recompute_payload(project, source_ref, {}, owner=block_id)
    if payload is None:
        raise NotFoundError("descriptor source no longer resolves")
    block = Block(
        id=block_id, kind=kind, payload=payload,
        source_ref=source_ref,
        provenance=ProvenanceStamp.from_json(descriptor["provenance"]),
        abstraction_level=descriptor["abstraction_level"],
        position=position, size=size or DEFAULT_BLOCK_SIZE,
        sync_mode=sync_mode, stale=False,
        upstream_hash=payload_hash(payload),
    )
    project.canvas.blocks.append(block)

    link = None
    parent = descriptor.get("parent_anchor")
    if link_to_parent and parent is not None:
        parent_anchor = Anchor.from_json(parent)
        if anchor_resolves(project, parent_anchor):
            link = create_link(project, parent_anchor, Anchor(block_id=block.id),
                               label="unwind")
    return block, link


# ---------------------------------------------------------------------------
# Sync (live vs snapshot) on upstream change
# ---------------------------------------------------------------------------

def recompute_payload(project: Project, source_ref: dict[str, Any],
                      outputs_map: OutputsMap, owner: str = "adhoc") -> Any:
    """What the block's payload would be if refreshed now; None when the
    source no longer resolves."""
    component = source_ref.get("component")
    if component == "note":
        return None  # notes have no upstream

    if component == "notebook":
        outputs = outputs_map.get(source_ref["cell_id"])
        if outputs is None:
            return None
        index = source_ref["output_index"]
        if index >= len(outputs):
            return None
        output = outputs[index]
        if output.kind is OutputKind.error:
            return None
        if output.kind is OutputKind.value:
            return {"value": dict(output.payload) if isinstance(output.payload, dict)
                    else output.payload}
        return output.payload

    if component != "foraging":
        return None
    selection = source_ref.get("selection", {})

    if "document_id" in selection:
        src = project.document_source(selection["document_id"])
        if src is None:
            return None
        doc = src.payload
        start, end = selection["span"]
        if not (0 <= start < end <= doc.length):
            return None
        return {"document_id": doc.id, "span": [start, end],
                "text": doc.content[start:end]}

    if "table_id" in selection:
        src = project.table_source(selection["table_id"])
        if src is None:
            return None
        table: Table = src.payload
        if "row_id" in selection and "column" in selection:
            row = table.row_by_id(selection["row_id"])
            if row is None or table.column(selection["column"]) is None:
                return None
            return {"table_id": table.id, "row_id": selection["row_id"],
                    "column": selection["column"],
                    "value": row.get(selection["column"])}
        row_ids = [r for r in selection.get("row_ids", []) if r in table.row_ids]
        if not row_ids:
            return None
        sub = Table(
            id=f"{table.id}:slice", columns=list(table.columns),
            rows=[dict(table.row_by_id(r)) for r in row_ids],  # type: ignore[arg-type]
            row_ids=row_ids,
            meta={"table_id": table.id, "pipeline": ["import", "slice"]},
        )
        if selection.get("chart") == "histogram":
            column = selection["column"]
            if sub.column(column) is None:
                return None
            try:
                return analytics.histogram(sub, column, selection.get("bins", 10),
                                           owner=owner)
            except WorkbenchError:
                return None
        return sub
    return None


@dataclass
class SyncReport:
    refreshed: list[str] = field(default_factory=list)      # live payload replaced
    stale_changed: list[str] = field(default_factory=list)  # snapshot flag flipped
    dangling_changed: list[str] = field(default_factory=list)


def sync_blocks(project: Project, outputs_map: OutputsMap) -> SyncReport:
    """Apply the sync dichotomy to every block: live blocks re-materialize from
    their source, snapshot blocks keep their payload and flag staleness by
    upstream-hash comparison. Anchors to vanished marks are flagged dangling,
    never deleted."""
    report = SyncReport()
    for block in project.canvas.blocks:
        if block.kind is BlockKind.note:
            continue
        fresh = recompute_payload(project, block.source_ref, outputs_map,
                                  owner=block.id)
        if fresh is None:
            if block.sync_mode is SyncMode.snapshot and not block.stale:
                block.stale = True
                report.stale_changed.append(block.id)
            continue
        fresh_hash = payload_hash(fresh)
        if block.sync_mode is SyncMode.live:
            if fresh_hash != block.upstream_hash:
                block.payload = fresh
                block.upstream_hash = fresh_hash
                report.refreshed.append(block.id)
        else:
            new_stale = fresh_hash != block.upstream_hash
            if new_stale != block.stale:
                block.stale = new_stale
                report.stale_changed.append(block.id)

    for link in project.canvas.links:
        for attr, anchor in (("dangling_from", link.from_anchor),
                             ("dangling_to", link.to_anchor)):
            dangling = not anchor_resolves(project, anchor)
            if dangling != getattr(link, attr):
                setattr(link, attr, dangling)
                if link.id not in report.dangling_changed:
                    report.dangling_changed.append(link.id)
    return report


def refresh_snapshot_block(project: Project, block_id: str,
                           outputs_map: OutputsMap) -> Block:
    """One-click refresh: re-materialize a snapshot block and clear staleness."""
    block = _require_block(project, block_id)
    fresh = recompute_payload(project, block.source_ref, outputs_map, owner=block.id)
    if fresh is None:
        raise NotFoundError(f"block {block_id} source no longer resolves",
                            entity_id=block_id)
    block.payload = fresh
    block.upstream_hash = payload_hash(fresh)
    block.stale = False
    return block


def get_provenance(project: Project, block_id: str) -> ProvenanceStamp:
    return _require_block(project, block_id).provenance
