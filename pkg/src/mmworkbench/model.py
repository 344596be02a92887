"""Project data model: domain types, canonical (de)serialization, validation.

A Project is the shared variable space all three workbench components read
and write: raw sources + codebook + annotations (foraging), the notebook
(aggregation), and the canvas (integration). Offsets throughout are Unicode
scalar values, never bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any
from uuid import uuid4

from .canonical import canonical_bytes, canonical_loads, content_hash
from .errors import IntegrityError, VersionError

SCHEMA_VERSION = 1

LineageRef = tuple[str, str]  # (source id, row_id or token)


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def iso(dt: datetime) -> str:
    return dt.isoformat()


def parse_ts(value: str) -> datetime:
    # 3.10 fromisoformat rejects the Z suffix
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


class OriginMethod(str, Enum):
    interview = "interview"
    focus_group = "focus_group"
    survey = "survey"
    log = "log"
    other = "other"

    @classmethod
    def coerce(cls, value: str | None) -> "OriginMethod":
        """Unknown collection methods map to `other` (closed enum)."""
        try:
            return cls(value)
        except ValueError:
            return cls.other


ICON_KEYS = {
    OriginMethod.interview: "mic",
    OriginMethod.focus_group: "group",
    OriginMethod.survey: "clipboard",
    OriginMethod.log: "terminal",
    OriginMethod.other: "file",
}


class SourceKind(str, Enum):
    text = "text"
    table = "table"


class Dtype(str, Enum):
    string = "string"
    int = "int"
    float = "float"
    bool = "bool"
    datetime = "datetime"


class CellKind(str, Enum):
    code = "code"
    markdown = "markdown"


class OutputKind(str, Enum):
    value = "value"
    table = "table"
    chart = "chart"
    error = "error"


class ChartKind(str, Enum):
    scatter = "scatter"
    histogram = "histogram"
    bar = "bar"
    wordcloud = "wordcloud"


class BlockKind(str, Enum):
    quote = "quote"
    table_slice = "table_slice"
    datapoint = "datapoint"
    chart = "chart"
    note = "note"


class SyncMode(str, Enum):
    live = "live"
    snapshot = "snapshot"


@dataclass
class OriginDescriptor:
    method: OriginMethod = OriginMethod.other
    participant: str | None = None
    collected_at: datetime | None = None
    note: str | None = None

    @property
    def icon_key(self) -> str:
        return ICON_KEYS[self.method]

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "participant": self.participant,
            "collected_at": iso(self.collected_at) if self.collected_at else None,
            "note": self.note,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "OriginDescriptor":
        return cls(
            method=OriginMethod.coerce(data.get("method")),
            participant=data.get("participant"),
            collected_at=parse_ts(data["collected_at"]) if data.get("collected_at") else None,
            note=data.get("note"),
        )


@dataclass
class TextDocument:
    id: str
    content: str

    @property
    def length(self) -> int:
        return len(self.content)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "content": self.content, "length": self.length}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TextDocument":
        doc = cls(id=data["id"], content=data["content"])
        if data.get("length") != doc.length:
            raise IntegrityError(
                f"document {doc.id}: stored length {data.get('length')} != measured {doc.length}",
                entity_id=doc.id,
            )
        return doc


@dataclass
class Column:
    name: str
    dtype: Dtype

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "dtype": self.dtype.value}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Column":
        return cls(name=data["name"], dtype=Dtype(data["dtype"]))


def _cell_to_json(value: Any) -> Any:
    if isinstance(value, datetime):
        return iso(value)
    return value


def _cell_from_json(value: Any, dtype: Dtype) -> Any:
    if value is None:
        return None
    if dtype is Dtype.datetime:
        return datetime.fromisoformat(value)
    return value


def cell_conforms(value: Any, dtype: Dtype) -> bool:
    if value is None:
        return True
    if dtype is Dtype.int:
        return isinstance(value, int) and not isinstance(value, bool)
    if dtype is Dtype.float:
        return isinstance(value, float)
    if dtype is Dtype.bool:
        return isinstance(value, bool)
    if dtype is Dtype.string:
        return isinstance(value, str)
    if dtype is Dtype.datetime:
        return isinstance(value, datetime) and value.tzinfo is None
    return False


@dataclass
class Table:
    """Tabular payload. row_ids are assigned at import and survive every view,
    sort, and slice; per-row lineage is present only on derived aggregates."""

    id: str
    columns: list[Column]
    rows: list[dict[str, Any]]
    row_ids: list[str]
    lineage: list[list[LineageRef]] | None = None
    meta: dict[str, Any] | None = None

    def column(self, name: str) -> Column | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def row_by_id(self, row_id: str) -> dict[str, Any] | None:
        try:
            return self.rows[self.row_ids.index(row_id)]
        except ValueError:
            return None

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "columns": [c.to_json() for c in self.columns],
            "rows": [
                {name: _cell_to_json(row.get(name)) for name in self.column_names()}
                for row in self.rows
            ],
            "row_ids": list(self.row_ids),
            "lineage": (
                [[list(ref) for ref in refs] for refs in self.lineage]
                if self.lineage is not None else None
            ),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Table":
        columns = [Column.from_json(c) for c in data["columns"]]
        dtypes = {c.name: c.dtype for c in columns}
        rows = [
            {name: _cell_from_json(row.get(name), dtypes[name]) for name in dtypes}
            for row in data["rows"]
        ]
        lineage = data.get("lineage")
        if lineage is not None:
            lineage = [[(ref[0], ref[1]) for ref in refs] for refs in lineage]
        return cls(
            id=data["id"], columns=columns, rows=rows,
            row_ids=list(data["row_ids"]), lineage=lineage, meta=data.get("meta"),
        )


@dataclass
class DataSource:
    id: str
    kind: SourceKind
    name: str
    origin: OriginDescriptor
    payload: TextDocument | Table

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "name": self.name,
            "origin": self.origin.to_json(),
            "payload": self.payload.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "DataSource":
        kind = SourceKind(data["kind"])
        payload: TextDocument | Table
        if kind is SourceKind.text:
            payload = TextDocument.from_json(data["payload"])
        else:
            payload = Table.from_json(data["payload"])
        return cls(
            id=data["id"], kind=kind, name=data["name"],
            origin=OriginDescriptor.from_json(data["origin"]), payload=payload,
        )


@dataclass
class Code:
    id: str
    label: str
    color: str
    description: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "label": self.label, "color": self.color,
                "description": self.description}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Code":
        return cls(id=data["id"], label=data["label"], color=data["color"],
                   description=data.get("description"))


@dataclass
class Annotation:
    id: str
    document_id: str
    span: tuple[int, int]
    code_ids: list[str]
    note: str
    author: str
    created_at: datetime

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "document_id": self.document_id,
            "span": [self.span[0], self.span[1]],
            "code_ids": list(self.code_ids),
            "note": self.note,
            "author": self.author,
            "created_at": iso(self.created_at),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Annotation":
        return cls(
            id=data["id"], document_id=data["document_id"],
            span=(data["span"][0], data["span"][1]),
            code_ids=list(data["code_ids"]), note=data["note"],
            author=data["author"], created_at=parse_ts(data["created_at"]),
        )


@dataclass
class Mark:
    """One addressable chart element. element_id is a digest of the producing
    cell, chart kind, and mark key, so identical inputs -> identical ids."""

    element_id: str
    key: str
    value: dict[str, Any]
    lineage: list[LineageRef]

    def to_json(self) -> dict[str, Any]:
        return {
            "element_id": self.element_id,
            "key": self.key,
            "value": self.value,
            "lineage": [list(ref) for ref in self.lineage],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Mark":
        return cls(
            element_id=data["element_id"], key=data["key"], value=dict(data["value"]),
            lineage=[(ref[0], ref[1]) for ref in data["lineage"]],
        )


@dataclass
class ChartSpec:
    chart_kind: ChartKind
    marks: list[Mark]
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    meta: dict[str, Any] = field(default_factory=dict)
    source_cell: str | None = None
    abstraction_level: int = 1

    def mark_by_element(self, element_id: str) -> Mark | None:
        for mark in self.marks:
            if mark.element_id == element_id:
                return mark
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "chart_kind": self.chart_kind.value,
            "marks": [m.to_json() for m in self.marks],
            "x_label": self.x_label,
            "y_label": self.y_label,
            "title": self.title,
            "meta": self.meta,
            "source_cell": self.source_cell,
            "abstraction_level": self.abstraction_level,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ChartSpec":
        return cls(
            chart_kind=ChartKind(data["chart_kind"]),
            marks=[Mark.from_json(m) for m in data["marks"]],
            x_label=data.get("x_label", ""),
            y_label=data.get("y_label", ""),
            title=data.get("title", ""),
            meta=dict(data.get("meta", {})),
            source_cell=data.get("source_cell"),
            abstraction_level=data.get("abstraction_level", 1),
        )


@dataclass
class CellOutput:
    kind: OutputKind
    payload: Any  # JSON value, Table, ChartSpec, or error record
    produced_by: str

    def to_json(self) -> dict[str, Any]:
        if self.kind is OutputKind.table:
            payload = self.payload.to_json()
        elif self.kind is OutputKind.chart:
            payload = self.payload.to_json()
        else:
            payload = self.payload
        return {"kind": self.kind.value, "payload": payload, "produced_by": self.produced_by}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "CellOutput":
        kind = OutputKind(data["kind"])
        payload = data["payload"]
        if kind is OutputKind.table:
            payload = Table.from_json(payload)
        elif kind is OutputKind.chart:
            payload = ChartSpec.from_json(payload)
        return cls(kind=kind, payload=payload, produced_by=data["produced_by"])


@dataclass
class Cell:
    id: str
    kind: CellKind
    source: str
    outputs: list[CellOutput] = field(default_factory=list)
    execution_count: int | None = None

    @property
    def content_hash(self) -> str:
        return content_hash(self.source)

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "source": self.source,
            "outputs": [o.to_json() for o in self.outputs],
            "execution_count": self.execution_count,
            "content_hash": self.content_hash,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Cell":
        return cls(
            id=data["id"], kind=CellKind(data["kind"]), source=data["source"],
            outputs=[CellOutput.from_json(o) for o in data.get("outputs", [])],
            execution_count=data.get("execution_count"),
        )


@dataclass
class Notebook:
    cells: list[Cell] = field(default_factory=list)

    def cell_by_id(self, cell_id: str) -> Cell | None:
        for cell in self.cells:
            if cell.id == cell_id:
                return cell
        return None

    def to_json(self) -> dict[str, Any]:
        return {"cells": [c.to_json() for c in self.cells]}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Notebook":
        return cls(cells=[Cell.from_json(c) for c in data.get("cells", [])])


@dataclass
class ProvenanceStamp:
    origin: OriginDescriptor
    pipeline: list[str]
    source_names: list[str]

    @property
    def icon_key(self) -> str:
        return self.origin.icon_key

    def to_json(self) -> dict[str, Any]:
        return {
            "origin": self.origin.to_json(),
            "pipeline": list(self.pipeline),
            "source_names": list(self.source_names),
            "icon_key": self.icon_key,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ProvenanceStamp":
        return cls(
            origin=OriginDescriptor.from_json(data["origin"]),
            pipeline=list(data["pipeline"]),
            source_names=list(data["source_names"]),
        )


@dataclass
class Anchor:
    """Whole block, or a sub-region: {"text_range":[s,e]}, {"element_id": id},
    or {"cell":[row_id, column]}."""

    block_id: str
    subregion: dict[str, Any] | None = None

    def to_json(self) -> dict[str, Any]:
        return {"block_id": self.block_id, "subregion": self.subregion}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Anchor":
        return cls(block_id=data["block_id"], subregion=data.get("subregion"))


@dataclass
class Block:
    id: str
    kind: BlockKind
    payload: Any
    source_ref: dict[str, Any]
    provenance: ProvenanceStamp
    abstraction_level: int
    position: tuple[float, float]
    size: tuple[float, float]
    sync_mode: SyncMode
    stale: bool = False
    upstream_hash: str = ""

    def payload_json(self) -> Any:
        if isinstance(self.payload, (Table, ChartSpec)):
            return self.payload.to_json()
        return self.payload

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "payload": self.payload_json(),
            "source_ref": self.source_ref,
            "provenance": self.provenance.to_json(),
            "abstraction_level": self.abstraction_level,
            "position": [self.position[0], self.position[1]],
            "size": [self.size[0], self.size[1]],
            "sync_mode": self.sync_mode.value,
            "stale": self.stale,
            "upstream_hash": self.upstream_hash,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Block":
        kind = BlockKind(data["kind"])
        payload = data["payload"]
        if kind is BlockKind.chart:
            payload = ChartSpec.from_json(payload)
        elif kind is BlockKind.table_slice:
            payload = Table.from_json(payload)
        return cls(
            id=data["id"], kind=kind, payload=payload,
            source_ref=dict(data["source_ref"]),
            provenance=ProvenanceStamp.from_json(data["provenance"]),
            abstraction_level=data["abstraction_level"],
            position=(data["position"][0], data["position"][1]),
            size=(data["size"][0], data["size"][1]),
            sync_mode=SyncMode(data["sync_mode"]),
            stale=data.get("stale", False),
            upstream_hash=data.get("upstream_hash", ""),
        )


@dataclass
class Link:
    id: str
    from_anchor: Anchor
    to_anchor: Anchor
    label: str | None = None
    dangling_from: bool = False
    dangling_to: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "from": self.from_anchor.to_json(),
            "to": self.to_anchor.to_json(),
            "label": self.label,
            "dangling_from": self.dangling_from,
            "dangling_to": self.dangling_to,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Link":
        return cls(
            id=data["id"],
            from_anchor=Anchor.from_json(data["from"]),
            to_anchor=Anchor.from_json(data["to"]),
            label=data.get("label"),
            dangling_from=data.get("dangling_from", False),
            dangling_to=data.get("dangling_to", False),
        )


@dataclass
class Region:
    id: str
    name: str
    bounds: tuple[float, float, float, float]  # x, y, w, h
    members: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "name": self.name, "bounds": list(self.bounds),
                "members": list(self.members)}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Region":
        b = data["bounds"]
        return cls(id=data["id"], name=data["name"],
                   bounds=(b[0], b[1], b[2], b[3]), members=list(data["members"]))


@dataclass
class Canvas:
    blocks: list[Block] = field(default_factory=list)
    links: list[Link] = field(default_factory=list)
    regions: list[Region] = field(default_factory=list)

    def block_by_id(self, block_id: str) -> Block | None:
        for block in self.blocks:
            if block.id == block_id:
                return block
        return None

    def link_by_id(self, link_id: str) -> Link | None:
        for link in self.links:
            if link.id == link_id:
                return link
        return None

    def region_by_id(self, region_id: str) -> Region | None:
        for region in self.regions:
            if region.id == region_id:
                return region
        return None

    def region_of(self, block_id: str) -> Region | None:
        for region in self.regions:
            if block_id in region.members:
                return region
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "blocks": [b.to_json() for b in self.blocks],
            "links": [l.to_json() for l in self.links],
            "regions": [r.to_json() for r in self.regions],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Canvas":
        return cls(
            blocks=[Block.from_json(b) for b in data.get("blocks", [])],
            links=[Link.from_json(l) for l in data.get("links", [])],
            regions=[Region.from_json(r) for r in data.get("regions", [])],
        )


@dataclass
class Project:
    id: str
    name: str
    created_at: datetime
    modified_at: datetime
    data_sources: list[DataSource] = field(default_factory=list)
    codebook: list[Code] = field(default_factory=list)
    annotations: list[Annotation] = field(default_factory=list)
    notebook: Notebook = field(default_factory=Notebook)
    canvas: Canvas = field(default_factory=Canvas)
    join_key: str = "participant"  # row -> document bridge for unwinding
    next_id: int = 1
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def new(cls, name: str, project_id: str | None = None,
            created_at: datetime | None = None) -> "Project":
        now = created_at or utc_now()
        return cls(id=project_id or "prj-" + uuid4().hex[:12], name=name,
                   created_at=now, modified_at=now)

    def new_id(self, prefix: str) -> str:
        """Monotone, zero-padded: allocation order == lexicographic order."""
        value = f"{prefix}-{self.next_id:08d}"
        self.next_id += 1
        return value

    # -- lookups ------------------------------------------------------------

    def source_by_id(self, source_id: str) -> DataSource | None:
        for src in self.data_sources:
            if src.id == source_id:
                return src
        return None

    def document_source(self, document_id: str) -> DataSource | None:
        for src in self.data_sources:
            if src.kind is SourceKind.text and (
                    src.payload.id == document_id or src.id == document_id):
                return src
        return None

    def table_source(self, table_id: str) -> DataSource | None:
        for src in self.data_sources:
            if src.kind is SourceKind.table and (
                    src.payload.id == table_id or src.id == table_id):
                return src
        return None

    def code_by_id(self, code_id: str) -> Code | None:
        for code in self.codebook:
            if code.id == code_id:
                return code
        return None

    def code_by_label(self, label: str) -> Code | None:
        lowered = label.lower()
        for code in self.codebook:
            if code.label.lower() == lowered:
                return code
        return None

    def annotation_by_id(self, annotation_id: str) -> Annotation | None:
        for ann in self.annotations:
            if ann.id == annotation_id:
                return ann
        return None

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "id": self.id,
            "name": self.name,
            "created_at": iso(self.created_at),
            "modified_at": iso(self.modified_at),
            "join_key": self.join_key,
            "next_id": self.next_id,
            "data_sources": [s.to_json() for s in self.data_sources],
            "codebook": [c.to_json() for c in self.codebook],
            "annotations": [a.to_json() for a in self.annotations],
            "notebook": self.notebook.to_json(),
            "canvas": self.canvas.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Project":
        return cls(
            id=data["id"], name=data["name"],
            created_at=parse_ts(data["created_at"]),
            modified_at=parse_ts(data["modified_at"]),
            data_sources=[DataSource.from_json(s) for s in data.get("data_sources", [])],
            codebook=[Code.from_json(c) for c in data.get("codebook", [])],
            annotations=[Annotation.from_json(a) for a in data.get("annotations", [])],
            notebook=Notebook.from_json(data.get("notebook", {})),
            canvas=Canvas.from_json(data.get("canvas", {})),
            join_key=data.get("join_key", "participant"),
            next_id=data.get("next_id", 1),
            schema_version=data["schema_version"],
        )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_project(project: Project) -> None:
    """Re-check every cross-reference and structural invariant; raises
    IntegrityError naming the offending entity."""
    seen_ids: set[str] = set()

    def claim(entity_id: str, what: str) -> None:
        if entity_id in seen_ids:
            raise IntegrityError(f"duplicate id {entity_id} ({what})", entity_id=entity_id)
        seen_ids.add(entity_id)

    claim(project.id, "project")
    documents: dict[str, TextDocument] = {}
    tables: dict[str, Table] = {}

    for src in project.data_sources:
        claim(src.id, "data source")
        if src.kind is SourceKind.text:
            if not isinstance(src.payload, TextDocument):
                raise IntegrityError(f"source {src.id}: kind text with non-text payload",
                                     entity_id=src.id)
            claim(src.payload.id, "document")
            documents[src.payload.id] = src.payload
        else:
            if not isinstance(src.payload, Table):
                raise IntegrityError(f"source {src.id}: kind table with non-table payload",
                                     entity_id=src.id)
            claim(src.payload.id, "table")
            tables[src.payload.id] = src.payload
            _validate_table(src.payload)

    labels_seen: set[str] = set()
    for code in project.codebook:
        claim(code.id, "code")
        if not code.label:
            raise IntegrityError(f"code {code.id}: empty label", entity_id=code.id)
        lowered = code.label.lower()
        if lowered in labels_seen:
            raise IntegrityError(f"code {code.id}: duplicate label {code.label!r}",
                                 entity_id=code.id)
        labels_seen.add(lowered)

    code_ids = {c.id for c in project.codebook}
    for ann in project.annotations:
        claim(ann.id, "annotation")
        doc = documents.get(ann.document_id)
        if doc is None:
            raise IntegrityError(
                f"annotation {ann.id}: unknown document {ann.document_id}", entity_id=ann.id)
        start, end = ann.span
        if not (0 <= start < end <= doc.length):
            raise IntegrityError(
                f"annotation {ann.id}: span ({start},{end}) outside document "
                f"of length {doc.length}", entity_id=ann.id)
        for code_id in ann.code_ids:
            if code_id not in code_ids:
                raise IntegrityError(
                    f"annotation {ann.id}: unknown code {code_id}", entity_id=ann.id)

    for cell in project.notebook.cells:
        claim(cell.id, "cell")
        if cell.kind is CellKind.markdown and cell.outputs:
            raise IntegrityError(f"cell {cell.id}: markdown cell with outputs",
                                 entity_id=cell.id)
        for output in cell.outputs:
            if output.kind is OutputKind.chart:
                _validate_chart(output.payload, f"cell {cell.id} output")

    block_ids: set[str] = set()
    for block in project.canvas.blocks:
        claim(block.id, "block")
        block_ids.add(block.id)
        if block.sync_mode is SyncMode.live and block.stale:
            raise IntegrityError(f"block {block.id}: live block flagged stale",
                                 entity_id=block.id)
        if block.kind is BlockKind.chart:
            _validate_chart(block.payload, f"block {block.id}")

    for link in project.canvas.links:
        claim(link.id, "link")
        if link.from_anchor.block_id == link.to_anchor.block_id:
            raise IntegrityError(f"link {link.id}: self-link", entity_id=link.id)
        for anchor in (link.from_anchor, link.to_anchor):
            if anchor.block_id not in block_ids:
                raise IntegrityError(
                    f"link {link.id}: unknown block {anchor.block_id}", entity_id=link.id)

    membership: set[str] = set()
    for region in project.canvas.regions:
        claim(region.id, "region")
        for member in region.members:
            if member not in block_ids:
                raise IntegrityError(
                    f"region {region.id}: unknown block {member}", entity_id=region.id)
            if member in membership:
                raise IntegrityError(
                    f"region {region.id}: block {member} in more than one region",
                    entity_id=region.id)
            membership.add(member)


def _validate_table(table: Table) -> None:
    if len(table.row_ids) != len(table.rows):
        raise IntegrityError(f"table {table.id}: row_ids/rows length mismatch",
                             entity_id=table.id)
    if len(set(table.row_ids)) != len(table.row_ids):
        raise IntegrityError(f"table {table.id}: duplicate row_ids", entity_id=table.id)
    names = table.column_names()
    if len(set(names)) != len(names):
        raise IntegrityError(f"table {table.id}: duplicate column names", entity_id=table.id)
    for row_id, row in zip(table.row_ids, table.rows):
        for col in table.columns:
            if not cell_conforms(row.get(col.name), col.dtype):
                raise IntegrityError(
                    f"table {table.id} row {row_id}: value {row.get(col.name)!r} "
                    f"does not conform to {col.dtype.value}", entity_id=table.id)
    if table.lineage is not None and len(table.lineage) != len(table.rows):
        raise IntegrityError(f"table {table.id}: lineage/rows length mismatch",
                             entity_id=table.id)


def _validate_chart(chart: ChartSpec, where: str) -> None:
    seen: set[str] = set()
    for mark in chart.marks:
        if mark.element_id in seen:
            raise IntegrityError(f"{where}: duplicate element_id {mark.element_id}")
        seen.add(mark.element_id)
        # zero-statistic marks (empty histogram bins) legitimately carry no lineage
        count = mark.value.get("count")
        if not mark.lineage and (count is None or count != 0):
            raise IntegrityError(f"{where}: mark {mark.element_id} has empty lineage")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_project(project: Project) -> bytes:
    """Canonical form: UTF-8, sorted keys, no insignificant whitespace.
    Deterministic for equal projects."""
    validate_project(project)
    return canonical_bytes(project.to_json()) + b"\n"


def load_project(data: bytes | str) -> Project:
    try:
        raw = canonical_loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise IntegrityError(f"not a valid project stream: {exc}") from exc
    if not isinstance(raw, dict) or "schema_version" not in raw:
        raise IntegrityError("not a valid project stream: missing schema_version")
    version = raw["schema_version"]
    if not isinstance(version, int) or version > SCHEMA_VERSION:
        raise VersionError(f"schema_version {version} is newer than supported "
                           f"({SCHEMA_VERSION})")
    try:
        project = Project.from_json(raw)
    except IntegrityError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise IntegrityError(f"malformed project stream: {exc!r}") from exc
    validate_project(project)
    return project


def project_content_hash(project: Project) -> str:
    """Digest of everything except modified_at, for change detection."""
    data = project.to_json()
    data.pop("modified_at", None)
    return content_hash(data)
