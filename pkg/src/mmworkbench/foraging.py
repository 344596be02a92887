"""Data extraction & preparation: qualitative coding on documents, filter/sort
views over tables, and selection extraction for drag-to-canvas."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

from .errors import (
    ConflictError,
    NotFoundError,
    SpanError,
    TypeMismatchError,
    ValidationError,
)
from .model import (
    Annotation,
    Code,
    Dtype,
    OriginDescriptor,
    Project,
    SourceKind,
    Table,
    TextDocument,
    utc_now,
)

# 12 distinguishable hues; codes cycle through it by codebook size
PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
]

ORDERED_DTYPES = (Dtype.int, Dtype.float, Dtype.datetime)
COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=", "contains")


def create_code(project: Project, label: str, color: str | None = None,
                description: str | None = None) -> Code:
    if not label:
        raise ValidationError("code label must be non-empty")
    if project.code_by_label(label) is not None:
        raise ConflictError(f"code label {label!r} already exists (case-insensitive)")
    if color is None:
        color = PALETTE[len(project.codebook) % len(PALETTE)]
    code = Code(id=project.new_id("code"), label=label, color=color,
                description=description)
    project.codebook.append(code)
    return code


def suggest_codes(project: Project, prefix: str) -> list[Code]:
    lowered = prefix.lower()
    hits = [c for c in project.codebook if c.label.lower().startswith(lowered)]
    return sorted(hits, key=lambda c: (c.label.lower(), c.label))


def annotate(project: Project, document_id: str, span: tuple[int, int],
             code_ids: list[str], note: str, author: str,
             created_at: datetime | None = None) -> Annotation:
    """Overlapping annotations are permitted (standard in qualitative coding)."""
    source = project.document_source(document_id)
    if source is None:
        raise NotFoundError(f"unknown document {document_id}", entity_id=document_id)
    doc: TextDocument = source.payload
    start, end = span
    if start < 0 or start >= end or end > doc.length:
        raise SpanError(
            f"span ({start},{end}) invalid for document of length {doc.length}")
    for code_id in code_ids:
        if project.code_by_id(code_id) is None:
            raise NotFoundError(f"unknown code {code_id}", entity_id=code_id)
    annotation = Annotation(
        id=project.new_id("ann"), document_id=doc.id, span=(start, end),
        code_ids=list(code_ids), note=note, author=author,
        created_at=created_at or utc_now(),
    )
    project.annotations.append(annotation)
    return annotation


def query_annotations(project: Project, document_id: str | None = None,
                      code_id: str | None = None) -> list[Annotation]:
    hits = [
        a for a in project.annotations
        if (document_id is None or a.document_id == document_id)
        and (code_id is None or code_id in a.code_ids)
    ]
    return sorted(hits, key=lambda a: (a.document_id, a.span[0]))


# ---------------------------------------------------------------------------
# Table views
# ---------------------------------------------------------------------------

@dataclass
class Predicate:
    column: str
    op: str
    literal: Any

    def to_json(self) -> dict[str, Any]:
        return {"column": self.column, "op": self.op, "literal": self.literal}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Predicate":
        return cls(column=data["column"], op=data["op"], literal=data["literal"])


@dataclass
class TableView:
    table_id: str
    filters: list[Predicate] = field(default_factory=list)
    sorts: list[tuple[str, str]] = field(default_factory=list)  # (column, asc|desc)

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TableView":
        return cls(
            table_id=data["table_id"],
            filters=[Predicate.from_json(p) for p in data.get("filters", [])],
            sorts=[(s["column"], s["direction"]) for s in data.get("sorts", [])],
        )


def _check_predicate(table: Table, pred: Predicate) -> Dtype:
    col = table.column(pred.column)
    if col is None:
        raise ValidationError(f"unknown column {pred.column!r}")
    if pred.op not in COMPARISON_OPS:
        raise ValidationError(f"unknown operator {pred.op!r}")
    if pred.op == "contains":
        if col.dtype is not Dtype.string or not isinstance(pred.literal, str):
            raise TypeMismatchError(
                f"contains requires a string column and literal, got {col.dtype.value}")
    elif pred.op in ("<", "<=", ">", ">="):
        if col.dtype not in ORDERED_DTYPES:
            raise TypeMismatchError(
                f"ordering predicate on non-orderable column {pred.column!r} "
                f"({col.dtype.value})")
        _coerce_literal(col.dtype, pred.literal)
    else:
        _coerce_literal(col.dtype, pred.literal)
    return col.dtype


def _coerce_literal(dtype: Dtype, literal: Any) -> Any:
    if dtype in (Dtype.int, Dtype.float):
        if isinstance(literal, bool) or not isinstance(literal, (int, float)):
            raise TypeMismatchError(f"numeric column needs numeric literal, got {literal!r}")
        return literal
    if dtype is Dtype.bool:
        if not isinstance(literal, bool):
            raise TypeMismatchError(f"bool column needs bool literal, got {literal!r}")
        return literal
    if dtype is Dtype.datetime:
        parsed: datetime | None = literal if isinstance(literal, datetime) else None
        if parsed is None and isinstance(literal, str):
            try:
                parsed = datetime.fromisoformat(literal.replace("Z", "+00:00"))
            except ValueError:
                parsed = None
        if parsed is None:
            raise TypeMismatchError(f"datetime column needs ISO-8601 literal, got {literal!r}")
        if parsed.tzinfo is not None:
            parsed = parsed.astimezone(timezone.utc).replace(tzinfo=None)
        return parsed
    if not isinstance(literal, str):
        raise TypeMismatchError(f"string column needs string literal, got {literal!r}")
    return literal


def _matches(value: Any, op: str, literal: Any) -> bool:
    if value is None:
        return False  # nulls never satisfy a predicate
    if op == "==":
        return value == literal
    if op == "!=":
        return value != literal
    if op == "contains":
        return literal in value
    if op == "<":
        return value < literal
    if op == "<=":
        return value <= literal
    if op == ">":
        return value > literal
    if op == ">=":
        return value >= literal
    raise ValidationError(f"unknown operator {op!r}")


def _null_last_cmp(a: Any, b: Any, descending: bool) -> int:
    # nulls sort after non-nulls regardless of direction
    if a is None and b is None:
        return 0
    if a is None:
        return 1
    if b is None:
        return -1
    if a == b:
        return 0
    less = a < b
    if descending:
        return 1 if less else -1
    return -1 if less else 1


def apply_view_to_table(table: Table, filters: list[Predicate],
                        sorts: list[tuple[str, str]],
                        result_id: str | None = None) -> Table:
    """Conjunction of all predicates, then a stable multi-key sort where
    earlier keys dominate (applied last). Original row_ids survive, and any
    per-row lineage stays aligned."""
    coerced: list[tuple[Predicate, Any]] = []
    for pred in filters:
        dtype = _check_predicate(table, pred)
        literal = pred.literal
        if pred.op != "contains":
            literal = _coerce_literal(dtype, pred.literal)
        coerced.append((pred, literal))
    for column, direction in sorts:
        if table.column(column) is None:
            raise ValidationError(f"unknown sort column {column!r}")
        if direction not in ("asc", "desc"):
            raise ValidationError(f"sort direction must be asc or desc, got {direction!r}")

    lineage = table.lineage if table.lineage is not None else [None] * len(table.rows)
    kept = [
        (row, row_id, refs)
        for row, row_id, refs in zip(table.rows, table.row_ids, lineage)
        if all(_matches(row.get(p.column), p.op, lit) for p, lit in coerced)
    ]

    # later keys applied first so earlier keys dominate
    for column, direction in reversed(sorts):
        descending = direction == "desc"
        kept.sort(key=functools.cmp_to_key(
            lambda a, b, c=column, d=descending: _null_last_cmp(a[0].get(c), b[0].get(c), d)))

    meta = dict(table.meta or {})
    meta.setdefault("table_id", table.id)
    meta["pipeline"] = list(meta.get("pipeline", ["import"]))
    if filters:
        meta["pipeline"].append("filter")
    if sorts:
        meta["pipeline"].append("sort")
    return Table(
        id=result_id or f"{table.id}:view",
        columns=list(table.columns),
        rows=[dict(row) for row, _, _ in kept],
        row_ids=[row_id for _, row_id, _ in kept],
        lineage=(
            [list(refs) for _, _, refs in kept]  # type: ignore[misc]
            if table.lineage is not None else None),
        meta=meta,
    )


def apply_table_view(project: Project, view: TableView) -> Table:
    source = project.table_source(view.table_id)
    if source is None:
        raise NotFoundError(f"unknown table {view.table_id}", entity_id=view.table_id)
    return apply_view_to_table(source.payload, view.filters, view.sorts)


# ---------------------------------------------------------------------------
# Extraction (drag payloads)
# ---------------------------------------------------------------------------

@dataclass
class ExtractPayload:
    kind: str  # quote | table_slice | datapoint
    content: Any
    source_ref: dict[str, Any]
    origin: OriginDescriptor
    source_name: str


def make_extract(project: Project, selection: dict[str, Any]) -> ExtractPayload:
    """Snapshot a live selection: a document span, a row set, or one cell."""
    if "document_id" in selection:
        source = project.document_source(selection["document_id"])
        if source is None:
            raise NotFoundError(f"unknown document {selection['document_id']}",
                                entity_id=selection["document_id"])
        doc: TextDocument = source.payload
        start, end = selection["span"]
        if start < 0 or start >= end or end > doc.length:
            raise SpanError(f"span ({start},{end}) invalid for document length {doc.length}")
        sel = {"document_id": doc.id, "span": [start, end]}
        return ExtractPayload(
            kind="quote",
            content={"document_id": doc.id, "span": [start, end],
                     "text": doc.content[start:end]},
            source_ref={"component": "foraging", "source_id": source.id, "selection": sel},
            origin=source.origin, source_name=source.name,
        )

    if "table_id" not in selection:
        raise ValidationError("selection must name a document_id or table_id")
    source = project.table_source(selection["table_id"])
    if source is None:
        raise NotFoundError(f"unknown table {selection['table_id']}",
                            entity_id=selection["table_id"])
    table: Table = source.payload

    if "row_id" in selection and "column" in selection:
        row_id, column = selection["row_id"], selection["column"]
        row = table.row_by_id(row_id)
        if row is None:
            raise NotFoundError(f"unknown row {row_id}", entity_id=row_id)
        if table.column(column) is None:
            raise NotFoundError(f"unknown column {column!r}")
        sel = {"table_id": table.id, "row_id": row_id, "column": column}
        return ExtractPayload(
            kind="datapoint",
            content={"table_id": table.id, "row_id": row_id, "column": column,
                     "value": row.get(column)},
            source_ref={"component": "foraging", "source_id": source.id, "selection": sel},
            origin=source.origin, source_name=source.name,
        )

    if "row_ids" in selection:
        row_ids = list(selection["row_ids"])
        missing = [r for r in row_ids if r not in table.row_ids]
        if missing:
            raise NotFoundError(f"unknown rows: {', '.join(missing)}",
                                entity_id=missing[0])
        slice_rows = [dict(table.row_by_id(r)) for r in row_ids]  # type: ignore[arg-type]
        sel = {"table_id": table.id, "row_ids": row_ids}
        return ExtractPayload(
            kind="table_slice",
            content=Table(id=f"{table.id}:slice", columns=list(table.columns),
                          rows=slice_rows, row_ids=row_ids,
                          meta={"table_id": table.id, "pipeline": ["import", "slice"]}),
            source_ref={"component": "foraging", "source_id": source.id, "selection": sel},
            origin=source.origin, source_name=source.name,
        )

    raise ValidationError("table selection needs row_ids or (row_id, column)")
