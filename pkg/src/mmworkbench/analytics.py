"""Aggregations and chart construction with per-mark lineage.

Every derived table row and chart mark records exactly the raw rows (or
document tokens) it was computed from, so canvas blocks can be unwound
level-by-level back to raw data. Recomputing a mark's statistic from its
lineage must reproduce the encoded value.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Any

from .canonical import element_id
from .errors import (
    EmptyDataError,
    LabelError,
    TypeMismatchError,
    ValidationError,
)
from .model import (
    ChartKind,
    ChartSpec,
    Column,
    Dtype,
    LineageRef,
    Mark,
    OriginDescriptor,
    Project,
    SourceKind,
    Table,
)

NUMERIC = (Dtype.int, Dtype.float)


class Record(dict):
    """Scalar record output; carries provenance meta without serializing it."""

    def __init__(self, values: dict[str, Any], meta: dict[str, Any] | None = None):
        super().__init__(values)
        self.meta = meta or {}


@dataclass
class DocumentEntry:
    document_id: str
    source_id: str
    name: str
    origin: OriginDescriptor
    content: str


@dataclass
class DocumentSet:
    """Ordered set of text documents (insertion order of the data sources)."""

    entries: list[DocumentEntry]

    def ids(self) -> list[str]:
        return [e.document_id for e in self.entries]

    def to_display(self) -> dict[str, Any]:
        return {"document_ids": self.ids(), "names": [e.name for e in self.entries]}

    @classmethod
    def from_project(cls, project: Project, names: list[str] | None = None) -> "DocumentSet":
        entries = [
            DocumentEntry(document_id=src.payload.id, source_id=src.id, name=src.name,
                          origin=src.origin, content=src.payload.content)
            for src in project.data_sources
            if src.kind is SourceKind.text and (names is None or src.name in names)
        ]
        return cls(entries=entries)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on any non-letter/digit Unicode scalar, drop empties."""
    tokens: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def token_spans(text: str, token: str) -> list[tuple[int, int]]:
    """Offsets of each occurrence of a (lowercased) token in the original text."""
    spans: list[tuple[int, int]] = []
    start: int | None = None
    lowered = text.lower()
    for i, ch in enumerate(lowered):
        if ch.isalnum():
            if start is None:
                start = i
        else:
            if start is not None and lowered[start:i] == token:
                spans.append((start, i))
            start = None
    if start is not None and lowered[start:] == token:
        spans.append((start, len(text)))
    return spans


def _require_numeric(table: Table, column: str) -> Column:
    col = table.column(column)
    if col is None:
        raise ValidationError(f"unknown column {column!r}")
    if col.dtype not in NUMERIC:
        raise TypeMismatchError(f"column {column!r} is {col.dtype.value}, need numeric")
    return col


def root_table_id(table: Table) -> str:
    return (table.meta or {}).get("table_id", table.id)


def _pipeline(obj: Table | DocumentSet, step: str) -> list[str]:
    if isinstance(obj, DocumentSet):
        return ["import", step]
    base = list((obj.meta or {}).get("pipeline", ["import"]))
    base.append(step)
    return base


def _meta(table: Table, step: str, **extra: Any) -> dict[str, Any]:
    meta: dict[str, Any] = {
        "table_id": root_table_id(table),
        "pipeline": _pipeline(table, step),
    }
    for key in ("source_ids", "source_names", "value_column"):
        if table.meta and key in table.meta:
            meta[key] = table.meta[key]
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# Aggregations
# ---------------------------------------------------------------------------

def word_freq(documents: DocumentSet, stopwords: list[str] | None = None,
              *, table_id: str = "derived:word_freq") -> Table:
    """Token counts across documents, sorted (count desc, token asc); each row's
    lineage names the contributing documents."""
    if not documents.entries:
        raise ValidationError("word_freq needs a non-empty document set")
    stop = {s.lower() for s in (stopwords or [])}
    counts: dict[str, int] = {}
    contributors: dict[str, set[str]] = {}
    for entry in documents.entries:
        for token in tokenize(entry.content):
            if token in stop:
                continue
            counts[token] = counts.get(token, 0) + 1
            contributors.setdefault(token, set()).add(entry.document_id)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = [{"token": token, "count": count} for token, count in ordered]
    lineage = [
        sorted((doc_id, token) for doc_id in contributors[token])
        for token, _ in ordered
    ]
    return Table(
        id=table_id,
        columns=[Column("token", Dtype.string), Column("count", Dtype.int)],
        rows=rows,
        row_ids=[f"w{i:06d}" for i in range(len(rows))],
        lineage=lineage,
        meta={
            "pipeline": _pipeline(documents, "word_freq"),
            "source_ids": [e.source_id for e in documents.entries],
            "source_names": [e.name for e in documents.entries],
        },
    )


def code_freq(project: Project, *, table_id: str = "derived:code_freq") -> Table:
    """Annotations per code; an annotation tagged with k codes counts once per code."""
    counts: dict[str, int] = {}
    contributors: dict[str, list[LineageRef]] = {}
    by_id = {c.id: c for c in project.codebook}
    for ann in project.annotations:
        for code_id in ann.code_ids:
            code = by_id.get(code_id)
            if code is None:
                continue
            counts[code.label] = counts.get(code.label, 0) + 1
            contributors.setdefault(code.label, []).append(("annotations", ann.id))
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = [{"code_label": label, "count": count} for label, count in ordered]
    return Table(
        id=table_id,
        columns=[Column("code_label", Dtype.string), Column("count", Dtype.int)],
        rows=rows,
        row_ids=[f"c{i:06d}" for i in range(len(rows))],
        lineage=[sorted(contributors[label]) for label, _ in ordered],
        meta={"pipeline": ["code_freq"]},
    )


def _group_sort_key(values: tuple) -> tuple:
    return tuple((1, "") if v is None else (0, v) for v in values)


def group_median(table: Table, group_columns: list[str], value_column: str,
                 *, table_id: str = "derived:group_median") -> Table:
    """One row per distinct group tuple; even-cardinality median is the mean of
    the two middle values; nulls excluded; empty groups omitted."""
    if isinstance(group_columns, str):
        group_columns = [group_columns]
    if not group_columns:
        raise ValidationError("group_median needs at least one group column")
    for name in group_columns:
        if table.column(name) is None:
            raise ValidationError(f"unknown column {name!r}")
    _require_numeric(table, value_column)

    root = root_table_id(table)
    groups: dict[tuple, list[tuple[float, str]]] = {}
    for row, row_id in zip(table.rows, table.row_ids):
        key = tuple(row.get(c) for c in group_columns)
        groups.setdefault(key, [])
        value = row.get(value_column)
        if value is None:
            continue
        groups[key].append((float(value), row_id))

    out_rows: list[dict[str, Any]] = []
    out_lineage: list[list[LineageRef]] = []
    for key in sorted(groups, key=_group_sort_key):
        members = groups[key]
        if not members:
            continue  # no non-null values: group omitted
        values = sorted(v for v, _ in members)
        mid = len(values) // 2
        if len(values) % 2:
            median = values[mid]
        else:
            median = (values[mid - 1] + values[mid]) / 2.0
        row: dict[str, Any] = {
            "group": " / ".join("" if v is None else str(v) for v in key)}
        row.update({c: v for c, v in zip(group_columns, key)})
        row["median"] = float(median)
        out_rows.append(row)
        out_lineage.append(sorted((root, row_id) for _, row_id in members))

    group_cols = [Column("group", Dtype.string)]
    group_cols += [Column(c, table.column(c).dtype) for c in group_columns]  # type: ignore[union-attr]
    return Table(
        id=table_id,
        columns=group_cols + [Column("median", Dtype.float)],
        rows=out_rows,
        row_ids=[f"g{i:06d}" for i in range(len(out_rows))],
        lineage=out_lineage,
        meta=_meta(table, "group_median", value_column=value_column,
                   group_columns=list(group_columns)),
    )


def stats(table: Table, column: str) -> Record:
    """Descriptive record {n, mean, median, sd}; sd is the sample standard
    deviation (n-1) and null when n < 2."""
    _require_numeric(table, column)
    values = [float(row[column]) for row in table.rows if row.get(column) is not None]
    n = len(values)
    record: dict[str, Any] = {"n": n, "mean": None, "median": None, "sd": None}
    if n:
        record["mean"] = statistics.fmean(values)
        record["median"] = float(statistics.median(values))
    if n >= 2:
        record["sd"] = statistics.stdev(values)
    return Record(record, meta=_meta(table, "stats", value_column=column))


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

def histogram(table: Table, column: str, bins: int | str,
              *, owner: str = "adhoc") -> ChartSpec:
    """Equal-width bins over [min, max], right-open except the last bin;
    bins="integer" gives one bin per integer value (Likert data), empty bins
    included. Each bar's lineage is the row ids that fell in the bin."""
    _require_numeric(table, column)
    root = root_table_id(table)
    pairs = [
        (float(row[column]), row_id)
        for row, row_id in zip(table.rows, table.row_ids)
        if row.get(column) is not None
    ]
    if not pairs:
        raise EmptyDataError(f"column {column!r} has no non-null values")

    marks: list[Mark] = []
    lo = min(v for v, _ in pairs)
    hi = max(v for v, _ in pairs)

    if bins == "integer":
        if any(v != int(v) for v, _ in pairs):
            raise ValidationError('bins="integer" requires integral values')
        for value in range(int(lo), int(hi) + 1):
            members = sorted(row_id for v, row_id in pairs if v == value)
            key = f"v{value}"
            marks.append(Mark(
                element_id=element_id(owner, "histogram", key), key=key,
                value={"bin_start": float(value), "bin_end": float(value),
                       "count": len(members)},
                lineage=[(root, r) for r in members],
            ))
    else:
        if not isinstance(bins, int) or isinstance(bins, bool) or bins < 1:
            raise ValidationError(f'bins must be a positive int or "integer", got {bins!r}')
        if lo == hi:
            bins = 1  # degenerate range: one bin holding all rows
        width = (hi - lo) / bins
        for i in range(bins):
            left = lo + i * width
            right = hi if i == bins - 1 else lo + (i + 1) * width
            members = sorted(
                row_id for v, row_id in pairs
                if (left <= v < right) or (i == bins - 1 and left <= v <= hi))
            key = f"bin{i}"
            marks.append(Mark(
                element_id=element_id(owner, "histogram", key), key=key,
                value={"bin_start": left, "bin_end": right, "count": len(members)},
                lineage=[(root, r) for r in members],
            ))

    return ChartSpec(
        chart_kind=ChartKind.histogram, marks=marks,
        x_label=column, y_label="count", title=f"distribution of {column}",
        meta=_meta(table, "histogram", value_column=column,
                   bins=bins if bins == "integer" else int(bins)),
        abstraction_level=1,
    )


def scatter(table: Table, x_column: str, y_column: str,
            *, owner: str = "adhoc") -> ChartSpec:
    """One point per row with non-null x and y; element ids derive from row_ids."""
    _require_numeric(table, x_column)
    _require_numeric(table, y_column)
    root = root_table_id(table)
    marks = [
        Mark(
            element_id=element_id(owner, "scatter", row_id), key=row_id,
            value={"x": float(row[x_column]), "y": float(row[y_column])},
            lineage=[(root, row_id)],
        )
        for row, row_id in zip(table.rows, table.row_ids)
        if row.get(x_column) is not None and row.get(y_column) is not None
    ]
    return ChartSpec(
        chart_kind=ChartKind.scatter, marks=marks,
        x_label=x_column, y_label=y_column,
        title=f"{y_column} vs {x_column}",
        meta=_meta(table, "scatter", x_column=x_column, y_column=y_column),
        abstraction_level=1,
    )


def bar(table: Table, label_column: str, value_column: str,
        *, owner: str = "adhoc") -> ChartSpec:
    """One bar per row. Lineage passes through from aggregate input rows when
    present (then the chart sits at the aggregate level), else each bar traces
    to its own row."""
    if table.column(label_column) is None:
        raise ValidationError(f"unknown column {label_column!r}")
    _require_numeric(table, value_column)
    root = root_table_id(table)

    labels = [row.get(label_column) for row in table.rows]
    rendered = [("" if l is None else str(l)) for l in labels]
    if len(set(rendered)) != len(rendered):
        dupes = sorted({l for l in rendered if rendered.count(l) > 1})
        raise LabelError(f"duplicate bar labels: {', '.join(dupes)}")

    aggregated = table.lineage is not None
    marks: list[Mark] = []
    for i, (row, row_id) in enumerate(zip(table.rows, table.row_ids)):
        value = row.get(value_column)
        if value is None:
            continue
        lineage = (sorted(table.lineage[i]) if aggregated
                   else [(root, row_id)])
        marks.append(Mark(
            element_id=element_id(owner, "bar", rendered[i]), key=rendered[i],
            value={"label": rendered[i], "value": float(value)},
            lineage=lineage,
        ))

    meta = _meta(table, "bar")
    meta.setdefault("value_column", value_column)
    return ChartSpec(
        chart_kind=ChartKind.bar, marks=marks,
        x_label=label_column, y_label=value_column,
        title=f"{value_column} by {label_column}",
        meta=meta,
        abstraction_level=2 if aggregated else 1,
    )


def wordcloud(freq_table: Table, *, owner: str = "adhoc") -> ChartSpec:
    """Renders a token/count table (word_freq output) as weighted word marks."""
    for needed in ("token", "count"):
        if freq_table.column(needed) is None:
            raise ValidationError("wordcloud needs a token/count table (word_freq output)")
    marks: list[Mark] = []
    for i, (row, _row_id) in enumerate(zip(freq_table.rows, freq_table.row_ids)):
        token = row["token"]
        lineage = sorted(freq_table.lineage[i]) if freq_table.lineage else []
        marks.append(Mark(
            element_id=element_id(owner, "wordcloud", token), key=token,
            value={"token": token, "count": int(row["count"])},
            lineage=lineage,
        ))
    meta = dict(freq_table.meta or {})
    meta["pipeline"] = list(meta.get("pipeline", [])) + ["wordcloud"]
    return ChartSpec(
        chart_kind=ChartKind.wordcloud, marks=marks,
        x_label="", y_label="", title="word cloud",
        meta=meta, abstraction_level=2,
    )
