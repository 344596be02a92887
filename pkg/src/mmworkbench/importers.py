"""Data import: RFC 4180 CSV -> Table, UTF-8 text -> TextDocument.

Ids for imported sources are content-derived (digest of kind|name|bytes) so
importing identical bytes always yields an identical source, row_ids included.
"""

from __future__ import annotations

import csv
import io
import re
from datetime import datetime, timezone
from typing import Any

from .canonical import digest_bytes
from .errors import ConflictError, CsvParseError, EncodingError
from .model import (
    Column,
    DataSource,
    Dtype,
    OriginDescriptor,
    Project,
    SourceKind,
    Table,
    TextDocument,
)

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_DATETIME_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?)?$"
)


def _parse_datetime(text: str) -> datetime | None:
    if not _DATETIME_RE.match(text):
        return None
    try:
        parsed = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return None
    if parsed.tzinfo is not None:
        # normalize to naive UTC so a column stays mutually comparable
        parsed = parsed.astimezone(timezone.utc).replace(tzinfo=None)
    return parsed


def _fits(text: str, dtype: Dtype) -> bool:
    if dtype is Dtype.int:
        return bool(_INT_RE.match(text))
    if dtype is Dtype.float:
        return bool(_FLOAT_RE.match(text))
    if dtype is Dtype.bool:
        return text.lower() in ("true", "false")
    if dtype is Dtype.datetime:
        return _parse_datetime(text) is not None
    return True


# inference cascade; a column takes the first dtype every non-empty value fits
_CASCADE = (Dtype.int, Dtype.float, Dtype.bool, Dtype.datetime, Dtype.string)


def infer_dtype(values: list[str]) -> Dtype:
    """Scan all non-empty values before deciding (row order never matters)."""
    present = [v for v in values if v != ""]
    if not present:
        return Dtype.string
    for dtype in _CASCADE:
        if all(_fits(v, dtype) for v in present):
            return dtype
    return Dtype.string


def _convert(text: str, dtype: Dtype) -> Any:
    if text == "":
        return None
    if dtype is Dtype.int:
        return int(text)
    if dtype is Dtype.float:
        return float(text)
    if dtype is Dtype.bool:
        return text.lower() == "true"
    if dtype is Dtype.datetime:
        return _parse_datetime(text)
    return text


def _decode_utf8(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"invalid UTF-8: {exc}") from exc


def import_table(name: str, data: bytes, origin: OriginDescriptor) -> DataSource:
    """Parse CSV (first row is the header), infer per-column dtypes, assign
    stable row_ids in file order. Empty cells become null."""
    text = _decode_utf8(data)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvParseError("empty CSV: no header row", line=1) from None
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise CsvParseError(f"duplicate header names: {', '.join(dupes)}", line=1)
    if any(h == "" for h in header):
        raise CsvParseError("empty header name", line=1)

    raw_rows: list[list[str]] = []
    for record in reader:
        if not record:
            continue  # blank trailing line
        if len(record) != len(header):
            raise CsvParseError(
                f"row has {len(record)} fields, expected {len(header)}",
                line=reader.line_num)
        raw_rows.append(record)

    columns = [
        Column(name=col, dtype=infer_dtype([row[i] for row in raw_rows]))
        for i, col in enumerate(header)
    ]
    rows = [
        {col.name: _convert(record[i], col.dtype) for i, col in enumerate(columns)}
        for record in raw_rows
    ]
    row_ids = [f"r{i:06d}" for i in range(len(rows))]

    stamp = digest_bytes(name.encode("utf-8") + b"\x00" + data)
    table = Table(id=f"tbl-{stamp}", columns=columns, rows=rows, row_ids=row_ids)
    return DataSource(
        id=f"src-{digest_bytes(b'table|' + name.encode('utf-8') + b'|' + data)}",
        kind=SourceKind.table, name=name, origin=origin, payload=table,
    )


def import_text(name: str, data: bytes, origin: OriginDescriptor) -> DataSource:
    """Store UTF-8 text verbatim; length is the Unicode scalar count."""
    content = _decode_utf8(data)
    stamp = digest_bytes(name.encode("utf-8") + b"\x00" + data)
    doc = TextDocument(id=f"doc-{stamp}", content=content)
    return DataSource(
        id=f"src-{digest_bytes(b'text|' + name.encode('utf-8') + b'|' + data)}",
        kind=SourceKind.text, name=name, origin=origin, payload=doc,
    )


def add_source(project: Project, source: DataSource) -> DataSource:
    """Attach an imported source; identical re-imports collide on id."""
    if project.source_by_id(source.id) is not None:
        raise ConflictError(
            f"source {source.name!r} with identical content already imported",
            entity_id=source.id)
    project.data_sources.append(source)
    return source
