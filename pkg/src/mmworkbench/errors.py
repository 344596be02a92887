"""Exception hierarchy shared by every layer of the workbench.

Each error carries a machine-readable ``code`` that the HTTP layer maps to a
status and clients can branch on without parsing messages.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class; ``code`` is stable, ``entity_id`` names the offender when known."""

    code = "error"

    def __init__(self, message: str, entity_id: str | None = None):
        super().__init__(message)
        self.entity_id = entity_id


class ValidationError(WorkbenchError):
    code = "validation_error"


class NotFoundError(WorkbenchError):
    code = "not_found"


class ConflictError(WorkbenchError):
    code = "conflict"


class IntegrityError(WorkbenchError):
    code = "integrity_error"


class VersionError(WorkbenchError):
    code = "version_error"


class CsvParseError(WorkbenchError):
    code = "parse_error"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EncodingError(WorkbenchError):
    code = "encoding_error"


class SpanError(WorkbenchError):
    code = "span_error"


class TypeMismatchError(WorkbenchError):
    code = "type_error"


class LabelError(WorkbenchError):
    code = "label_error"


class EmptyDataError(WorkbenchError):
    code = "empty_data"


class AnchorError(WorkbenchError):
    code = "anchor_error"


class NoLineageError(WorkbenchError):
    code = "no_lineage"


class CellSyntaxError(WorkbenchError):
    """Raised by the cell parser; line/column are 1-based."""

    code = "syntax_error"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class NameResolutionError(WorkbenchError):
    code = "name_error"
