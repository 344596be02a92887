"""Notebook execution engine: the shared variable space plus a small,
deterministic evaluator over the cell mini-language.

All three workbench components read the same space: `docs`, `tables`,
`annotations`, and `codebook` are pre-bound (read-only) views over the
project, rebuilt on every lookup so they always reflect current state.
"""

from __future__ import annotations

from typing import Any, Callable

from . import analytics, dsl
from .analytics import DocumentSet, Record
from .errors import (
    NameResolutionError,
    NotFoundError,
    TypeMismatchError,
    ValidationError,
    WorkbenchError,
)
from .foraging import Predicate, apply_view_to_table
from .model import (
    Cell,
    CellKind,
    CellOutput,
    ChartSpec,
    Column,
    Dtype,
    OutputKind,
    Project,
    Table,
)

PREBOUND = ("docs", "tables", "annotations", "codebook")


def _annotations_table(project: Project) -> Table:
    labels = {c.id: c.label for c in project.codebook}
    rows = [
        {
            "id": a.id,
            "document_id": a.document_id,
            "start": a.span[0],
            "end": a.span[1],
            "codes": ",".join(labels.get(cid, cid) for cid in a.code_ids),
            "note": a.note,
            "author": a.author,
        }
        for a in project.annotations
    ]
    return Table(
        id="builtin:annotations",
        columns=[Column("id", Dtype.string), Column("document_id", Dtype.string),
                 Column("start", Dtype.int), Column("end", Dtype.int),
                 Column("codes", Dtype.string), Column("note", Dtype.string),
                 Column("author", Dtype.string)],
        rows=rows, row_ids=[a.id for a in project.annotations],
        meta={"pipeline": ["annotations"]},
    )


def _codebook_table(project: Project) -> Table:
    rows = [
        {"id": c.id, "label": c.label, "color": c.color,
         "description": c.description or ""}
        for c in project.codebook
    ]
    return Table(
        id="builtin:codebook",
        columns=[Column("id", Dtype.string), Column("label", Dtype.string),
                 Column("color", Dtype.string), Column("description", Dtype.string)],
        rows=rows, row_ids=[c.id for c in project.codebook],
        meta={"pipeline": ["codebook"]},
    )


class VariableSpace:
    """name -> value mapping; pre-bound names are read-only project views."""

    def __init__(self, project: Project):
        self.project = project
        self.vars: dict[str, Any] = {}

    def get(self, name: str) -> Any:
        if name == "docs":
            return DocumentSet.from_project(self.project)
        if name == "tables":
            return sorted(s.name for s in self.project.data_sources
                          if s.kind.value == "table")
        if name == "annotations":
            return _annotations_table(self.project)
        if name == "codebook":
            return _codebook_table(self.project)
        if name in self.vars:
            return self.vars[name]
        raise NameResolutionError(f"name {name!r} is not defined")

    def set(self, name: str, value: Any) -> None:
        if name in PREBOUND:
            raise ValidationError(f"{name!r} is pre-bound and read-only")
        self.vars[name] = value


class _Context:
    def __init__(self, project: Project, space: VariableSpace, cell_id: str):
        self.project = project
        self.space = space
        self.cell_id = cell_id
        self._derived = 0

    def table_id(self) -> str:
        self._derived += 1
        return f"{self.cell_id}:t{self._derived}"


def _want_table(name: str, value: Any) -> Table:
    if not isinstance(value, Table):
        raise TypeMismatchError(f"{name}() expects a table, got {type(value).__name__}")
    return value


def _want_str(name: str, value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise TypeMismatchError(f"{name}() expects a string {what}")
    return value


def _arity(name: str, args: list[Any], low: int, high: int | None = None) -> None:
    high = low if high is None else high
    if not (low <= len(args) <= high):
        expect = str(low) if low == high else f"{low}-{high}"
        raise TypeMismatchError(f"{name}() takes {expect} arguments, got {len(args)}")


def _bi_tables(ctx: _Context, args: list[Any]) -> Table:
    _arity("tables", args, 1)
    name = _want_str("tables", args[0], "source name")
    for src in ctx.project.data_sources:
        if src.kind.value == "table" and src.name == name:
            return src.payload
    raise NameResolutionError(f"no table source named {name!r}")


def _bi_docs(ctx: _Context, args: list[Any]) -> DocumentSet:
    names = [_want_str("docs", a, "document name") for a in args] or None
    found = DocumentSet.from_project(ctx.project, names)
    if names and not found.entries:
        raise NameResolutionError(f"no text source named {names[0]!r}")
    return found


def _bi_filter(ctx: _Context, args: list[Any]) -> Table:
    _arity("filter", args, 4)
    table = _want_table("filter", args[0])
    column = _want_str("filter", args[1], "column")
    op = _want_str("filter", args[2], "operator")
    return apply_view_to_table(table, [Predicate(column, op, args[3])], [],
                               result_id=ctx.table_id())


def _bi_sort(ctx: _Context, args: list[Any]) -> Table:
    _arity("sort", args, 2, 3)
    table = _want_table("sort", args[0])
    column = _want_str("sort", args[1], "column")
    direction = _want_str("sort", args[2], "direction") if len(args) > 2 else "asc"
    return apply_view_to_table(table, [], [(column, direction)],
                               result_id=ctx.table_id())


def _bi_word_freq(ctx: _Context, args: list[Any]) -> Table:
    _arity("word_freq", args, 1, 2)
    docset = args[0]
    if not isinstance(docset, DocumentSet):
        raise TypeMismatchError("word_freq() expects a document set (docs)")
    stopwords = None
    if len(args) > 1:
        if not isinstance(args[1], list) or not all(isinstance(s, str) for s in args[1]):
            raise TypeMismatchError("word_freq() stopwords must be a list of strings")
        stopwords = args[1]
    return analytics.word_freq(docset, stopwords, table_id=ctx.table_id())


def _bi_code_freq(ctx: _Context, args: list[Any]) -> Table:
    _arity("code_freq", args, 0)
    return analytics.code_freq(ctx.project, table_id=ctx.table_id())


def _bi_group_median(ctx: _Context, args: list[Any]) -> Table:
    _arity("group_median", args, 3)
    table = _want_table("group_median", args[0])
    group_cols = args[1]
    if isinstance(group_cols, str):
        group_cols = [group_cols]
    if not isinstance(group_cols, list) or not all(isinstance(c, str) for c in group_cols):
        raise TypeMismatchError("group_median() group columns must be a string or list")
    value_col = _want_str("group_median", args[2], "value column")
    return analytics.group_median(table, group_cols, value_col, table_id=ctx.table_id())


def _bi_stats(ctx: _Context, args: list[Any]) -> Record:
    _arity("stats", args, 2)
    return analytics.stats(_want_table("stats", args[0]),
                           _want_str("stats", args[1], "column"))


def _stamp(ctx: _Context, chart: ChartSpec) -> ChartSpec:
    chart.source_cell = ctx.cell_id
    return chart


def _bi_histogram(ctx: _Context, args: list[Any]) -> ChartSpec:
    _arity("histogram", args, 2, 3)
    table = _want_table("histogram", args[0])
    column = _want_str("histogram", args[1], "column")
    bins: Any = args[2] if len(args) > 2 else 10
    return _stamp(ctx, analytics.histogram(table, column, bins, owner=ctx.cell_id))


def _bi_scatter(ctx: _Context, args: list[Any]) -> ChartSpec:
    _arity("scatter", args, 3)
    return _stamp(ctx, analytics.scatter(
        _want_table("scatter", args[0]),
        _want_str("scatter", args[1], "x column"),
        _want_str("scatter", args[2], "y column"),
        owner=ctx.cell_id))


def _bi_bar(ctx: _Context, args: list[Any]) -> ChartSpec:
    _arity("bar", args, 3)
    return _stamp(ctx, analytics.bar(
        _want_table("bar", args[0]),
        _want_str("bar", args[1], "label column"),
        _want_str("bar", args[2], "value column"),
        owner=ctx.cell_id))


def _bi_wordcloud(ctx: _Context, args: list[Any]) -> ChartSpec:
    _arity("wordcloud", args, 1)
    return _stamp(ctx, analytics.wordcloud(_want_table("wordcloud", args[0]),
                                           owner=ctx.cell_id))


BUILTINS: dict[str, Callable[[_Context, list[Any]], Any]] = {
    "tables": _bi_tables,
    "docs": _bi_docs,
    "filter": _bi_filter,
    "sort": _bi_sort,
    "word_freq": _bi_word_freq,
    "code_freq": _bi_code_freq,
    "group_median": _bi_group_median,
    "stats": _bi_stats,
    "histogram": _bi_histogram,
    "scatter": _bi_scatter,
    "bar": _bi_bar,
    "wordcloud": _bi_wordcloud,
}


def _eval_expr(ctx: _Context, node: Any) -> Any:
    if isinstance(node, dsl.Literal):
        return node.value
    if isinstance(node, dsl.ListExpr):
        return [_eval_expr(ctx, item) for item in node.items]
    if isinstance(node, dsl.Name):
        return ctx.space.get(node.id)
    if isinstance(node, dsl.Call):
        builtin = BUILTINS.get(node.name)
        if builtin is None:
            raise NameResolutionError(f"unknown function {node.name!r}")
        return builtin(ctx, [_eval_expr(ctx, a) for a in node.args])
    raise ValidationError(f"cannot evaluate {type(node).__name__}")


def _display_value(value: Any) -> Any:
    """Make a space value JSON-representable for a cell output."""
    if isinstance(value, (Table, ChartSpec)):
        return value.to_json()
    if isinstance(value, DocumentSet):
        return value.to_display()
    if isinstance(value, list):
        return [_display_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _display_value(v) for k, v in value.items()}
    return value


def evaluate_cell(project: Project, space: VariableSpace, cell: Cell) -> list[CellOutput]:
    """Run one code cell: statements top-to-bottom, assignments mutate the
    space, the last bare expression becomes an output. Errors are captured as
    error outputs; mutations before the error persist."""
    try:
        program = dsl.parse_cell(cell.source)
    except WorkbenchError as exc:
        payload = {"code": exc.code, "message": str(exc)}
        if hasattr(exc, "line"):
            payload["line"] = exc.line
            payload["column"] = exc.column
        return [CellOutput(kind=OutputKind.error, payload=payload, produced_by=cell.id)]

    ctx = _Context(project, space, cell.id)
    last_value: Any = None
    has_value = False
    for stmt in program.statements:
        try:
            if isinstance(stmt, dsl.Assign):
                ctx.space.set(stmt.name, _eval_expr(ctx, stmt.expr))
            else:
                last_value = _eval_expr(ctx, stmt)
                has_value = True
        except WorkbenchError as exc:
            payload = {"code": exc.code, "message": str(exc)}
            return [CellOutput(kind=OutputKind.error, payload=payload,
                               produced_by=cell.id)]
        except Exception as exc:  # defensive: any runtime failure becomes an output
            payload = {"code": "runtime_error", "message": f"{type(exc).__name__}: {exc}"}
            return [CellOutput(kind=OutputKind.error, payload=payload,
                               produced_by=cell.id)]

    if not has_value:
        return []
    if isinstance(last_value, Table):
        return [CellOutput(kind=OutputKind.table, payload=last_value, produced_by=cell.id)]
    if isinstance(last_value, ChartSpec):
        if last_value.source_cell is None:
            last_value.source_cell = cell.id
        return [CellOutput(kind=OutputKind.chart, payload=last_value, produced_by=cell.id)]
    return [CellOutput(kind=OutputKind.value, payload=_display_value(last_value)
                       if not isinstance(last_value, Record) else last_value,
                       produced_by=cell.id)]


# evaluator interface: (project, space, cell) -> outputs. The default is the
# sandboxed mini-language; a host-language evaluator can be plugged in behind
# the same seam (off by default).
Evaluator = Callable[[Project, VariableSpace, Cell], list[CellOutput]]


class NotebookEngine:
    """Session-scoped executor. execute_cell runs against the persistent
    space; execute_all rebuilds from a fresh space in document order.
    Execution counts restart per session, which keeps headless runs
    byte-stable while staying monotone within the session."""

    def __init__(self, project: Project, evaluator: Evaluator = evaluate_cell):
        self.project = project
        self.space = VariableSpace(project)
        self.evaluator = evaluator
        self.execution_counter = 0

    def execute_cell(self, cell_id: str) -> list[CellOutput]:
        cell = self.project.notebook.cell_by_id(cell_id)
        if cell is None:
            raise NotFoundError(f"unknown cell {cell_id}", entity_id=cell_id)
        if cell.kind is not CellKind.code:
            raise ValidationError(f"cell {cell_id} is not a code cell")
        outputs = self.evaluator(self.project, self.space, cell)
        self.execution_counter += 1
        cell.outputs = outputs
        cell.execution_count = self.execution_counter
        return outputs

    def execute_all(self) -> dict[str, list[CellOutput]]:
        """Whole-notebook run against a fresh space; later cells still run
        after an earlier cell errors."""
        self.space = VariableSpace(self.project)
        results: dict[str, list[CellOutput]] = {}
        for cell in self.project.notebook.cells:
            if cell.kind is not CellKind.code:
                continue
            outputs = self.evaluator(self.project, self.space, cell)
            self.execution_counter += 1
            cell.outputs = outputs
            cell.execution_count = self.execution_counter
            results[cell.id] = outputs
        return results


def evaluate_notebook(project: Project,
                      evaluator: Evaluator = evaluate_cell) -> dict[str, list[CellOutput]]:
    """Pure whole-notebook evaluation: same semantics as execute_all but
    commits nothing (no outputs, no counts). Used to re-materialize live
    blocks without touching notebook state."""
    space = VariableSpace(project)
    results: dict[str, list[CellOutput]] = {}
    for cell in project.notebook.cells:
        if cell.kind is not CellKind.code:
            continue
        results[cell.id] = evaluator(project, space, cell)
    return results
