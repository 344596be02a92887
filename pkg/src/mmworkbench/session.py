"""Single-writer session over one project.

Every mutation is applied under one lock, in order; each commit emits events
atomically and, when the mutation can affect downstream blocks, runs the
sync pass (live blocks re-materialize, snapshot blocks gain staleness flags).
Reads serve the current state under the same lock, so they always see a
consistent snapshot.
"""

from __future__ import annotations

import queue
import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Callable

from . import canvas as canvas_ops
from . import engine as engine_mod
from . import foraging, importers
from .errors import NotFoundError, TypeMismatchError, ValidationError
from .foraging import TableView
from .model import (
    Anchor,
    Annotation,
    Block,
    Cell,
    CellKind,
    CellOutput,
    Code,
    DataSource,
    Link,
    OriginDescriptor,
    Project,
    Region,
    SyncMode,
    Table,
    cell_conforms,
    project_content_hash,
    utc_now,
)

EVENT_BUFFER = 4096  # spec floor is 1000 buffered events


@dataclass
class ApiEvent:
    seq: int
    kind: str  # cell_executed | block_updated | block_stale | annotation_added | source_imported
    ids: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {"seq": self.seq, "kind": self.kind, "ids": self.ids}


class EventBus:
    """Monotone event log with replay; emission happens inside the writer
    lock so event order equals mutation application order."""

    def __init__(self, buffer_size: int = EVENT_BUFFER):
        self._seq = 0
        self._buffer: deque[ApiEvent] = deque(maxlen=buffer_size)
        self._subscribers: list[queue.Queue[ApiEvent]] = []
        self._lock = threading.Lock()

    def emit(self, kind: str, ids: dict[str, Any]) -> ApiEvent:
        with self._lock:
            self._seq += 1
            event = ApiEvent(seq=self._seq, kind=kind, ids=ids)
            self._buffer.append(event)
            for q in list(self._subscribers):
                q.put(event)
            return event

    @property
    def seq(self) -> int:
        return self._seq

    def since(self, since_seq: int) -> list[ApiEvent]:
        with self._lock:
            return [e for e in self._buffer if e.seq > since_seq]

    def subscribe(self) -> "queue.Queue[ApiEvent]":
        q: queue.Queue[ApiEvent] = queue.Queue()
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: "queue.Queue[ApiEvent]") -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)


class Session:
    """Owns a project; all mutations flow through here."""

    def __init__(self, project: Project, bus: EventBus | None = None,
                 clock: Callable[[], datetime] = utc_now):
        self.project = project
        self.bus = bus or EventBus()
        self.clock = clock
        self.engine = engine_mod.NotebookEngine(project)
        self.undo_log: list[canvas_ops.UndoEntry] = []
        self._lock = threading.RLock()
        self._content_hash = project_content_hash(project)

    # -- commit plumbing -----------------------------------------------------

    def _commit(self) -> None:
        new_hash = project_content_hash(self.project)
        if new_hash != self._content_hash:
            self.project.modified_at = self.clock()
            self._content_hash = new_hash

    def _sync(self) -> None:
        outputs_map = engine_mod.evaluate_notebook(self.project)
        report = canvas_ops.sync_blocks(self.project, outputs_map)
        if report.refreshed or report.dangling_changed:
            self.bus.emit("block_updated", {
                "block_ids": report.refreshed,
                "link_ids": report.dangling_changed,
            })
        if report.stale_changed:
            self.bus.emit("block_stale", {"block_ids": report.stale_changed})

    # -- sources ---------------------------------------------------------------

    def import_source(self, kind: str, name: str, data: bytes,
                      origin: OriginDescriptor) -> DataSource:
        with self._lock:
            if kind == "text":
                source = importers.import_text(name, data, origin)
            elif kind == "table":
                source = importers.import_table(name, data, origin)
            else:
                raise ValidationError(f"source kind must be text or table, got {kind!r}")
            importers.add_source(self.project, source)
            self.bus.emit("source_imported", {"source_id": source.id})
            self._sync()
            self._commit()
            return source

    def set_table_cell(self, table_id: str, row_id: str, column: str,
                       value: Any) -> DataSource:
        with self._lock:
            src = self.project.table_source(table_id)
            if src is None:
                raise NotFoundError(f"unknown table {table_id}", entity_id=table_id)
            table: Table = src.payload
            row = table.row_by_id(row_id)
            if row is None:
                raise NotFoundError(f"unknown row {row_id}", entity_id=row_id)
            col = table.column(column)
            if col is None:
                raise NotFoundError(f"unknown column {column!r}")
            if not cell_conforms(value, col.dtype):
                raise TypeMismatchError(
                    f"value {value!r} does not conform to {col.dtype.value}")
            row[column] = value
            self.bus.emit("source_imported", {"source_id": src.id})
            self._sync()
            self._commit()
            return src

    # -- foraging --------------------------------------------------------------

    def create_code(self, label: str, color: str | None = None,
                    description: str | None = None) -> Code:
        with self._lock:
            code = foraging.create_code(self.project, label, color, description)
            self._sync()  # code_freq cells may feed live blocks
            self._commit()
            return code

    def annotate(self, document_id: str, span: tuple[int, int], code_ids: list[str],
                 note: str, author: str) -> Annotation:
        with self._lock:
            annotation = foraging.annotate(self.project, document_id, span, code_ids,
                                           note, author, created_at=self.clock())
            self.bus.emit("annotation_added", {
                "annotation_id": annotation.id,
                "document_id": annotation.document_id,
            })
            self._sync()
            self._commit()
            return annotation

    def suggest_codes(self, prefix: str) -> list[Code]:
        with self._lock:
            return foraging.suggest_codes(self.project, prefix)

    def query_annotations(self, document_id: str | None = None,
                          code_id: str | None = None) -> list[Annotation]:
        with self._lock:
            return foraging.query_annotations(self.project, document_id, code_id)

    def apply_table_view(self, view: TableView) -> Table:
        with self._lock:
            return foraging.apply_table_view(self.project, view)

    def make_extract(self, selection: dict[str, Any]) -> foraging.ExtractPayload:
        with self._lock:
            return foraging.make_extract(self.project, selection)

    # -- notebook ----------------------------------------------------------------

    def add_cell(self, kind: str, source: str, index: int | None = None) -> Cell:
        with self._lock:
            cell = Cell(id=self.project.new_id("cell"), kind=CellKind(kind),
                        source=source)
            cells = self.project.notebook.cells
            cells.insert(len(cells) if index is None else index, cell)
            self._commit()
            return cell

    def update_cell(self, cell_id: str, source: str) -> Cell:
        with self._lock:
            cell = self.project.notebook.cell_by_id(cell_id)
            if cell is None:
                raise NotFoundError(f"unknown cell {cell_id}", entity_id=cell_id)
            cell.source = source
            self._commit()
            return cell

    def execute_cell(self, cell_id: str) -> list[CellOutput]:
        with self._lock:
            outputs = self.engine.execute_cell(cell_id)
            self.bus.emit("cell_executed", {"cell_id": cell_id})
            self._sync()
            self._commit()
            return outputs

    def execute_all(self) -> dict[str, list[CellOutput]]:
        with self._lock:
            results = self.engine.execute_all()
            for cell_id in results:
                self.bus.emit("cell_executed", {"cell_id": cell_id})
            self._sync()
            self._commit()
            return results

    # -- canvas ------------------------------------------------------------------

    def create_block_from_extract(self, selection: dict[str, Any],
                                  position: tuple[float, float],
                                  sync_mode: str = "snapshot",
                                  size: tuple[float, float] | None = None) -> Block:
        with self._lock:
            extract = foraging.make_extract(self.project, selection)
            block = canvas_ops.create_block_from_extract(
                self.project, extract, position, SyncMode(sync_mode), size)
            self.bus.emit("block_updated", {"block_ids": [block.id]})
            self._commit()
            return block

    def create_block_from_cell_output(self, cell_id: str, output_index: int,
                                      position: tuple[float, float],
                                      sync_mode: str = "snapshot",
                                      size: tuple[float, float] | None = None) -> Block:
        with self._lock:
            block = canvas_ops.create_block_from_cell_output(
                self.project, cell_id, output_index, position,
                SyncMode(sync_mode), size)
            self.bus.emit("block_updated", {"block_ids": [block.id]})
            self._commit()
            return block

    def create_note_block(self, text: str, position: tuple[float, float],
                          size: tuple[float, float] | None = None) -> Block:
        with self._lock:
            block = canvas_ops.create_note_block(self.project, text, position, size)
            self.bus.emit("block_updated", {"block_ids": [block.id]})
            self._commit()
            return block

    def accept_suggestion(self, descriptor: dict[str, Any],
                          position: tuple[float, float],
                          sync_mode: str = "snapshot",
                          size: tuple[float, float] | None = None,
                          ) -> tuple[Block, Link | None]:
        with self._lock:
            block, link = canvas_ops.create_block_from_descriptor(
                self.project, descriptor, position, SyncMode(sync_mode), size)
            ids: dict[str, Any] = {"block_ids": [block.id]}
            if link is not None:
                ids["link_ids"] = [link.id]
            self.bus.emit("block_updated", ids)
            self._commit()
            return block, link

    def move_block(self, block_id: str, position: tuple[float, float]) -> Block:
        with self._lock:
            block = canvas_ops.move_block(self.project, block_id, position)
            self.bus.emit("block_updated", {"block_ids": [block_id]})
            self._commit()
            return block

    def resize_block(self, block_id: str, size: tuple[float, float]) -> Block:
        with self._lock:
            block = canvas_ops.resize_block(self.project, block_id, size)
            self.bus.emit("block_updated", {"block_ids": [block_id]})
            self._commit()
            return block

    def set_block_sync_mode(self, block_id: str, sync_mode: str) -> Block:
        with self._lock:
            block = self.project.canvas.block_by_id(block_id)
            if block is None:
                raise NotFoundError(f"unknown block {block_id}", entity_id=block_id)
            block.sync_mode = SyncMode(sync_mode)
            if block.sync_mode is SyncMode.live:
                outputs_map = engine_mod.evaluate_notebook(self.project)
                canvas_ops.refresh_snapshot_block(self.project, block_id, outputs_map)
            self.bus.emit("block_updated", {"block_ids": [block_id]})
            self._commit()
            return block

    def refresh_block(self, block_id: str) -> Block:
        with self._lock:
            outputs_map = engine_mod.evaluate_notebook(self.project)
            block = canvas_ops.refresh_snapshot_block(self.project, block_id,
                                                      outputs_map)
            self.bus.emit("block_updated", {"block_ids": [block_id]})
            self._commit()
            return block

    def delete_block(self, block_id: str) -> list[str]:
        with self._lock:
            region = self.project.canvas.region_of(block_id)
            removed = canvas_ops.delete_block(self.project, block_id, self.undo_log)
            ids: dict[str, Any] = {"block_ids": [removed[0]],
                                   "link_ids": removed[1:], "deleted": True}
            if region is not None:
                ids["region_ids"] = [region.id]
            self.bus.emit("block_updated", ids)
            self._commit()
            return removed

    def undo_last_delete(self) -> list[str]:
        with self._lock:
            if not self.undo_log:
                raise ValidationError("nothing to undo")
            entry = self.undo_log.pop()
            restored = canvas_ops.undo_delete(self.project, entry)
            ids = {"block_ids": [restored[0]], "link_ids": restored[1:]}
            if entry.membership is not None:
                ids["region_ids"] = [entry.membership[0]]
            self.bus.emit("block_updated", ids)
            self._commit()
            return restored

    def create_link(self, from_anchor: Anchor, to_anchor: Anchor,
                    label: str | None = None) -> Link:
        with self._lock:
            link = canvas_ops.create_link(self.project, from_anchor, to_anchor, label)
            self.bus.emit("block_updated", {
                "block_ids": [from_anchor.block_id, to_anchor.block_id],
                "link_ids": [link.id],
            })
            self._commit()
            return link

    def create_region(self, name: str,
                      bounds: tuple[float, float, float, float]) -> Region:
        with self._lock:
            region = canvas_ops.create_region(self.project, name, bounds)
            self.bus.emit("block_updated", {"region_ids": [region.id]})
            self._commit()
            return region

    def assign_to_region(self, block_id: str, region_id: str) -> Region:
        with self._lock:
            previous = self.project.canvas.region_of(block_id)
            region = canvas_ops.assign_to_region(self.project, block_id, region_id)
            region_ids = [region.id] if previous is None or previous.id == region.id \
                else [previous.id, region.id]
            self.bus.emit("block_updated", {
                "block_ids": [block_id], "region_ids": region_ids})
            self._commit()
            return region

    def unwind(self, anchor: Anchor) -> canvas_ops.UnwindResult:
        with self._lock:
            return canvas_ops.unwind(self.project, anchor)

    def chain_paths(self, block_id: str) -> list[list[Link]]:
        with self._lock:
            return canvas_ops.chain_paths(self.project, block_id)

    def get_provenance(self, block_id: str):
        with self._lock:
            return canvas_ops.get_provenance(self.project, block_id)

    def sync_now(self) -> None:
        with self._lock:
            self._sync()
            self._commit()
