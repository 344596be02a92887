"""Local HTTP API over a project session, plus a server-push event stream.

All bodies and responses use the canonical serialization form (UTF-8 JSON,
sorted keys). Mutations are serialized through the session's writer lock and
each one's events are committed atomically with it, so the event order equals
the mutation application order. Single-user, loopback only.
"""

from __future__ import annotations

import base64
import json
import queue
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.responses import StreamingResponse

from .canonical import canonical_dumps
from .errors import (
    ConflictError,
    NotFoundError,
    ValidationError,
    WorkbenchError,
)
from .foraging import TableView
from .model import (
    Anchor,
    OriginDescriptor,
    Project,
    load_project,
    save_project,
)
from .session import ApiEvent, EventBus, Session

API = "/api/v1"


def canonical_response(payload: Any, status_code: int = 200) -> Response:
    return Response(content=canonical_dumps(payload) + "\n",
                    media_type="application/json", status_code=status_code)


def _status_for(exc: WorkbenchError) -> int:
    if isinstance(exc, ValidationError):
        return 400
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, ConflictError):
        return 409
    return 422


async def _body(request: Request) -> dict[str, Any]:
    raw = await request.body()
    if not raw:
        return {}
    try:
        data = json.loads(raw)
    except ValueError as exc:
        raise ValidationError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("request body must be a JSON object")
    return data


class Registry:
    """Sessions hosted by this server; one shared event bus keeps the /events
    feed totally ordered across projects."""

    def __init__(self) -> None:
        self.bus = EventBus()
        self.sessions: dict[str, Session] = {}

    def add_project(self, project: Project) -> Session:
        session = Session(project, bus=self.bus)
        self.sessions[project.id] = session
        return session

    def session(self, project_id: str) -> Session:
        try:
            return self.sessions[project_id]
        except KeyError:
            raise NotFoundError(f"unknown project {project_id}",
                                entity_id=project_id) from None

    def _find(self, probe: Any) -> Session:
        for session in self.sessions.values():
            if probe(session.project):
                return session
        raise NotFoundError("no project owns the referenced entity")

    def by_source(self, source_id: str) -> Session:
        return self._find(lambda p: p.source_by_id(source_id) is not None)

    def by_document(self, document_id: str) -> Session:
        return self._find(lambda p: p.document_source(document_id) is not None)

    def by_table(self, table_id: str) -> Session:
        return self._find(lambda p: p.table_source(table_id) is not None)

    def by_cell(self, cell_id: str) -> Session:
        return self._find(lambda p: p.notebook.cell_by_id(cell_id) is not None)

    def by_block(self, block_id: str) -> Session:
        return self._find(lambda p: p.canvas.block_by_id(block_id) is not None)

    def single(self) -> Session:
        if len(self.sessions) == 1:
            return next(iter(self.sessions.values()))
        if not self.sessions:
            raise NotFoundError("no project loaded")
        raise ValidationError("server hosts multiple projects; address by id")


def _sse(event: ApiEvent) -> str:
    return f"id: {event.seq}\nevent: {event.kind}\ndata: {canonical_dumps(event.to_json())}\n\n"


def create_app(registry: Registry | None = None) -> FastAPI:
    registry = registry or Registry()
    app = FastAPI(title="mmworkbench", docs_url=None, redoc_url=None)
    app.state.registry = registry

    @app.exception_handler(WorkbenchError)
    async def _handle(request: Request, exc: WorkbenchError) -> Response:
        return canonical_response(
            {"error": exc.code, "message": str(exc),
             "entity_id": getattr(exc, "entity_id", None)},
            status_code=_status_for(exc))

    # -- projects ---------------------------------------------------------

    @app.get(API + "/projects")
    async def list_projects() -> Response:
        return canonical_response([
            {"id": s.project.id, "name": s.project.name}
            for s in registry.sessions.values()
        ])

    @app.post(API + "/projects")
    async def create_project(request: Request) -> Response:
        body = await _body(request)
        name = body.get("name")
        if not name:
            raise ValidationError("project needs a name")
        project = Project.new(name, project_id=body.get("id"))
        session = registry.add_project(project)
        return canonical_response(session.project.to_json())

    @app.get(API + "/projects/{project_id}")
    async def get_project(project_id: str) -> Response:
        session = registry.session(project_id)
        with session._lock:
            return Response(content=save_project(session.project),
                            media_type="application/json")

    @app.put(API + "/projects/{project_id}")
    async def put_project(project_id: str, request: Request) -> Response:
        raw = await request.body()
        project = load_project(raw)
        if project.id != project_id:
            raise ValidationError(
                f"body project id {project.id} does not match route {project_id}")
        session = Session(project, bus=registry.bus)
        registry.sessions[project_id] = session
        return canonical_response(project.to_json())

    # -- sources ------------------------------------------------------------

    @app.post(API + "/projects/{project_id}/sources")
    async def import_source(project_id: str, request: Request) -> Response:
        session = registry.session(project_id)
        body = await _body(request)
        for key in ("kind", "name"):
            if key not in body:
                raise ValidationError(f"source import needs {key!r}")
        if "bytes_b64" in body:
            try:
                data = base64.b64decode(body["bytes_b64"], validate=True)
            except Exception as exc:
                raise ValidationError(f"bytes_b64 is not valid base64: {exc}") from exc
        elif "content" in body:
            data = str(body["content"]).encode("utf-8")
        else:
            raise ValidationError("source import needs bytes_b64 or content")
        origin = OriginDescriptor.from_json(body.get("origin", {}))
        source = session.import_source(body["kind"], body["name"], data, origin)
        return canonical_response(source.to_json())

    @app.get(API + "/sources/{source_id}")
    async def get_source(source_id: str) -> Response:
        session = registry.by_source(source_id)
        source = session.project.source_by_id(source_id)
        return canonical_response(source.to_json())  # type: ignore[union-attr]

    @app.post(API + "/tables/{table_id}/mutate")
    async def mutate_table(table_id: str, request: Request) -> Response:
        session = registry.by_table(table_id)
        body = await _body(request)
        source = session.set_table_cell(table_id, body["row_id"], body["column"],
                                        body.get("value"))
        return canonical_response(source.to_json())

    # -- coding ---------------------------------------------------------------

    @app.post(API + "/documents/{document_id}/annotations")
    async def post_annotation(document_id: str, request: Request) -> Response:
        session = registry.by_document(document_id)
        body = await _body(request)
        span = body.get("span")
        if not isinstance(span, list) or len(span) != 2:
            raise ValidationError("annotation needs span [start, end]")
        annotation = session.annotate(
            document_id, (span[0], span[1]), body.get("code_ids", []),
            body.get("note", ""), body.get("author", ""))
        return canonical_response(annotation.to_json())

    @app.get(API + "/annotations")
    async def get_annotations(code: str | None = None,
                              doc: str | None = None) -> Response:
        if not registry.sessions:
            return canonical_response([])
        session = registry.single() if doc is None and code is None else (
            registry.by_document(doc) if doc is not None else registry.single())
        hits = session.query_annotations(document_id=doc, code_id=code)
        return canonical_response([a.to_json() for a in hits])

    @app.post(API + "/codes")
    async def post_code(request: Request) -> Response:
        body = await _body(request)
        session = registry.single()
        code = session.create_code(body.get("label", ""), body.get("color"),
                                   body.get("description"))
        return canonical_response(code.to_json())

    @app.get(API + "/codes")
    async def get_codes(prefix: str = "") -> Response:
        session = registry.single()
        return canonical_response([c.to_json() for c in session.suggest_codes(prefix)])

    # -- tables -----------------------------------------------------------------

    @app.post(API + "/tables/{table_id}/view")
    async def table_view(table_id: str, request: Request) -> Response:
        session = registry.by_table(table_id)
        body = await _body(request)
        view = TableView.from_json({"table_id": table_id, **body})
        return canonical_response(session.apply_table_view(view).to_json())

    # -- notebook -----------------------------------------------------------------

    @app.post(API + "/notebook/cells")
    async def post_cell(request: Request) -> Response:
        body = await _body(request)
        session = registry.single()
        cell = session.add_cell(body.get("kind", "code"), body.get("source", ""),
                                body.get("index"))
        return canonical_response(cell.to_json())

    @app.put(API + "/cells/{cell_id}")
    async def put_cell(cell_id: str, request: Request) -> Response:
        session = registry.by_cell(cell_id)
        body = await _body(request)
        cell = session.update_cell(cell_id, body.get("source", ""))
        return canonical_response(cell.to_json())

    @app.get(API + "/cells/{cell_id}")
    async def get_cell(cell_id: str) -> Response:
        session = registry.by_cell(cell_id)
        cell = session.project.notebook.cell_by_id(cell_id)
        return canonical_response(cell.to_json())  # type: ignore[union-attr]

    @app.post(API + "/cells/{cell_id}/execute")
    async def execute_cell(cell_id: str) -> Response:
        session = registry.by_cell(cell_id)
        outputs = session.execute_cell(cell_id)
        return canonical_response([o.to_json() for o in outputs])

    @app.post(API + "/notebook/execute_all")
    async def execute_all() -> Response:
        session = registry.single()
        results = session.execute_all()
        return canonical_response({
            cell_id: [o.to_json() for o in outputs]
            for cell_id, outputs in results.items()
        })

    # -- canvas ---------------------------------------------------------------------

    @app.post(API + "/canvas/blocks")
    async def post_block(request: Request) -> Response:
        body = await _body(request)
        session = registry.single()
        position = tuple(body.get("position", [0.0, 0.0]))
        sync_mode = body.get("sync_mode", "snapshot")
        size = tuple(body["size"]) if "size" in body else None
        if "extract" in body:
            block = session.create_block_from_extract(
                body["extract"], position, sync_mode, size)
            return canonical_response(block.to_json())
        if "cell_output" in body:
            ref = body["cell_output"]
            block = session.create_block_from_cell_output(
                ref["cell_id"], ref.get("output_index", 0), position, sync_mode, size)
            return canonical_response(block.to_json())
        if "descriptor" in body:
            block, link = session.accept_suggestion(
                body["descriptor"], position, sync_mode, size)
            return canonical_response({
                "block": block.to_json(),
                "link": link.to_json() if link else None,
            })
        if "note" in body:
            block = session.create_note_block(body["note"].get("text", ""),
                                              position, size)
            return canonical_response(block.to_json())
        raise ValidationError(
            "block creation needs extract, cell_output, descriptor, or note")

    @app.get(API + "/canvas/blocks/{block_id}")
    async def get_block(block_id: str) -> Response:
        session = registry.by_block(block_id)
        block = session.project.canvas.block_by_id(block_id)
        return canonical_response(block.to_json())  # type: ignore[union-attr]

    @app.patch(API + "/canvas/blocks/{block_id}")
    async def patch_block(block_id: str, request: Request) -> Response:
        session = registry.by_block(block_id)
        body = await _body(request)
        if "position" in body:
            session.move_block(block_id, tuple(body["position"]))
        if "size" in body:
            session.resize_block(block_id, tuple(body["size"]))
        if "sync_mode" in body:
            session.set_block_sync_mode(block_id, body["sync_mode"])
        if "region_id" in body:
            session.assign_to_region(block_id, body["region_id"])
        if body.get("refresh"):
            session.refresh_block(block_id)
        block = session.project.canvas.block_by_id(block_id)
        return canonical_response(block.to_json())  # type: ignore[union-attr]

    @app.delete(API + "/canvas/blocks/{block_id}")
    async def delete_block(block_id: str) -> Response:
        session = registry.by_block(block_id)
        removed = session.delete_block(block_id)
        return canonical_response({"removed": removed})

    @app.get(API + "/canvas/blocks/{block_id}/provenance")
    async def block_provenance(block_id: str) -> Response:
        session = registry.by_block(block_id)
        return canonical_response(session.get_provenance(block_id).to_json())

    @app.get(API + "/canvas/blocks/{block_id}/chains")
    async def block_chains(block_id: str) -> Response:
        session = registry.by_block(block_id)
        paths = session.chain_paths(block_id)
        return canonical_response([
            [link.to_json() for link in path] for path in paths])

    @app.post(API + "/canvas/links")
    async def post_link(request: Request) -> Response:
        body = await _body(request)
        for key in ("from", "to"):
            if key not in body:
                raise ValidationError(f"link needs {key!r} anchor")
        session = registry.by_block(body["from"].get("block_id", ""))
        link = session.create_link(Anchor.from_json(body["from"]),
                                   Anchor.from_json(body["to"]),
                                   body.get("label"))
        return canonical_response(link.to_json())

    @app.get(API + "/canvas/links/{link_id}")
    async def get_link(link_id: str) -> Response:
        for session in registry.sessions.values():
            link = session.project.canvas.link_by_id(link_id)
            if link is not None:
                return canonical_response(link.to_json())
        raise NotFoundError(f"unknown link {link_id}", entity_id=link_id)

    @app.post(API + "/canvas/regions")
    async def post_region(request: Request) -> Response:
        body = await _body(request)
        session = registry.single()
        bounds = body.get("bounds")
        if not isinstance(bounds, list) or len(bounds) != 4:
            raise ValidationError("region needs bounds [x, y, w, h]")
        region = session.create_region(body.get("name", ""), tuple(bounds))
        return canonical_response(region.to_json())

    @app.get(API + "/canvas/regions/{region_id}")
    async def get_region(region_id: str) -> Response:
        for session in registry.sessions.values():
            region = session.project.canvas.region_by_id(region_id)
            if region is not None:
                return canonical_response(region.to_json())
        raise NotFoundError(f"unknown region {region_id}", entity_id=region_id)

    @app.post(API + "/canvas/unwind")
    async def post_unwind(request: Request) -> Response:
        body = await _body(request)
        if "anchor" not in body:
            raise ValidationError("unwind needs an anchor")
        anchor = Anchor.from_json(body["anchor"])
        session = registry.by_block(anchor.block_id)
        return canonical_response(session.unwind(anchor).to_json())

    # -- events -------------------------------------------------------------------

    @app.get(API + "/events")
    async def events(since: int = 0, stream: bool = True,
                     limit: int | None = None,
                     idle_timeout: float | None = None) -> Response:
        bus = registry.bus
        if not stream:
            return canonical_response([e.to_json() for e in bus.since(since)])

        def generate():
            sent = since
            count = 0
            sub = bus.subscribe()
            try:
                for event in bus.since(since):
                    yield _sse(event)
                    sent = max(sent, event.seq)
                    count += 1
                    if limit is not None and count >= limit:
                        return
                while True:
                    try:
                        event = sub.get(timeout=idle_timeout or 1.0)
                    except queue.Empty:
                        if idle_timeout is not None:
                            return
                        yield ": keepalive\n\n"
                        continue
                    if event.seq <= sent:
                        continue  # replayed already; client dedupes by seq anyway
                    yield _sse(event)
                    sent = event.seq
                    count += 1
                    if limit is not None and count >= limit:
                        return
            finally:
                bus.unsubscribe(sub)

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app
