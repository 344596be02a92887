// Typed HTTP client over the workbench API. Every mutation round-trips
// through the server; the client never fabricates state.

import type {
  Annotation,
  ApiEvent,
  Block,
  Cell,
  CellOutput,
  Code,
  DataSource,
  Link,
  Project,
  Region,
  TablePayload,
  UnwindResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.base}/api/v1${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    const data = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      throw new ApiError(resp.status, data?.error ?? "error",
        data?.message ?? resp.statusText);
    }
    return data as T;
  }

  listProjects(): Promise<{ id: string; name: string }[]> {
    return this.request("GET", "/projects");
  }

  getProject(id: string): Promise<Project> {
    return this.request("GET", `/projects/${id}`);
  }

  importSource(projectId: string, kind: string, name: string, content: string,
    origin: Record<string, unknown>): Promise<DataSource> {
    return this.request("POST", `/projects/${projectId}/sources`,
      { kind, name, content, origin });
  }

  getSource(id: string): Promise<DataSource> {
    return this.request("GET", `/sources/${id}`);
  }

  annotate(documentId: string, span: [number, number], codeIds: string[],
    note: string, author: string): Promise<Annotation> {
    return this.request("POST", `/documents/${documentId}/annotations`,
      { span, code_ids: codeIds, note, author });
  }

  annotations(params: { doc?: string; code?: string }): Promise<Annotation[]> {
    const q = new URLSearchParams();
    if (params.doc) q.set("doc", params.doc);
    if (params.code) q.set("code", params.code);
    return this.request("GET", `/annotations?${q}`);
  }

  createCode(label: string, color?: string): Promise<Code> {
    return this.request("POST", "/codes", { label, color });
  }

  suggestCodes(prefix: string): Promise<Code[]> {
    return this.request("GET", `/codes?prefix=${encodeURIComponent(prefix)}`);
  }

  tableView(tableId: string, filters: Record<string, unknown>[],
    sorts: Record<string, unknown>[]): Promise<TablePayload> {
    return this.request("POST", `/tables/${tableId}/view`, { filters, sorts });
  }

  addCell(kind: string, source: string, index?: number): Promise<Cell> {
    return this.request("POST", "/notebook/cells", { kind, source, index });
  }

  updateCell(cellId: string, source: string): Promise<Cell> {
    return this.request("PUT", `/cells/${cellId}`, { source });
  }

  getCell(cellId: string): Promise<Cell> {
    return this.request("GET", `/cells/${cellId}`);
  }

  executeCell(cellId: string): Promise<CellOutput[]> {
    return this.request("POST", `/cells/${cellId}/execute`);
  }

  executeAll(): Promise<Record<string, CellOutput[]>> {
    return this.request("POST", "/notebook/execute_all");
  }

  createBlock(body: Record<string, unknown>): Promise<Block> {
    return this.request("POST", "/canvas/blocks", body);
  }

  acceptSuggestion(descriptor: Record<string, unknown>,
    position: [number, number]): Promise<{ block: Block; link: Link | null }> {
    return this.request("POST", "/canvas/blocks", { descriptor, position });
  }

  getBlock(blockId: string): Promise<Block> {
    return this.request("GET", `/canvas/blocks/${blockId}`);
  }

  patchBlock(blockId: string, patch: Record<string, unknown>): Promise<Block> {
    return this.request("PATCH", `/canvas/blocks/${blockId}`, patch);
  }

  deleteBlock(blockId: string): Promise<{ removed: string[] }> {
    return this.request("DELETE", `/canvas/blocks/${blockId}`);
  }

  createLink(from: Record<string, unknown>, to: Record<string, unknown>,
    label?: string): Promise<Link> {
    return this.request("POST", "/canvas/links", { from, to, label });
  }

  getLink(linkId: string): Promise<Link> {
    return this.request("GET", `/canvas/links/${linkId}`);
  }

  createRegion(name: string,
    bounds: [number, number, number, number]): Promise<Region> {
    return this.request("POST", "/canvas/regions", { name, bounds });
  }

  getRegion(regionId: string): Promise<Region> {
    return this.request("GET", `/canvas/regions/${regionId}`);
  }

  unwind(anchor: Record<string, unknown>): Promise<UnwindResult> {
    return this.request("POST", "/canvas/unwind", { anchor });
  }

  provenance(blockId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/canvas/blocks/${blockId}/provenance`);
  }

  events(since: number): Promise<ApiEvent[]> {
    return this.request("GET", `/events?since=${since}&stream=false`);
  }
}
