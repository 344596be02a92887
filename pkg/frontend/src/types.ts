// Wire types mirroring the canonical project serialization.

export interface Origin {
  method: string;
  participant: string | null;
  collected_at: string | null;
  note: string | null;
}

export interface TextDocumentPayload {
  id: string;
  content: string;
  length: number;
}

export interface ColumnSpec {
  name: string;
  dtype: string;
}

export interface TablePayload {
  id: string;
  columns: ColumnSpec[];
  rows: Record<string, unknown>[];
  row_ids: string[];
  lineage: [string, string][][] | null;
  meta: Record<string, unknown> | null;
}

export interface DataSource {
  id: string;
  kind: "text" | "table";
  name: string;
  origin: Origin;
  payload: TextDocumentPayload | TablePayload;
}

export interface Code {
  id: string;
  label: string;
  color: string;
  description: string | null;
}

export interface Annotation {
  id: string;
  document_id: string;
  span: [number, number];
  code_ids: string[];
  note: string;
  author: string;
  created_at: string;
}

export interface Mark {
  element_id: string;
  key: string;
  value: Record<string, any>;
  lineage: [string, string][];
}

export interface ChartPayload {
  chart_kind: "scatter" | "histogram" | "bar" | "wordcloud";
  marks: Mark[];
  x_label: string;
  y_label: string;
  title: string;
  meta: Record<string, unknown>;
  source_cell: string | null;
  abstraction_level: number;
}

export interface CellOutput {
  kind: "value" | "table" | "chart" | "error";
  payload: any;
  produced_by: string;
}

export interface Cell {
  id: string;
  kind: "code" | "markdown";
  source: string;
  outputs: CellOutput[];
  execution_count: number | null;
  content_hash: string;
}

export interface Provenance {
  origin: Origin;
  pipeline: string[];
  source_names: string[];
  icon_key: string;
}

export interface AnchorRef {
  block_id: string;
  subregion: Record<string, any> | null;
}

export interface Block {
  id: string;
  kind: "quote" | "table_slice" | "datapoint" | "chart" | "note";
  payload: any;
  source_ref: Record<string, any>;
  provenance: Provenance;
  abstraction_level: number;
  position: [number, number];
  size: [number, number];
  sync_mode: "live" | "snapshot";
  stale: boolean;
  upstream_hash: string;
}

export interface Link {
  id: string;
  from: AnchorRef;
  to: AnchorRef;
  label: string | null;
  dangling_from: boolean;
  dangling_to: boolean;
}

export interface Region {
  id: string;
  name: string;
  bounds: [number, number, number, number];
  members: string[];
}

export interface Canvas {
  blocks: Block[];
  links: Link[];
  regions: Region[];
}

export interface Project {
  schema_version: number;
  id: string;
  name: string;
  created_at: string;
  modified_at: string;
  join_key: string;
  next_id: number;
  data_sources: DataSource[];
  codebook: Code[];
  annotations: Annotation[];
  notebook: { cells: Cell[] };
  canvas: Canvas;
}

export interface ApiEvent {
  seq: number;
  kind: "cell_executed" | "block_updated" | "block_stale" | "annotation_added"
    | "source_imported";
  ids: Record<string, any>;
}

export interface UnwindSuggestion {
  kind: string;
  abstraction_level: number;
  source_ref: Record<string, any>;
  provenance: Provenance;
  preview: Record<string, any>;
  title: string;
  parent_anchor: AnchorRef;
}

export interface UnwindResult {
  suggestions: UnwindSuggestion[];
  flag: string | null;
}

// Drag payloads move selections/outputs between panes.
export type DragPayload =
  | { type: "extract"; selection: Record<string, any> }
  | { type: "cell_output"; cell_id: string; output_index: number }
  | { type: "anchor"; anchor: AnchorRef };

export function isTable(p: DataSource["payload"]): p is TablePayload {
  return (p as TablePayload).columns !== undefined;
}
