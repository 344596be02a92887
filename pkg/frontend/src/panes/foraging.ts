// Data extraction & preparation pane: file switcher, document reader with
// coding, filterable/sortable table view, drag sources for the canvas.

import { ApiClient } from "../api.js";
import { DragController } from "../dnd.js";
import { Store } from "../store.js";
import type { DataSource, TablePayload, TextDocumentPayload } from "../types.js";
import { isTable } from "../types.js";

export class ForagingPane {
  activeSourceId: string | null = null;
  selection: { documentId: string; start: number; end: number } | null = null;
  private viewResult: TablePayload | null = null;

  constructor(private store: Store, private api: ApiClient,
    private root: HTMLElement, private dnd: DragController) {}

  render(): void {
    this.root.innerHTML = "";
    const sources = this.store.project.data_sources;
    if (sources.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "No data yet. Import a text or table source to begin.";
      this.root.appendChild(empty);
      return;
    }
    if (this.activeSourceId === null ||
        !sources.some((s) => s.id === this.activeSourceId)) {
      this.activeSourceId = sources[0]!.id;
    }

    const switcher = document.createElement("div");
    switcher.className = "file-switcher";
    for (const source of sources) {
      const button = document.createElement("button");
      button.textContent = source.name;
      button.dataset.sourceId = source.id;
      button.classList.toggle("active", source.id === this.activeSourceId);
      button.addEventListener("click", () => {
        this.activeSourceId = source.id;
        this.viewResult = null;
        this.render();
      });
      switcher.appendChild(button);
    }
    this.root.appendChild(switcher);

    const active = sources.find((s) => s.id === this.activeSourceId)!;
    if (active.kind === "text") {
      this.renderDocument(active, active.payload as TextDocumentPayload);
    } else {
      this.renderTable(active, active.payload as TablePayload);
    }
  }

  // -- document reader -----------------------------------------------------

  private renderDocument(source: DataSource, doc: TextDocumentPayload): void {
    const reader = document.createElement("div");
    reader.className = "doc-reader";
    reader.dataset.documentId = doc.id;

    const spans = this.annotationBoundaries(doc);
    let cursor = 0;
    for (const [start, end, annotated] of spans) {
      const el = document.createElement(annotated ? "mark" : "span");
      el.textContent = doc.content.slice(start, end);
      if (annotated) el.className = "annotated";
      reader.appendChild(el);
      cursor = end;
    }
    if (cursor < doc.length) {
      reader.appendChild(document.createTextNode(doc.content.slice(cursor)));
    }
    reader.addEventListener("mouseup", () => this.captureBrowserSelection(doc));
    reader.addEventListener("mousedown", () => {
      if (this.selection && this.selection.documentId === doc.id) {
        this.dnd.start({
          type: "extract",
          selection: { document_id: doc.id,
            span: [this.selection.start, this.selection.end] },
        });
      }
    });
    this.root.appendChild(reader);
    this.root.appendChild(this.buildCodePicker(doc));
  }

  private annotationBoundaries(doc: TextDocumentPayload): [number, number, boolean][] {
    const anns = this.store.project.annotations
      .filter((a) => a.document_id === doc.id);
    const cuts = new Set<number>([0, doc.length]);
    for (const a of anns) {
      cuts.add(a.span[0]);
      cuts.add(a.span[1]);
    }
    const points = [...cuts].sort((a, b) => a - b);
    const result: [number, number, boolean][] = [];
    for (let i = 0; i + 1 < points.length; i++) {
      const [s, e] = [points[i]!, points[i + 1]!];
      const covered = anns.some((a) => a.span[0] <= s && e <= a.span[1]);
      result.push([s, e, covered]);
    }
    return result;
  }

  private captureBrowserSelection(doc: TextDocumentPayload): void {
    const sel = window.getSelection?.();
    if (!sel || sel.isCollapsed || !sel.toString()) return;
    const text = sel.toString();
    const start = doc.content.indexOf(text);
    if (start >= 0) this.setSelection(doc.id, start, start + text.length);
  }

  /** Programmatic selection (also the headless-test entry point). */
  setSelection(documentId: string, start: number, end: number): void {
    this.selection = { documentId, start, end };
    const picker = this.root.querySelector<HTMLElement>(".code-picker");
    if (picker) picker.classList.add("open");
  }

  private buildCodePicker(doc: TextDocumentPayload): HTMLElement {
    const picker = document.createElement("div");
    picker.className = "code-picker";

    const input = document.createElement("input");
    input.placeholder = "code…";
    input.className = "code-input";
    const list = document.createElement("ul");
    list.className = "code-suggestions";
    input.addEventListener("input", () => {
      void this.refreshSuggestions(input.value, list, input);
    });

    const note = document.createElement("input");
    note.placeholder = "note";
    note.className = "note-input";

    const apply = document.createElement("button");
    apply.textContent = "annotate";
    apply.className = "annotate-button";
    apply.addEventListener("click", () => {
      void this.commitAnnotation(doc, input.value, note.value);
    });

    picker.append(input, list, note, apply);
    return picker;
  }

  async refreshSuggestions(prefix: string, list: HTMLElement,
    input: HTMLInputElement): Promise<void> {
    const codes = await this.api.suggestCodes(prefix);
    list.innerHTML = "";
    for (const code of codes) {
      const item = document.createElement("li");
      item.textContent = code.label;
      item.style.borderLeft = `6px solid ${code.color}`;
      item.addEventListener("click", () => {
        input.value = code.label;
      });
      list.appendChild(item);
    }
  }

  async commitAnnotation(doc: TextDocumentPayload, label: string,
    note: string): Promise<void> {
    if (!this.selection || this.selection.documentId !== doc.id) return;
    let code = this.store.project.codebook
      .find((c) => c.label.toLowerCase() === label.toLowerCase());
    if (!code && label) {
      code = await this.api.createCode(label);
      this.store.addCodeEcho(code);
    }
    await this.api.annotate(doc.id, [this.selection.start, this.selection.end],
      code ? [code.id] : [], note, "analyst");
    this.selection = null;
    await this.store.syncEvents();
  }

  // -- table view ------------------------------------------------------------

  private renderTable(source: DataSource, table: TablePayload): void {
    const controls = document.createElement("div");
    controls.className = "view-controls";
    const column = document.createElement("select");
    for (const col of table.columns) {
      const option = document.createElement("option");
      option.value = col.name;
      option.textContent = col.name;
      column.appendChild(option);
    }
    const op = document.createElement("select");
    for (const o of ["==", "!=", "<", "<=", ">", ">=", "contains"]) {
      const option = document.createElement("option");
      option.value = o;
      option.textContent = o;
      op.appendChild(option);
    }
    const literal = document.createElement("input");
    literal.placeholder = "value";
    const sort = document.createElement("select");
    for (const o of ["", "asc", "desc"]) {
      const option = document.createElement("option");
      option.value = o;
      option.textContent = o || "(no sort)";
      sort.appendChild(option);
    }
    const apply = document.createElement("button");
    apply.textContent = "apply view";
    apply.className = "apply-view";
    apply.addEventListener("click", () => {
      void this.applyView(table, column.value, op.value, literal.value, sort.value);
    });
    controls.append(column, op, literal, sort, apply);
    this.root.appendChild(controls);
    this.renderRows(table, this.viewResult ?? table);
  }

  async applyView(table: TablePayload, column: string, op: string,
    literalText: string, sortDir: string): Promise<void> {
    const dtype = table.columns.find((c) => c.name === column)?.dtype;
    let literal: unknown = literalText;
    if (dtype === "int" || dtype === "float") literal = Number(literalText);
    if (dtype === "bool") literal = literalText.toLowerCase() === "true";
    const filters = literalText === "" ? []
      : [{ column, op, literal }];
    const sorts = sortDir === "" ? [] : [{ column, direction: sortDir }];
    this.viewResult = await this.api.tableView(table.id, filters, sorts);
    this.render();
    this.viewResult = null;
  }

  private renderRows(base: TablePayload, view: TablePayload): void {
    const el = document.createElement("table");
    el.className = "data-table";
    el.dataset.tableId = base.id;
    const head = document.createElement("tr");
    head.appendChild(document.createElement("th"));
    for (const col of view.columns) {
      const th = document.createElement("th");
      th.textContent = `${col.name} (${col.dtype})`;
      head.appendChild(th);
    }
    el.appendChild(head);
    view.rows.forEach((row, i) => {
      const rowId = view.row_ids[i]!;
      const tr = document.createElement("tr");
      tr.dataset.rowId = rowId;
      const handle = document.createElement("th");
      handle.textContent = "⠿";
      handle.className = "row-handle";
      handle.addEventListener("mousedown", () => {
        this.dnd.start({ type: "extract",
          selection: { table_id: base.id, row_ids: [rowId] } });
      });
      tr.appendChild(handle);
      for (const col of view.columns) {
        const td = document.createElement("td");
        const value = row[col.name];
        td.textContent = value === null || value === undefined ? "" : String(value);
        td.dataset.column = col.name;
        td.addEventListener("mousedown", (ev) => {
          ev.stopPropagation();
          this.dnd.start({ type: "extract",
            selection: { table_id: base.id, row_id: rowId, column: col.name } });
        });
        tr.appendChild(td);
      }
      el.appendChild(tr);
    });
    this.root.appendChild(el);
  }
}
