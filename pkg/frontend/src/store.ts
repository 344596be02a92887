// Client model: a pure function of (initial snapshot, events applied in seq
// order). Mutations never touch the model directly; each event names the
// entities to refetch, and lists stay ordered because persisted ids are
// allocation-ordered.

import { ApiClient } from "./api.js";
import type { ApiEvent, Project } from "./types.js";

type Listener = () => void;

function mergeById<T extends { id: string }>(items: T[], id: string,
  fetched: T | null): void {
  const index = items.findIndex((item) => item.id === id);
  if (index >= 0) {
    if (fetched === null) items.splice(index, 1);
    else items[index] = fetched;
    return;
  }
  if (fetched !== null) {
    items.push(fetched);
    items.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  }
}

export class Store {
  project: Project;
  lastSeq = 0;
  private listeners: Listener[] = [];

  constructor(readonly api: ApiClient, snapshot: Project, atSeq = 0) {
    this.project = snapshot;
    this.lastSeq = atSeq;
  }

  static async load(api: ApiClient, projectId: string): Promise<Store> {
    const seqProbe = await api.events(0);
    const snapshot = await api.getProject(projectId);
    const atSeq = seqProbe.length ? seqProbe[seqProbe.length - 1]!.seq : 0;
    return new Store(api, snapshot, atSeq);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  /** Pull and apply every event after lastSeq (at-least-once; dedupe by seq). */
  async syncEvents(): Promise<number> {
    const events = await this.api.events(this.lastSeq);
    let applied = 0;
    for (const event of events) {
      if (event.seq <= this.lastSeq) continue;
      await this.applyEvent(event);
      applied += 1;
    }
    if (applied > 0) this.notify();
    return applied;
  }

  async applyEvent(event: ApiEvent): Promise<void> {
    const ids = event.ids;
    switch (event.kind) {
      case "source_imported": {
        const source = await this.api.getSource(ids.source_id);
        const sources = this.project.data_sources;
        const index = sources.findIndex((s) => s.id === source.id);
        if (index >= 0) sources[index] = source;
        else sources.push(source); // import order == event order
        break;
      }
      case "annotation_added": {
        const fetched = await this.api.annotations({ doc: ids.document_id });
        const kept = this.project.annotations.filter(
          (a) => a.document_id !== ids.document_id);
        this.project.annotations = kept.concat(fetched)
          .sort((a, b) => (a.id < b.id ? -1 : 1));
        break;
      }
      case "cell_executed": {
        const cell = await this.api.getCell(ids.cell_id).catch(() => null);
        if (cell !== null) {
          const cells = this.project.notebook.cells;
          const index = cells.findIndex((c) => c.id === cell.id);
          if (index >= 0) cells[index] = cell;
          else cells.push(cell);
        }
        break;
      }
      case "block_updated":
      case "block_stale": {
        for (const blockId of ids.block_ids ?? []) {
          const block = await this.api.getBlock(blockId).catch(() => null);
          mergeById(this.project.canvas.blocks, blockId, block);
        }
        for (const linkId of ids.link_ids ?? []) {
          const link = await this.api.getLink(linkId).catch(() => null);
          mergeById(this.project.canvas.links, linkId, link);
        }
        for (const regionId of ids.region_ids ?? []) {
          const region = await this.api.getRegion(regionId).catch(() => null);
          mergeById(this.project.canvas.regions, regionId, region);
        }
        break;
      }
    }
    this.lastSeq = event.seq;
  }

  // codebook changes emit no event; apply the server echo directly
  addCodeEcho(code: { id: string; label: string; color: string;
    description: string | null }): void {
    mergeById(this.project.codebook, code.id, code);
    this.notify();
  }

  document(documentId: string) {
    for (const source of this.project.data_sources) {
      if (source.kind === "text" && source.payload.id === documentId) {
        return source;
      }
    }
    return null;
  }

  table(tableId: string) {
    for (const source of this.project.data_sources) {
      if (source.kind === "table" && source.payload.id === tableId) {
        return source;
      }
    }
    return null;
  }

  block(blockId: string) {
    return this.project.canvas.blocks.find((b) => b.id === blockId) ?? null;
  }
}
