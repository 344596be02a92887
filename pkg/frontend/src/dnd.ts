// Pointer-based drag controller (plain mouse events, no HTML5 DnD, so the
// whole flow is synthesizable in headless tests).

import type { DragPayload } from "./types.js";

export class DragController {
  payload: DragPayload | null = null;

  start(payload: DragPayload): void {
    this.payload = payload;
  }

  take(): DragPayload | null {
    const payload = this.payload;
    this.payload = null;
    return payload;
  }

  cancel(): void {
    this.payload = null;
  }
}
