import type { RegionData } from "./types.js";

/**
 * Editing state for one frame: the server's region map plus the set of
 * region ids currently marked as face. Pure logic, no DOM; the overlay and
 * the saved mask are both derived from the same selection so preview and
 * export cannot diverge.
 */
export class EditorSession {
  readonly frameId: string;
  readonly regions: RegionData;
  private selected = new Set<number>();
  private _dirty = false;

  constructor(frameId: string, regions: RegionData, initial: number[] = []) {
    this.frameId = frameId;
    this.regions = regions;
    for (const id of initial) {
      this.assertKnown(id);
      this.selected.add(id);
    }
  }

  private assertKnown(id: number): void {
    if (!Number.isInteger(id) || id < 0 || id >= this.regions.count) {
      throw new Error(`unknown region id ${id}`);
    }
  }

  get dirty(): boolean {
    return this._dirty;
  }

  selectedIds(): number[] {
    return [...this.selected].sort((a, b) => a - b);
  }

  isSelected(id: number): boolean {
    return this.selected.has(id);
  }

  regionAt(x: number, y: number): number {
    const { width, height, ids } = this.regions;
    if (x < 0 || y < 0 || x >= width || y >= height) {
      throw new Error(`pixel (${x}, ${y}) outside ${width}x${height}`);
    }
    return ids[y * width + x];
  }

  /** Click handler: toggles the region under the pixel in or out of the mask. */
  toggleAt(x: number, y: number): number {
    const id = this.regionAt(x, y);
    this.toggle(id);
    return id;
  }

  toggle(id: number): void {
    this.assertKnown(id);
    if (this.selected.has(id)) {
      this.selected.delete(id);
    } else {
      this.selected.add(id);
    }
    this._dirty = true;
  }

  /** Binary mask (255 = face) assembled client-side from the selection. */
  maskPixels(): Uint8Array {
    const { width, height, ids } = this.regions;
    const out = new Uint8Array(width * height);
    for (let i = 0; i < width * height; i++) {
      out[i] = this.selected.has(ids[i]) ? 255 : 0;
    }
    return out;
  }

  /** Called by the app after the server acknowledged the save. */
  markSaved(): void {
    this._dirty = false;
  }

  /** Replace the selection (e.g. restored from the server's stored mask). */
  restore(selected: number[]): void {
    this.selected = new Set<number>();
    for (const id of selected) {
      this.assertKnown(id);
      this.selected.add(id);
    }
    this._dirty = false;
  }
}

/** Frame navigation with an unsaved-changes guard. */
export class FrameNavigator {
  private index = 0;

  constructor(readonly frameIds: string[]) {
    if (frameIds.length === 0) {
      throw new Error("no frames to browse");
    }
  }

  get current(): string {
    return this.frameIds[this.index];
  }

  get position(): number {
    return this.index;
  }

  /**
   * Attempt to move by delta. Returns the frame to load, or null when the
   * move is blocked (dirty session and not confirmed) or out of range
   * (first/last frame: stays put).
   */
  move(delta: number, dirty: boolean, confirmed = false): string | null {
    const next = this.index + delta;
    if (next < 0 || next >= this.frameIds.length) {
      return null;
    }
    if (dirty && !confirmed) {
      return null;
    }
    this.index = next;
    return this.current;
  }

  jump(frameId: string, dirty: boolean, confirmed = false): string | null {
    const next = this.frameIds.indexOf(frameId);
    if (next < 0 || next === this.index) {
      return null;
    }
    if (dirty && !confirmed) {
      return null;
    }
    this.index = next;
    return this.current;
  }
}
