import type { EditorSession } from "./session.js";

/** Translucent red fill on selected regions (matching the usual red-overlay
 * convention) with darker outlines along every region-id boundary. Returns
 * RGBA bytes sized to the region map; pure so tests can run without a DOM. */
export function renderOverlay(session: EditorSession): Uint8ClampedArray {
  const { width, height, ids } = session.regions;
  const out = new Uint8ClampedArray(width * height * 4);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      const id = ids[i];
      const right = x + 1 < width ? ids[i + 1] : id;
      const down = y + 1 < height ? ids[i + width] : id;
      const boundary = id !== right || id !== down;
      const sel = session.isSelected(id);
      const o = i * 4;
      if (sel) {
        out[o] = 255;
        out[o + 3] = boundary ? 200 : 96;
      } else if (boundary) {
        out[o] = 160;
        out[o + 3] = 110;
      }
    }
  }
  return out;
}

/** Pixels the overlay marks as face (alpha-filled selected regions); used to
 * assert preview/export equivalence against the assembled mask. */
export function overlayFacePixels(session: EditorSession): Uint8Array {
  const { width, height, ids } = session.regions;
  const out = new Uint8Array(width * height);
  for (let i = 0; i < width * height; i++) {
    out[i] = session.isSelected(ids[i]) ? 255 : 0;
  }
  return out;
}
