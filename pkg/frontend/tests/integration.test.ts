/**
 * End-to-end against the real Python backend: fixture frames are written as
 * PNGs, the server is spawned, and scripted click sequences are saved and
 * read back. The server-stored masks must equal the client-side assembly
 * pixel for pixel, and reloading must restore the exact selection.
 */
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { overlayFacePixels } from "../src/overlay.js";
import { EditorSession } from "../src/session.js";

const PORT = 8466;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let root: string;

function writeFramePng(path: string, w: number, h: number, colorAt: (x: number, y: number) => [number, number, number]): void {
  const png = new PNG({ width: w, height: h });
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const [r, g, b] = colorAt(x, y);
      const o = (y * w + x) * 4;
      png.data[o] = r;
      png.data[o + 1] = g;
      png.data[o + 2] = b;
      png.data[o + 3] = 255;
    }
  }
  writeFileSync(path, PNG.sync.write(png));
}

async function waitForServer(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/frames`);
      if (res.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("server did not come up in time");
}

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), "maskeditor-"));
  // three fixture frames with clearly separated solid regions
  writeFramePng(join(root, "fixture0.png"), 16, 12, (x, y) =>
    x < 8 ? (y < 6 ? [250, 40, 40] : [40, 250, 40]) : y < 6 ? [40, 40, 250] : [250, 250, 40]);
  writeFramePng(join(root, "fixture1.png"), 20, 10, (x) =>
    x < 7 ? [10, 10, 10] : x < 14 ? [120, 120, 120] : [240, 240, 240]);
  writeFramePng(join(root, "fixture2.png"), 10, 10, (x, y) =>
    (x + y) < 10 ? [200, 30, 150] : [30, 180, 220]);

  server = spawn("python3", ["-m", "faceswap3d.cli", "serve", "--root", root,
                             "--port", String(PORT)],
                 { stdio: "ignore" });
  await waitForServer();
}, 30000);

afterAll(() => {
  server?.kill();
});

describe("mask editor against the live backend", () => {
  it("lists the three fixture frames", async () => {
    const api = new ApiClient(BASE);
    const frames = await api.frames();
    expect(frames.map((f) => f.id)).toEqual(["fixture0", "fixture1", "fixture2"]);
  });

  it("scripted clicks + save produce server masks identical to the client assembly", async () => {
    const api = new ApiClient(BASE);
    const clicks: Record<string, Array<[number, number]>> = {
      fixture0: [[1, 1], [12, 2], [12, 8], [12, 8]],  // toggle one quadrant twice
      fixture1: [[2, 5], [16, 3]],
      fixture2: [[9, 9]],
    };
    for (const [frameId, pts] of Object.entries(clicks)) {
      const regions = await api.regions(frameId);
      const session = new EditorSession(frameId, regions);
      for (const [x, y] of pts) {
        session.toggleAt(x, y);
      }
      await api.saveMask(frameId, session.selectedIds());
      session.markSaved();

      const bytes = await api.maskBytes(frameId);
      expect(bytes).not.toBeNull();
      const png = PNG.sync.read(Buffer.from(bytes!));
      expect(png.width).toBe(regions.width);
      expect(png.height).toBe(regions.height);
      const local = session.maskPixels();
      for (let i = 0; i < local.length; i++) {
        expect(png.data[i * 4]).toBe(local[i]); // grayscale PNG decodes to RGBA
      }
      // the on-screen overlay marks exactly the same pixels
      expect([...overlayFacePixels(session)]).toEqual([...local]);
    }
  }, 20000);

  it("reload restores the saved selection exactly", async () => {
    const api = new ApiClient(BASE);
    const regions = await api.regions("fixture0");
    const session = new EditorSession("fixture0", regions);
    session.toggleAt(1, 1);
    session.toggleAt(12, 8);
    const saved = session.selectedIds();
    await api.saveMask("fixture0", saved);

    const fresh = new EditorSession("fixture0", await api.regions("fixture0"));
    const stored = await api.selection("fixture0");
    expect(stored.stored).toBe(true);
    fresh.restore(stored.selected);
    expect(fresh.selectedIds()).toEqual(saved);
    expect(fresh.dirty).toBe(false);
  });

  it("saving an empty selection stores an empty mask", async () => {
    const api = new ApiClient(BASE);
    await api.saveMask("fixture2", []);
    const bytes = await api.maskBytes("fixture2");
    const png = PNG.sync.read(Buffer.from(bytes!));
    for (let i = 0; i < png.width * png.height; i++) {
      expect(png.data[i * 4]).toBe(0);
    }
  });

  it("surfaces server rejection of unknown region ids", async () => {
    const api = new ApiClient(BASE);
    await expect(api.saveMask("fixture2", [999])).rejects.toThrow(/save failed: 400/);
  });
});
