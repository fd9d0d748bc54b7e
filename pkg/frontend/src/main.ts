import { ApiClient } from "./api.js";
import { renderOverlay } from "./overlay.js";
import { EditorSession, FrameNavigator } from "./session.js";

const api = new ApiClient("");

const frameList = document.getElementById("frame-list") as HTMLUListElement;
const imageCanvas = document.getElementById("image") as HTMLCanvasElement;
const overlayCanvas = document.getElementById("overlay") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLSpanElement;
const bannerEl = document.getElementById("banner") as HTMLDivElement;

let nav: FrameNavigator;
let session: EditorSession | null = null;

function setBanner(message: string | null): void {
  bannerEl.textContent = message ?? "";
  bannerEl.style.display = message ? "block" : "none";
}

function setStatus(): void {
  if (!session) {
    return;
  }
  const n = session.selectedIds().length;
  statusEl.textContent =
    `${session.frameId} — ${n} region${n === 1 ? "" : "s"} selected` +
    (session.dirty ? " (unsaved)" : "");
  for (const li of frameList.querySelectorAll("li")) {
    li.classList.toggle("active", li.dataset.frame === session.frameId);
  }
}

function drawOverlay(): void {
  if (!session) {
    return;
  }
  const { width, height } = session.regions;
  overlayCanvas.width = width;
  overlayCanvas.height = height;
  const ctx = overlayCanvas.getContext("2d")!;
  const data = ctx.createImageData(width, height);
  data.data.set(renderOverlay(session));
  ctx.putImageData(data, 0, 0);
}

async function loadFrame(frameId: string): Promise<void> {
  setBanner(null);
  const regions = await api.regions(frameId);
  session = new EditorSession(frameId, regions);
  try {
    const stored = await api.selection(frameId);
    if (stored.stored) {
      session.restore(stored.selected);
    }
  } catch {
    // a missing stored mask is fine; start empty
  }

  imageCanvas.width = regions.width;
  imageCanvas.height = regions.height;
  const img = new Image();
  img.onload = () => {
    imageCanvas.getContext("2d")!.drawImage(img, 0, 0);
  };
  img.src = api.imageUrl(frameId);

  drawOverlay();
  setStatus();
}

function canvasPixel(ev: MouseEvent): [number, number] | null {
  if (!session) {
    return null;
  }
  const rect = overlayCanvas.getBoundingClientRect();
  const x = Math.floor(((ev.clientX - rect.left) / rect.width) * session.regions.width);
  const y = Math.floor(((ev.clientY - rect.top) / rect.height) * session.regions.height);
  if (x < 0 || y < 0 || x >= session.regions.width || y >= session.regions.height) {
    return null;
  }
  return [x, y];
}

async function save(): Promise<void> {
  if (!session) {
    return;
  }
  try {
    await api.saveMask(session.frameId, session.selectedIds());
    session.markSaved();
    setBanner(null);
  } catch (err) {
    // keep the dirty flag so the work is not silently lost
    setBanner(`save failed: ${err instanceof Error ? err.message : err}`);
  }
  setStatus();
}

function moveFrame(delta: number): void {
  if (!session) {
    return;
  }
  let target = nav.move(delta, session.dirty);
  if (target === null && session.dirty) {
    if (window.confirm("Discard unsaved changes on this frame?")) {
      target = nav.move(delta, true, true);
    }
  }
  if (target !== null) {
    void loadFrame(target);
  }
}

function jumpTo(frameId: string): void {
  if (!session) {
    return;
  }
  let target = nav.jump(frameId, session.dirty);
  if (target === null && session.dirty && frameId !== session.frameId) {
    if (window.confirm("Discard unsaved changes on this frame?")) {
      target = nav.jump(frameId, true, true);
    }
  }
  if (target !== null) {
    void loadFrame(target);
  }
}

async function init(): Promise<void> {
  let frames;
  try {
    frames = await api.frames();
  } catch (err) {
    setBanner(`cannot reach server: ${err instanceof Error ? err.message : err}`);
    return;
  }
  if (frames.length === 0) {
    setBanner("the server reports no frames");
    return;
  }
  nav = new FrameNavigator(frames.map((f) => f.id));
  frameList.innerHTML = "";
  for (const f of frames) {
    const li = document.createElement("li");
    li.textContent = f.id;
    li.dataset.frame = f.id;
    li.addEventListener("click", () => jumpTo(f.id));
    frameList.appendChild(li);
  }

  overlayCanvas.addEventListener("click", (ev) => {
    const px = canvasPixel(ev);
    if (px && session) {
      session.toggleAt(px[0], px[1]);
      drawOverlay();
      setStatus();
    }
  });

  document.addEventListener("keydown", (ev) => {
    if (ev.key === "n") {
      moveFrame(1);
    } else if (ev.key === "p") {
      moveFrame(-1);
    } else if (ev.key === "s") {
      void save();
    }
  });

  (document.getElementById("save") as HTMLButtonElement)
    .addEventListener("click", () => void save());
  (document.getElementById("prev") as HTMLButtonElement)
    .addEventListener("click", () => moveFrame(-1));
  (document.getElementById("next") as HTMLButtonElement)
    .addEventListener("click", () => moveFrame(1));

  await loadFrame(nav.current);
}

void init();
