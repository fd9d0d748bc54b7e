import type { FrameInfo, RegionData, SaveResponse, SelectionResponse } from "./types.js";

/** Thin client over the labeling backend; all region geometry comes from here. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.url(path));
    if (!res.ok) {
      throw new Error(`GET ${path} failed: ${res.status}`);
    }
    return (await res.json()) as T;
  }

  async frames(): Promise<FrameInfo[]> {
    const payload = await this.getJson<{ frames: FrameInfo[] }>("/frames");
    return payload.frames;
  }

  imageUrl(frameId: string): string {
    return this.url(`/frame/${encodeURIComponent(frameId)}/image`);
  }

  async regions(frameId: string): Promise<RegionData> {
    return this.getJson<RegionData>(`/frame/${encodeURIComponent(frameId)}/regions`);
  }

  async saveMask(frameId: string, selected: number[]): Promise<SaveResponse> {
    const res = await fetch(this.url(`/frame/${encodeURIComponent(frameId)}/mask`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ selected }),
    });
    if (!res.ok) {
      throw new Error(`save failed: ${res.status}`);
    }
    return (await res.json()) as SaveResponse;
  }

  async maskBytes(frameId: string): Promise<ArrayBuffer | null> {
    const res = await fetch(this.url(`/frame/${encodeURIComponent(frameId)}/mask`));
    if (res.status === 404) {
      return null;
    }
    if (!res.ok) {
      throw new Error(`GET mask failed: ${res.status}`);
    }
    return res.arrayBuffer();
  }

  async selection(frameId: string): Promise<SelectionResponse> {
    return this.getJson<SelectionResponse>(
      `/frame/${encodeURIComponent(frameId)}/selection`,
    );
  }
}
