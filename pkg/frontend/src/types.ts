export interface FrameInfo {
  id: string;
  image: string;
}

/** Region proposal payload from GET /frame/{id}/regions. */
export interface RegionData {
  count: number;
  width: number;
  height: number;
  /** Row-major region id per pixel. */
  ids: number[];
}

export interface SaveResponse {
  ok: boolean;
  pixels: number;
  selected: number[];
}

export interface SelectionResponse {
  selected: number[];
  stored: boolean;
}
