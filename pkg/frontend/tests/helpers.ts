import { ApiClient, FramePayload } from "../src/api.js";
import { BASE_URL } from "./serverUrl.js";

/** Bytes carrying a PNG signature; `tag` keeps different frames distinct. */
export function pngBytes(tag: number): Uint8Array {
  const signature = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];
  return new Uint8Array([...signature, 0, 0, 0, 13, tag & 0xff, tag >> 8]);
}

export function makeFrames(
  count: number,
  captions: (string | null)[] = [],
): FramePayload[] {
  return Array.from({ length: count }, (_, i) => ({
    name: `frame-${i + 1}.png`,
    data: pngBytes(i + 1),
    caption: captions[i] ?? null,
  }));
}

export function makeClient(): ApiClient {
  return new ApiClient(BASE_URL);
}
