import type { Raster } from "./types.js";

export interface ClampResult {
  /** Integer pixel box [x0, y0, x1, y1], or null when nothing is left. */
  box: [number, number, number, number] | null;
  clamped: boolean;
}

/** Clamp a box to the image; degenerate results come back as null. */
export function clampBox(
  bbox: [number, number, number, number],
  width: number,
  height: number,
): ClampResult {
  const x0 = Math.max(0, Math.floor(bbox[0]));
  const y0 = Math.max(0, Math.floor(bbox[1]));
  const x1 = Math.min(width, Math.ceil(bbox[2]));
  const y1 = Math.min(height, Math.ceil(bbox[3]));
  const clamped = x0 !== bbox[0] || y0 !== bbox[1] || x1 !== bbox[2] || y1 !== bbox[3];
  if (x1 - x0 < 1 || y1 - y0 < 1) {
    return { box: null, clamped };
  }
  return { box: [x0, y0, x1, y1], clamped };
}

/** Extract a crop and pad it to a square canvas (black padding, centered),
 * so every crop reaches the encoder with the same aspect handling. */
export function cropToSquare(raster: Raster, box: [number, number, number, number]): Raster {
  const [x0, y0, x1, y1] = box;
  const w = x1 - x0;
  const h = y1 - y0;
  const side = Math.max(w, h);
  const out = new Uint8Array(side * side * 4);
  const dx = Math.floor((side - w) / 2);
  const dy = Math.floor((side - h) / 2);
  for (let y = 0; y < h; y++) {
    const src = ((y0 + y) * raster.width + x0) * 4;
    const dst = ((dy + y) * side + dx) * 4;
    out.set(raster.data.subarray(src, src + w * 4), dst);
  }
  // opaque alpha everywhere, including the padding
  for (let i = 3; i < out.length; i += 4) out[i] = 255;
  return { width: side, height: side, data: out };
}
