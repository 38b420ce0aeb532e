/** Deterministic image encoders.
 *
 * The built-in `patchproj-<dim>` encoder pools the image onto a fixed
 * 16x16 grid (per-channel cell means plus a constant bias feature) and
 * multiplies that by a pseudo-random projection matrix derived from the
 * encoder id. No model weights, no I/O, bitwise reproducible across runs
 * and machines: exactly what the determinism contract needs. A real
 * vision backbone can be slotted in behind the same interface.
 */

import type { Raster } from "./types.js";

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  embed(raster: Raster): Float32Array;
}

const GRID = 16;
const FEATURES = GRID * GRID * 3 + 1; // cell means per channel + bias

/** mulberry32: tiny seeded PRNG, stable across platforms. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

function patchFeatures(raster: Raster): Float64Array {
  const features = new Float64Array(FEATURES);
  const counts = new Float64Array(GRID * GRID);
  const { width, height, data } = raster;
  for (let y = 0; y < height; y++) {
    const gy = Math.min(GRID - 1, Math.floor((y * GRID) / height));
    for (let x = 0; x < width; x++) {
      const gx = Math.min(GRID - 1, Math.floor((x * GRID) / width));
      const cell = gy * GRID + gx;
      const offset = (y * width + x) * 4;
      features[cell * 3] += data[offset];
      features[cell * 3 + 1] += data[offset + 1];
      features[cell * 3 + 2] += data[offset + 2];
      counts[cell]++;
    }
  }
  for (let cell = 0; cell < GRID * GRID; cell++) {
    const n = counts[cell];
    if (n > 0) {
      features[cell * 3] /= n * 255;
      features[cell * 3 + 1] /= n * 255;
      features[cell * 3 + 2] /= n * 255;
    }
  }
  features[FEATURES - 1] = 1; // bias keeps all-black crops away from the zero vector
  return features;
}

class PatchProjectionEncoder implements Encoder {
  readonly id: string;
  readonly dim: number;
  private readonly projection: Float64Array;

  constructor(id: string, dim: number) {
    this.id = id;
    this.dim = dim;
    const rand = mulberry32(fnv1a(id));
    this.projection = new Float64Array(dim * FEATURES);
    const scale = 1 / Math.sqrt(FEATURES);
    for (let i = 0; i < this.projection.length; i++) {
      this.projection[i] = (rand() * 2 - 1) * scale;
    }
  }

  embed(raster: Raster): Float32Array {
    const features = patchFeatures(raster);
    const out = new Float64Array(this.dim);
    for (let row = 0; row < this.dim; row++) {
      let sum = 0;
      const base = row * FEATURES;
      for (let col = 0; col < FEATURES; col++) {
        sum += this.projection[base + col] * features[col];
      }
      out[row] = sum;
    }
    let norm = 0;
    for (let i = 0; i < this.dim; i++) norm += out[i] * out[i];
    norm = Math.sqrt(norm);
    const result = new Float32Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      result[i] = Math.fround(out[i] / norm);
    }
    return result;
  }
}

/** Parse an encoder identifier like "patchproj-64". */
export function createEncoder(id: string): Encoder {
  const match = /^patchproj-(\d+)$/.exec(id);
  if (!match) {
    throw new Error(`unknown encoder '${id}' (expected patchproj-<dim>)`);
  }
  const dim = Number(match[1]);
  if (dim < 1 || dim > 4096) {
    throw new Error(`encoder dim out of range: ${dim}`);
  }
  return new PatchProjectionEncoder(id, dim);
}
