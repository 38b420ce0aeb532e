/** Synthetic local fixture: small PNGs with seeded content plus the task
 * manifests referencing them. Used by the bridge tests and by the engine's
 * acceptance suite, so it must be deterministic. */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { encodePng } from "./png.js";
import { atomicWrite } from "./jsonl.js";
import type { Raster } from "./types.js";

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

function paint(width: number, height: number, rand: () => number): Raster {
  const data = new Uint8Array(width * height * 4);
  const baseR = Math.floor(rand() * 200);
  const baseG = Math.floor(rand() * 200);
  const baseB = Math.floor(rand() * 200);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      data[i] = (baseR + ((x * 97) % 55)) % 256;
      data[i + 1] = (baseG + ((y * 61) % 55)) % 256;
      data[i + 2] = (baseB + (((x + y) * 31) % 55)) % 256;
      data[i + 3] = 255;
    }
  }
  // a few solid rectangles so crops differ from the background
  for (let r = 0; r < 3; r++) {
    const rw = 8 + Math.floor(rand() * 16);
    const rh = 8 + Math.floor(rand() * 16);
    const rx = Math.floor(rand() * (width - rw));
    const ry = Math.floor(rand() * (height - rh));
    const color = [rand() * 255, rand() * 255, rand() * 255];
    for (let y = ry; y < ry + rh; y++) {
      for (let x = rx; x < rx + rw; x++) {
        const i = (y * width + x) * 4;
        data[i] = color[0];
        data[i + 1] = color[1];
        data[i + 2] = color[2];
      }
    }
  }
  return { width, height, data };
}

export interface FixtureOptions {
  out: string;
  images: number;
  boxes: number;
  seed: number;
}

/** Writes <out>/img-XX.png plus images.tasks.json, instances.tasks.json,
 * proposals.tasks.json (the crop manifests share the same boxes). */
export function generateFixture(options: FixtureOptions): void {
  const { out, images, boxes, seed } = options;
  mkdirSync(out, { recursive: true });
  const rand = mulberry32(seed);
  const labels = ["boat", "truck", "crane"];

  const imageTasks: Record<string, unknown>[] = [];
  const sizes: [number, number][] = [];
  for (let i = 0; i < images; i++) {
    const width = 48 + Math.floor(rand() * 48);
    const height = 48 + Math.floor(rand() * 48);
    const name = `img-${String(i).padStart(2, "0")}.png`;
    writeFileSync(join(out, name), encodePng(paint(width, height, rand)));
    sizes.push([width, height]);
    imageTasks.push({ path: name, image_id: `img-${String(i).padStart(2, "0")}` });
  }

  const instanceTasks: Record<string, unknown>[] = [];
  const proposalTasks: Record<string, unknown>[] = [];
  for (let b = 0; b < boxes; b++) {
    const i = b % images;
    const [width, height] = sizes[i];
    const w = 10 + Math.floor(rand() * (width / 2));
    const h = 10 + Math.floor(rand() * (height / 2));
    const x0 = Math.floor(rand() * (width - w));
    const y0 = Math.floor(rand() * (height - h));
    const common = {
      path: `img-${String(i).padStart(2, "0")}.png`,
      image_id: `img-${String(i).padStart(2, "0")}`,
      bbox: [x0, y0, x0 + w, y0 + h],
    };
    instanceTasks.push({ ...common, label: labels[b % labels.length] });
    proposalTasks.push({ ...common, score: Math.round(rand() * 1000) / 1000 });
  }

  atomicWrite(join(out, "images.tasks.json"), JSON.stringify({ images: imageTasks }, null, 2));
  atomicWrite(
    join(out, "instances.tasks.json"),
    JSON.stringify({ crops: instanceTasks }, null, 2),
  );
  atomicWrite(
    join(out, "proposals.tasks.json"),
    JSON.stringify({ crops: proposalTasks }, null, 2),
  );
}
